//! Tiled inference: `x = y - R(o)`, phase from `x`, coherence `sigmoid(c)`.

use super::loss::sigmoid;
use super::model::{forward, ForwardOptions, Mode};
use super::params::ModelParams;
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::phase::angle_narrow;
use crate::preprocess::{observe, ObservationStack};
use crate::raster::{form_interferogram, Interferogram, Raster, SlcImage};
use crate::scalar::Scalar;

pub const TILE: usize = 128;
pub const OVERLAP: usize = 16;
/// Pixels of an interior tile edge dropped when stitching.
pub const MARGIN: usize = OVERLAP / 2;
/// Tiles evaluated together in one forward pass.
const TILE_BATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tiling {
    /// 128 px tiles with 16 px overlap.
    Tiled,
    /// One pass over the whole image.
    Whole,
}

/// Raw network outputs on the full image grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOutputs {
    pub residual_real: Raster<f32>,
    pub residual_imag: Raster<f32>,
    pub logits: Raster<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub phase: Raster<f32>,
    pub coherence: Raster<f32>,
}

/// Tile origins and the `[lo, hi)` range each tile owns along one axis.
fn axis_tiles(len: usize) -> Vec<(usize, usize, usize)> {
    if len <= TILE {
        return vec![(0, 0, len)];
    }
    let mut starts = Vec::new();
    let mut s = 0;
    while s + TILE < len {
        starts.push(s);
        s += TILE - OVERLAP;
    }
    starts.push(len - TILE);
    starts.dedup();
    (0..starts.len())
        .map(|i| {
            // Seams sit in the middle of each overlap.
            let lo = if i == 0 {
                0
            } else {
                (starts[i] + starts[i - 1] + TILE) / 2
            };
            let hi = if i + 1 == starts.len() {
                len
            } else {
                (starts[i + 1] + starts[i] + TILE) / 2
            };
            (starts[i], lo, hi)
        })
        .collect()
}

/// Pixel rows (or columns) where two tiles meet.
pub fn seams(len: usize) -> Vec<usize> {
    axis_tiles(len).iter().skip(1).map(|t| t.1).collect()
}

/// Run the network over an observation in infer mode.
pub fn predict_raw<T: Scalar>(
    params: &ModelParams<T>,
    obs: &ObservationStack<T>,
    tiling: Tiling,
) -> Result<RawOutputs> {
    let (w, h) = (obs.width(), obs.height());
    let mut planes = [vec![0.0f32; w * h], vec![0.0f32; w * h], vec![0.0f32; w * h]];
    let tiles: Vec<((usize, usize, usize), (usize, usize, usize))> = match tiling {
        Tiling::Whole => vec![((0, 0, h), (0, 0, w))],
        Tiling::Tiled => {
            let (rows, cols) = (axis_tiles(h), axis_tiles(w));
            rows.iter().flat_map(|r| cols.iter().map(move |c| (*r, *c))).collect()
        }
    };
    let (th, tw) = match tiling {
        Tiling::Whole => (h, w),
        Tiling::Tiled => (h.min(TILE), w.min(TILE)),
    };
    for group in tiles.chunks(TILE_BATCH) {
        let crops = group
            .iter()
            .map(|((r0, _, _), (c0, _, _))| obs.raster().crop(*r0, *c0, tw, th))
            .collect::<Result<Vec<_>>>()?;
        let input = Tensor4::<T>::from_rasters(&crops.iter().collect::<Vec<_>>())?;
        let (out, _) = forward(params, &input, Mode::Infer, ForwardOptions::default())?;
        for (k, ((r0, rlo, rhi), (c0, clo, chi))) in group.iter().enumerate() {
            for (plane, t) in planes.iter_mut().zip([&out.real, &out.imag, &out.coh]) {
                let img = t.image(k);
                for row in *rlo..*rhi {
                    for col in *clo..*chi {
                        plane[row * w + col] = img[(row - r0) * tw + (col - c0)].to_f32().expect("finite output");
                    }
                }
            }
        }
    }
    let [re, im, c] = planes;
    Ok(RawOutputs {
        residual_real: Raster::new(w, h, 1, re)?,
        residual_imag: Raster::new(w, h, 1, im)?,
        logits: Raster::new(w, h, 1, c)?,
    })
}

/// Combine raw outputs with the noisy interferogram phase. The noisy
/// phasor is formed in `f64` so that a zero residual reproduces the input
/// phase bit for bit.
pub fn compose(noisy_phase: &Raster<f32>, raw: &RawOutputs) -> Result<Prediction> {
    noisy_phase.ensure_same_shape(&raw.residual_real)?;
    let phase = Raster::new(
        noisy_phase.width(),
        noisy_phase.height(),
        1,
        noisy_phase
            .data()
            .iter()
            .zip(raw.residual_real.data())
            .zip(raw.residual_imag.data())
            .map(|((y, rr), ri)| {
                let y = f64::from(*y);
                angle_narrow(y.cos() - f64::from(*rr), y.sin() - f64::from(*ri))
            })
            .collect(),
    )?;
    let coherence = raw.logits.map(|c| sigmoid(f64::from(c)) as f32);
    Ok(Prediction { phase, coherence })
}

/// Filter an interferogram given the two SLC amplitudes.
pub fn infer_interferogram<T: Scalar>(
    params: &ModelParams<T>,
    ifg: &Interferogram<f32>,
    a1: &Raster<f32>,
    a2: &Raster<f32>,
    tiling: Tiling,
) -> Result<(Prediction, RawOutputs)> {
    let obs = observe(ifg, a1, a2)?;
    let obs = ObservationStack::from_raster(obs.raster().cast::<T>())?;
    let raw = predict_raw(params, &obs, tiling)?;
    Ok((compose(ifg.phase(), &raw)?, raw))
}

/// Filtered phase and coherence for a co-registered SLC pair.
pub fn infer<T: Scalar>(params: &ModelParams<T>, s1: &SlcImage<f32>, s2: &SlcImage<f32>) -> Result<Prediction> {
    if s1.amplitude().shape() != s2.amplitude().shape() {
        return Err(Error::mismatch(s1.amplitude().shape(), s2.amplitude().shape()));
    }
    let ifg = form_interferogram(s1, s2)?;
    Ok(infer_interferogram(params, &ifg, s1.amplitude(), s2.amplitude(), Tiling::Tiled)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiles_cover_each_axis_once() {
        for len in [1, 64, 128, 129, 200, 240, 241, 256, 1000] {
            let t = axis_tiles(len);
            assert_eq!(t[0].1, 0);
            assert_eq!(t.last().unwrap().2, len);
            for pair in t.windows(2) {
                assert_eq!(pair[0].2, pair[1].1);
            }
            for (s, lo, hi) in &t {
                assert!(lo < hi && *s <= *lo && *hi <= s + TILE.min(len));
            }
        }
        assert_eq!(axis_tiles(240), vec![(0, 0, 120), (112, 120, 240)]);
        // Regular interior seams drop exactly MARGIN pixels on each side.
        let t = axis_tiles(400);
        assert_eq!(t[1], (112, 112 + MARGIN, 224 + MARGIN));
        assert_eq!(seams(100), Vec::<usize>::new());
    }
}
