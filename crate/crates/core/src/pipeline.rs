//! Dataset-level prediction: run a filter over every manifest sample and
//! store its output in the layout `metrics::evaluate_dataset` reads.

use std::path::Path;

use crate::baselines::boxcar_filter;
use crate::container::read_raster;
use crate::error::Result;
use crate::metrics::write_prediction;
use crate::network::infer::{infer_interferogram, Tiling};
use crate::network::ModelParams;
use crate::raster::{Interferogram, Raster};
use crate::simulator::{Manifest, ManifestEntry};

/// Noisy inputs of one stored sample.
#[derive(Debug, Clone)]
pub struct SampleInput {
    pub ifg: Interferogram<f32>,
    pub a1: Raster<f32>,
    pub a2: Raster<f32>,
}

pub fn load_sample_input(manifest: &Manifest, entry: &ManifestEntry) -> Result<SampleInput> {
    let a1 = read_raster(manifest.resolve(&entry.paths.noisy_a1))?;
    let a2 = read_raster(manifest.resolve(&entry.paths.noisy_a2))?;
    let phase = read_raster(manifest.resolve(&entry.paths.noisy_phase))?;
    let ifg = Interferogram::new(a1.zip_map(&a2, |a, b| a * b)?, phase)?;
    Ok(SampleInput { ifg, a1, a2 })
}

/// Apply `filter` to every sample and write `(phase, coherence)` under
/// `<pred_dir>/<method>/`.
pub fn predict_dataset(
    manifest: &Manifest,
    pred_dir: impl AsRef<Path>,
    method: &str,
    filter: impl Fn(&SampleInput) -> Result<(Raster<f32>, Raster<f32>)>,
) -> Result<()> {
    for entry in &manifest.entries {
        let input = load_sample_input(manifest, entry)?;
        let (phase, coh) = filter(&input)?;
        write_prediction(pred_dir.as_ref(), method, &entry.label, entry.index, &phase, &coh)?;
    }
    Ok(())
}

pub fn predict_boxcar(manifest: &Manifest, pred_dir: impl AsRef<Path>, method: &str, window: usize) -> Result<()> {
    predict_dataset(manifest, pred_dir, method, |s| {
        let out = boxcar_filter(&s.ifg, &s.a1, &s.a2, window)?;
        Ok((out.phase, out.coherence))
    })
}

pub fn predict_model(
    params: &ModelParams<f32>,
    manifest: &Manifest,
    pred_dir: impl AsRef<Path>,
    method: &str,
) -> Result<()> {
    predict_dataset(manifest, pred_dir, method, |s| {
        let (p, _) = infer_interferogram(params, &s.ifg, &s.a1, &s.a2, Tiling::Tiled)?;
        Ok((p.phase, p.coherence))
    })
}
