//! Residual phase loss plus sigmoid cross-entropy coherence loss.

use super::model::Outputs;
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Training targets for a batch: the noise residual `y - x` of the unit
/// phasors and the reference coherence `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTarget<T> {
    pub residual_real: Tensor4<T>,
    pub residual_imag: Tensor4<T>,
    pub coherence: Tensor4<T>,
}

impl<T: Scalar> TrainTarget<T> {
    pub fn new(residual_real: Tensor4<T>, residual_imag: Tensor4<T>, coherence: Tensor4<T>) -> Result<Self> {
        residual_real.same_dims(&residual_imag)?;
        residual_real.same_dims(&coherence)?;
        if residual_real.channels != 1 {
            return Err(Error::InvalidArgument("targets must have one channel".into()));
        }
        if let Some(z) = coherence.data.iter().find(|z| !(**z >= T::zero() && **z <= T::one())) {
            return Err(Error::OutOfDomain {
                what: "target coherence",
                value: z.f64(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self {
            residual_real,
            residual_imag,
            coherence,
        })
    }

    /// Single-sample target: `y` is the phasor of the noisy interferogram
    /// phase, `x` that of the true phase.
    pub fn from_phases(noisy_phase: &Raster<T>, truth_phase: &Raster<T>, truth_coherence: &Raster<T>) -> Result<Self> {
        noisy_phase.ensure_same_shape(truth_phase)?;
        noisy_phase.ensure_same_shape(truth_coherence)?;
        noisy_phase.ensure_channels(1)?;
        let re = noisy_phase.zip_map(truth_phase, |y, x| y.cos() - x.cos())?;
        let im = noisy_phase.zip_map(truth_phase, |y, x| y.sin() - x.sin())?;
        Self::new(
            Tensor4::from_rasters(&[&re])?,
            Tensor4::from_rasters(&[&im])?,
            Tensor4::from_rasters(&[truth_coherence])?,
        )
    }

    /// Concatenate single- or multi-sample targets along the batch axis.
    pub fn stack(targets: &[TrainTarget<T>]) -> Result<Self> {
        let first = targets.first().ok_or(Error::EmptyInput("target batch"))?;
        let cat = |f: fn(&TrainTarget<T>) -> &Tensor4<T>| -> Result<Tensor4<T>> {
            let mut data = Vec::new();
            let mut batch = 0;
            for t in targets {
                let x = f(t);
                if (x.height, x.width) != (f(first).height, f(first).width) {
                    return Err(Error::mismatch(
                        format!("{}x{}", f(first).width, f(first).height),
                        format!("{}x{}", x.width, x.height),
                    ));
                }
                batch += x.batch;
                data.extend_from_slice(&x.data);
            }
            Tensor4::new(batch, f(first).height, f(first).width, 1, data)
        };
        Self::new(
            cat(|t| &t.residual_real)?,
            cat(|t| &t.residual_imag)?,
            cat(|t| &t.coherence)?,
        )
    }
}

/// Loss value and its two components (phase = real + imag terms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub phase: f64,
    pub coherence: f64,
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `1/2 mean((r - t_r)^2) + 1/2 mean((i - t_i)^2) +
/// mean(z softplus(-c) + (1 - z) softplus(c))` and its gradient with
/// respect to each output.
pub fn loss_and_grad<T: Scalar>(out: &Outputs<T>, target: &TrainTarget<T>) -> Result<(LossParts, Outputs<T>)> {
    out.real.same_dims(&target.residual_real)?;
    out.imag.same_dims(&target.residual_imag)?;
    out.coh.same_dims(&target.coherence)?;
    let n = out.real.data.len() as f64;
    let mut grad = out.zeros_like();

    let sq = |pred: &Tensor4<T>, t: &Tensor4<T>, g: &mut Tensor4<T>| {
        let mut acc = 0.0;
        for ((p, t), g) in pred.data.iter().zip(&t.data).zip(&mut g.data) {
            let d = p.f64() - t.f64();
            acc += d * d;
            *g = T::of(d / n);
        }
        0.5 * acc / n
    };
    let phase =
        sq(&out.real, &target.residual_real, &mut grad.real) + sq(&out.imag, &target.residual_imag, &mut grad.imag);

    let mut coh = 0.0;
    for ((c, z), g) in out.coh.data.iter().zip(&target.coherence.data).zip(&mut grad.coh.data) {
        let (c, z) = (c.f64(), z.f64());
        coh += z * softplus(-c) + (1.0 - z) * softplus(c);
        *g = T::of((sigmoid(c) - z) / n);
    }
    let coherence = coh / n;
    Ok((
        LossParts {
            total: phase + coherence,
            phase,
            coherence,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn filled(v: f64) -> Tensor4<f64> {
        Tensor4::new(2, 3, 3, 1, vec![v; 18]).unwrap()
    }

    fn outputs(r: f64, i: f64, c: f64) -> Outputs<f64> {
        Outputs {
            real: filled(r),
            imag: filled(i),
            coh: filled(c),
        }
    }

    #[test]
    fn worked_values() {
        let t = TrainTarget::new(filled(0.3), filled(-0.2), filled(0.5)).unwrap();
        let (l, _) = loss_and_grad(&outputs(0.3, -0.2, 0.0), &t).unwrap();
        assert!((l.total - LN_2).abs() < 1e-15);
        let delta = 0.25;
        let (l, g) = loss_and_grad(&outputs(0.3 + delta, -0.2, 0.0), &t).unwrap();
        assert!((l.total - (delta * delta / 2.0 + LN_2)).abs() < 1e-15);
        assert!((g.real.data[0] - delta / 18.0).abs() < 1e-15);
        assert!(g.coh.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn saturated_logits_drive_loss_to_zero() {
        let z: Vec<f64> = (0..18).map(|i| (i % 2) as f64).collect();
        let c: Vec<f64> = z.iter().map(|z| if *z > 0.5 { 60.0 } else { -60.0 }).collect();
        let t = TrainTarget::new(filled(0.1), filled(0.1), Tensor4::new(2, 3, 3, 1, z).unwrap()).unwrap();
        let mut out = outputs(0.1, 0.1, 0.0);
        out.coh.data = c;
        let (l, _) = loss_and_grad(&out, &t).unwrap();
        assert!(l.total >= 0.0 && l.total < 1e-25);
    }

    #[test]
    fn coherence_term_is_stable_and_nonnegative() {
        for c in [-800.0, -30.0, -1.0, 0.0, 2.0, 700.0] {
            for z in [0.0, 0.3, 1.0] {
                let v = z * softplus(-c) + (1.0 - z) * softplus(c);
                assert!(v.is_finite() && v >= 0.0);
            }
        }
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - LN_2).abs() < 1e-16);
    }

    #[test]
    fn rejects_soft_labels_outside_unit_interval() {
        assert!(TrainTarget::new(filled(0.0), filled(0.0), filled(1.5)).is_err());
    }

    #[test]
    fn residual_targets_from_phases() {
        let y = Raster::new(1, 1, 1, vec![0.5f64]).unwrap();
        let x = Raster::new(1, 1, 1, vec![-1.0f64]).unwrap();
        let z = Raster::new(1, 1, 1, vec![0.7f64]).unwrap();
        let t = TrainTarget::from_phases(&y, &x, &z).unwrap();
        assert_eq!(t.residual_real.data[0], 0.5f64.cos() - (-1.0f64).cos());
        assert_eq!(t.residual_imag.data[0], 0.5f64.sin() - (-1.0f64).sin());
        let both = TrainTarget::stack(&[t.clone(), t]).unwrap();
        assert_eq!(both.coherence.batch, 2);
    }
}
