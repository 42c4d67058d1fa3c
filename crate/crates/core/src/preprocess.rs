//! Robust amplitude normalization and the 4-channel network observation.
//!
//! Amplitudes go through a median/MAD modified z-score and a `tanh` squash,
//! so heavy right tails saturate towards 1 instead of being cut off.

use crate::error::{Error, Result};
use crate::phase::phase_to_complex;
use crate::raster::{Interferogram, Raster, SlcImage};
use crate::scalar::Scalar;

/// Modified z-score scale constant.
pub const MZ_SCALE: f64 = 0.6745;
/// Mean-absolute-deviation consistency factor used when MAD vanishes.
pub const MEAN_AD_SCALE: f64 = 1.2533;
/// Divisor applied to the modified z-score before `tanh`.
pub const TANH_DIVISOR: f64 = 7.0;

fn lower_median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

/// Lower median and median absolute deviation of every value in `values`.
pub fn mad<T: Scalar>(values: &Raster<T>) -> Result<(f64, f64)> {
    let mut v: Vec<f64> = values.data().iter().map(|x| x.f64()).collect();
    if v.is_empty() {
        return Err(Error::EmptyInput("median of no values"));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {bad} in MAD input")));
    }
    v.sort_by(f64::total_cmp);
    let median = lower_median(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - median).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Ok((median, lower_median(&dev)))
}

/// `0.6745 (A - median) / MAD`, falling back to `1.2533 * mean|A - median|`
/// as the denominator when MAD is zero, and to all zeros when both vanish.
pub fn modified_zscore<T: Scalar>(values: &Raster<T>) -> Result<Raster<T>> {
    let (median, mad) = mad(values)?;
    let denom = if mad > 0.0 {
        mad
    } else {
        let mean_ad = values.data().iter().map(|x| (x.f64() - median).abs()).sum::<f64>() / values.data().len() as f64;
        MEAN_AD_SCALE * mean_ad
    };
    if denom == 0.0 {
        return Ok(values.map(|_| T::zero()));
    }
    Ok(values.map(|x| T::of(MZ_SCALE * (x.f64() - median) / denom)))
}

/// `(tanh(z / 7) + 1) / 2` for a modified z-score `z`, kept strictly
/// inside `(0, 1)` at the storage precision.
pub fn squash<T: Scalar>(z: f64) -> T {
    let v = T::of(0.5 * ((z / TANH_DIVISOR).tanh() + 1.0));
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() / (T::one() + T::one());
    v.max(lo).min(hi)
}

/// Normalize an amplitude image into `(0, 1)`; the median maps to 0.5.
pub fn normalize_amplitude<T: Scalar>(values: &Raster<T>) -> Result<Raster<T>> {
    let mz = modified_zscore(values)?;
    Ok(mz.map(|z| squash(z.f64())))
}

/// Network input `[y_real, y_imag, A1_hat, A2_hat]`, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStack<T = f32> {
    raster: Raster<T>,
}

pub const OBS_CHANNELS: usize = 4;

impl<T: Scalar> ObservationStack<T> {
    pub fn raster(&self) -> &Raster<T> {
        &self.raster
    }

    pub fn into_raster(self) -> Raster<T> {
        self.raster
    }

    pub fn width(&self) -> usize {
        self.raster.width()
    }

    pub fn height(&self) -> usize {
        self.raster.height()
    }

    /// Wrap an existing 4-channel raster, checking the channel invariants.
    pub fn from_raster(raster: Raster<T>) -> Result<Self> {
        raster.ensure_channels(OBS_CHANNELS)?;
        for px in raster.data().chunks_exact(OBS_CHANNELS) {
            let norm = px[0].f64().powi(2) + px[1].f64().powi(2);
            if (norm - 1.0).abs() > 1e-5 {
                return Err(Error::InvalidArgument(format!("phasor norm {norm} is not 1")));
            }
            for a in &px[2..] {
                if !(*a >= T::zero() && *a <= T::one()) {
                    return Err(Error::OutOfDomain {
                        what: "normalized amplitude",
                        value: a.f64(),
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
            }
        }
        Ok(Self { raster })
    }
}

/// Stack `[cos dphi, sin dphi, A1_hat, A2_hat]` in that order.
pub fn assemble_observation<T: Scalar>(
    ifg: &Interferogram<T>,
    norm_a1: &Raster<T>,
    norm_a2: &Raster<T>,
) -> Result<ObservationStack<T>> {
    ifg.phase().ensure_same_shape(norm_a1)?;
    ifg.phase().ensure_same_shape(norm_a2)?;
    let (re, im) = phase_to_complex(ifg.phase());
    let raster = Raster::stack(&[&re, &im, norm_a1, norm_a2])?;
    Ok(ObservationStack { raster })
}

/// Observation from raw noisy amplitudes and the interferogram they form.
pub fn observe<T: Scalar>(ifg: &Interferogram<T>, a1: &Raster<T>, a2: &Raster<T>) -> Result<ObservationStack<T>> {
    assemble_observation(ifg, &normalize_amplitude(a1)?, &normalize_amplitude(a2)?)
}

/// Observation for a co-registered SLC pair.
pub fn observe_pair<T: Scalar>(s1: &SlcImage<T>, s2: &SlcImage<T>) -> Result<(Interferogram<T>, ObservationStack<T>)> {
    let ifg = crate::raster::form_interferogram(s1, s2)?;
    let obs = observe(&ifg, s1.amplitude(), s2.amplitude())?;
    Ok((ifg, obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn row(values: &[f64]) -> Raster<f64> {
        Raster::new(values.len(), 1, 1, values.to_vec()).unwrap()
    }

    /// Brute force: sort and pick the lower middle element.
    fn oracle_lower_median(values: &[f64]) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[(v.len() - 1) / 2]
    }

    #[test]
    fn mad_examples() {
        assert_eq!(mad(&row(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap(), (3.0, 1.0));
        assert_eq!(mad(&row(&[2.5; 7])).unwrap(), (2.5, 0.0));
        assert_eq!(mad(&row(&[1.0, 1.0, 1.0, 100.0])).unwrap(), (1.0, 0.0));
        assert_eq!(oracle_lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(mad(&row(&[4.0, 1.0, 3.0, 2.0])).unwrap().0, 2.0);
        assert!(mad(&row(&[1.0, f64::NAN])).is_err());
    }

    #[test]
    fn zscore_examples() {
        let z = modified_zscore(&row(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        assert_eq!(z.at(0, 2), 0.0);
        assert!((z.at(0, 4) - 1.349).abs() < 1e-12);
        let z = modified_zscore(&row(&[3.0; 5])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        // MAD = 0 falls back to the mean absolute deviation.
        let z = modified_zscore(&row(&[1.0, 1.0, 1.0, 100.0])).unwrap();
        let expected = 0.6745 * 99.0 / (1.2533 * 99.0 / 4.0);
        assert!((z.at(0, 3) - expected).abs() < 1e-12);
        assert_eq!(z.at(0, 0), 0.0);
    }

    #[test]
    fn squash_examples() {
        assert_eq!(squash::<f64>(0.0), 0.5);
        assert!((squash::<f64>(7.0) - 0.880797).abs() < 1e-6);
        assert!((squash::<f64>(-7.0) - 0.119203).abs() < 1e-6);
        let hi: f32 = squash(1e9);
        let lo: f32 = squash(-1e9);
        assert!(hi < 1.0 && lo > 0.0);
    }

    #[test]
    fn observation_channels() {
        let phase = Raster::new(2, 1, 1, vec![0.0f64, PI / 2.0]).unwrap();
        let amp = Raster::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        let ifg = Interferogram::new(amp, phase).unwrap();
        let a1 = row(&[0.25, 0.75]);
        let a2 = row(&[0.5, 0.5]);
        let obs = assemble_observation(&ifg, &a1, &a2).unwrap();
        assert_eq!(&obs.raster().data()[..4], &[1.0, 0.0, 0.25, 0.5]);
        let px = &obs.raster().data()[4..];
        assert!(px[0].abs() < 1e-15 && px[1] == 1.0);
        assert!(assemble_observation(&ifg, &row(&[0.1]), &a2).is_err());
        assert!(ObservationStack::from_raster(obs.into_raster()).is_ok());
    }

    #[test]
    fn observation_round_trips_phase() {
        let c = crate::simulator::SimConfig::grid(64, 3)[8];
        let s = crate::simulator::simulate_sample(&c, 0).unwrap();
        let (ifg, obs) = observe_pair(&s.noisy_s1, &s.noisy_s2).unwrap();
        let r = obs.raster();
        let back = crate::phase::reconstruct_phase(&r.channel(0).unwrap(), &r.channel(1).unwrap()).unwrap();
        for (a, b) in back.data().iter().zip(ifg.phase().data()) {
            assert!(crate::phase::wrap_phase(a - b).abs() < 1e-6);
        }
        ObservationStack::from_raster(r.clone()).unwrap();
    }

    proptest! {
        #[test]
        fn normalize_is_monotone_and_bounded(values in prop::collection::vec(0.0f64..1e3, 1..200)) {
            let r = row(&values);
            let n = normalize_amplitude(&r).unwrap();
            let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(n.data().iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
            prop_assert!(n.data().iter().all(|&v| v > 0.0 && v < 1.0));
        }

        #[test]
        fn median_maps_to_half_under_affine_maps(
            values in prop::collection::vec(0.0f64..10.0, 1..100),
            scale in 0.01f64..100.0,
            offset in -50.0f64..50.0,
        ) {
            let r = row(&values).map(|v| scale * v + offset);
            let (median, _) = mad(&r).unwrap();
            let n = normalize_amplitude(&r).unwrap();
            for (x, y) in r.data().iter().zip(n.data()) {
                if *x == median {
                    prop_assert_eq!(*y, 0.5);
                } else if *x < median {
                    prop_assert!(*y <= 0.5);
                } else {
                    prop_assert!(*y >= 0.5);
                }
            }
        }
    }
}
