//! Synthetic interferometric SLC pairs with ground-truth phase and coherence.
//!
//! Generation follows a fixed recipe: a zero-phase first acquisition whose
//! Rayleigh amplitude ramps from 0.1 to 1 across the columns, a second
//! acquisition carrying random Gaussian phase bubbles, optional low-amplitude
//! bands, then independent complex Gaussian noise on both acquisitions.

mod config;
mod dataset;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use config::{
    parse_config_list, ConfigLabel, FringeLevel, FringeParams, NoiseLevel, SimConfig, Step, Strips, MIN_SIZE,
    REFERENCE_SIDE,
};
pub use dataset::{generate_dataset, Manifest, ManifestEntry, SamplePaths, SAMPLE_FILES};

use crate::error::Result;
use crate::phase::wrap_phase;
use crate::raster::{form_interferogram, Interferogram, Raster, SlcImage};

/// Column-mean clean amplitude at the left and right image edges.
pub const AMPLITUDE_RAMP: (f64, f64) = (0.1, 1.0);
/// Clean amplitudes are clamped into this range after the Rayleigh draw.
pub const AMPLITUDE_CLAMP: (f64, f64) = (0.02, 2.0);

/// Isotropic Gaussian phase bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBubble {
    /// `(row, col)` in pixels.
    pub center: (f64, f64),
    pub sigma: f64,
    /// Peak phase in radians; may exceed `2 pi`.
    pub amplitude: f64,
}

impl GaussianBubble {
    #[inline]
    pub fn phase_at(&self, row: f64, col: f64) -> f64 {
        let dr = row - self.center.0;
        let dc = col - self.center.1;
        self.amplitude * (-(dr * dr + dc * dc) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Full-height band spanning a range of columns.
    Vertical,
    /// Full-width band spanning a range of rows.
    Horizontal,
}

/// Axis-aligned low-amplitude band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub orientation: Orientation,
    pub start: usize,
    pub width: usize,
    /// Multiplier applied to the clean amplitude, below 0.3.
    pub factor: f64,
}

impl Strip {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let p = match self.orientation {
            Orientation::Vertical => col,
            Orientation::Horizontal => row,
        };
        p >= self.start && p < self.start + self.width
    }
}

/// One fully simulated sample.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub clean_s1: SlcImage,
    pub clean_s2: SlcImage,
    pub noisy_s1: SlcImage,
    pub noisy_s2: SlcImage,
    pub truth_phase: Raster,
    pub truth_coherence: Raster,
}

impl SimSample {
    pub fn noisy_interferogram(&self) -> Interferogram {
        form_interferogram(&self.noisy_s1, &self.noisy_s2).expect("pair shares a grid")
    }
}

/// Draw the bubble set for `cfg`. Bubble counts are quoted for a
/// 1000 x 1000 image and scale with image area; sigma and peak phase are
/// kept in pixels and radians so the per-pixel fringe rate is preserved.
pub fn draw_bubbles<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Vec<GaussianBubble> {
    let p = cfg.fringe.params();
    let area = (cfg.size as f64 / REFERENCE_SIDE as f64).powi(2);
    let nominal = rng.random_range(p.count.0..=p.count.1);
    let count = ((nominal as f64 * area).round() as usize).max(1);
    let side = cfg.size as f64;
    (0..count)
        .map(|_| {
            let center = (rng.random_range(0.0..side), rng.random_range(0.0..side));
            let sigma = rng.random_range(p.sigma.0..=p.sigma.1);
            let magnitude = rng.random_range(0.25 * p.max_amplitude..=p.max_amplitude);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            GaussianBubble {
                center,
                sigma,
                amplitude: sign * magnitude,
            }
        })
        .collect()
}

/// Rayleigh amplitude field whose column mean ramps linearly from 0.1 to 1.
pub fn ramp_amplitude<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Raster {
    let (lo, hi) = AMPLITUDE_RAMP;
    let denom = (size.max(2) - 1) as f64;
    let to_scale = (std::f64::consts::PI / 2.0).sqrt();
    Raster::from_fn(size, size, |_, col| {
        let mean = lo + (hi - lo) * col as f64 / denom;
        let scale = mean / to_scale;
        let u: f64 = rng.random();
        let a = scale * (-2.0 * (1.0 - u).ln()).sqrt();
        a.clamp(AMPLITUDE_CLAMP.0, AMPLITUDE_CLAMP.1) as f32
    })
    .expect("size >= 1")
}

/// Wrapped sum of bubbles.
pub fn bubble_phase(size: usize, bubbles: &[GaussianBubble]) -> Raster {
    Raster::from_fn(size, size, |row, col| {
        let total: f64 = bubbles.iter().map(|b| b.phase_at(row as f64, col as f64)).sum();
        wrap_phase(total) as f32
    })
    .expect("size >= 1")
}

/// Clean pair from explicit bubbles: S1 has zero phase, S2 shares its
/// amplitude and carries the bubble phase.
pub fn clean_pair_with_bubbles<R: Rng + ?Sized>(
    size: usize,
    bubbles: &[GaussianBubble],
    rng: &mut R,
) -> (SlcImage, SlcImage) {
    let amplitude = ramp_amplitude(size, rng);
    let zero = Raster::zeros(size, size, 1).expect("size >= 1");
    let s1 = SlcImage::new(amplitude.clone(), zero).expect("valid clean S1");
    let s2 = SlcImage::new(amplitude, bubble_phase(size, bubbles)).expect("valid clean S2");
    (s1, s2)
}

/// Clean pair for `cfg`, drawing amplitudes then bubbles from `rng`.
pub fn simulate_clean_pair<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> (SlcImage, SlcImage) {
    let amplitude = ramp_amplitude(cfg.size, rng);
    let bubbles = draw_bubbles(cfg, rng);
    let zero = Raster::zeros(cfg.size, cfg.size, 1).expect("size >= 1");
    let s1 = SlcImage::new(amplitude.clone(), zero).expect("valid clean S1");
    let s2 = SlcImage::new(amplitude, bubble_phase(cfg.size, &bubbles)).expect("valid clean S2");
    (s1, s2)
}

/// One to four bands, 4-10 % of the side wide, with factors in [0.05, 0.25].
pub fn draw_strips<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<Strip> {
    let count = rng.random_range(1..=4);
    (0..count)
        .map(|_| {
            let orientation = if rng.random_bool(0.5) {
                Orientation::Vertical
            } else {
                Orientation::Horizontal
            };
            let lo = ((0.04 * size as f64).round() as usize).max(1);
            let hi = ((0.10 * size as f64).round() as usize).max(lo);
            let width = rng.random_range(lo..=hi);
            let start = rng.random_range(0..=size - width);
            let factor = rng.random_range(0.05..=0.25);
            Strip {
                orientation,
                start,
                width,
                factor,
            }
        })
        .collect()
}

/// Scale both amplitudes inside every band; phases are left untouched.
pub fn apply_strips(pair: (SlcImage, SlcImage), strips: &[Strip]) -> (SlcImage, SlcImage) {
    let scale = |slc: SlcImage| {
        let (amplitude, phase) = slc.into_parts();
        let w = amplitude.width();
        let mut data = amplitude.into_data();
        for (i, a) in data.iter_mut().enumerate() {
            let (row, col) = (i / w, i % w);
            for s in strips.iter().filter(|s| s.contains(row, col)) {
                *a = (*a as f64 * s.factor) as f32;
            }
        }
        let amplitude = Raster::new(w, phase.height(), 1, data).expect("same shape");
        SlcImage::new(amplitude, phase).expect("scaled amplitude stays valid")
    };
    (scale(pair.0), scale(pair.1))
}

/// Random bands when `cfg.strips` is `S`; identity for `NS`.
pub fn apply_amplitude_strips<R: Rng + ?Sized>(
    pair: (SlcImage, SlcImage),
    cfg: &SimConfig,
    rng: &mut R,
) -> (SlcImage, SlcImage) {
    match cfg.strips {
        Strips::NS => pair,
        Strips::S => {
            let strips = draw_strips(cfg.size, rng);
            apply_strips(pair, &strips)
        }
    }
}

/// Add `N(0, sigma_v^2)` independently to the real and imaginary parts of
/// both acquisitions (S1 first, real before imaginary per pixel).
pub fn add_speckle_noise<R: Rng + ?Sized>(
    pair: &(SlcImage, SlcImage),
    sigma_v: f64,
    rng: &mut R,
) -> (SlcImage, SlcImage) {
    let mut noisy = |slc: &SlcImage| {
        let w = slc.width();
        let h = slc.height();
        let mut re = Vec::with_capacity(w * h);
        let mut im = Vec::with_capacity(w * h);
        for (&a, &p) in slc.amplitude().data().iter().zip(slc.phase().data()) {
            let (a, p) = (a as f64, p as f64);
            let nr: f64 = StandardNormal.sample(rng);
            let ni: f64 = StandardNormal.sample(rng);
            re.push(a * p.cos() + sigma_v * nr);
            im.push(a * p.sin() + sigma_v * ni);
        }
        let amplitude = re.iter().zip(&im).map(|(r, i)| r.hypot(*i) as f32).collect();
        let phase = re
            .iter()
            .zip(&im)
            .map(|(&r, &i)| crate::phase::angle(r, i) as f32)
            .collect();
        SlcImage::new(
            Raster::new(w, h, 1, amplitude).expect("shape"),
            Raster::new(w, h, 1, phase).expect("shape"),
        )
        .expect("valid noisy SLC")
    };
    let s1 = noisy(&pair.0);
    let s2 = noisy(&pair.1);
    (s1, s2)
}

/// Coherence of two circular-Gaussian signal-plus-noise acquisitions:
/// `A1 A2 / sqrt((A1^2 + 2 s^2)(A2^2 + 2 s^2))`.
#[inline]
pub fn coherence_from_amplitudes(a1: f64, a2: f64, sigma_v: f64) -> f64 {
    let n = 2.0 * sigma_v * sigma_v;
    let den = ((a1 * a1 + n) * (a2 * a2 + n)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (a1 * a2 / den).clamp(0.0, 1.0)
    }
}

pub fn ground_truth_coherence(clean_a1: &Raster, clean_a2: &Raster, sigma_v: f64) -> Result<Raster> {
    clean_a1.zip_map(clean_a2, |a1, a2| {
        coherence_from_amplitudes(a1 as f64, a2 as f64, sigma_v) as f32
    })
}

/// Generate sample `index` of `cfg`; a pure function of `(cfg, index)`.
pub fn simulate_sample(cfg: &SimConfig, index: usize) -> Result<SimSample> {
    cfg.validate()?;
    let mut amp_rng = cfg.rng(index, Step::Amplitude);
    let mut bubble_rng = cfg.rng(index, Step::Bubbles);
    let amplitude = ramp_amplitude(cfg.size, &mut amp_rng);
    let bubbles = draw_bubbles(cfg, &mut bubble_rng);
    let zero = Raster::zeros(cfg.size, cfg.size, 1)?;
    let clean = (
        SlcImage::new(amplitude.clone(), zero)?,
        SlcImage::new(amplitude, bubble_phase(cfg.size, &bubbles))?,
    );
    let clean = apply_amplitude_strips(clean, cfg, &mut cfg.rng(index, Step::Strips));
    let noisy = add_speckle_noise(&clean, cfg.sigma_v(), &mut cfg.rng(index, Step::Noise));
    let truth_phase = form_interferogram(&clean.0, &clean.1)?.phase().clone();
    let truth_coherence = ground_truth_coherence(clean.0.amplitude(), clean.1.amplitude(), cfg.sigma_v())?;
    Ok(SimSample {
        clean_s1: clean.0,
        clean_s2: clean.1,
        noisy_s1: noisy.0,
        noisy_s2: noisy.1,
        truth_phase,
        truth_coherence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cfg(noise: NoiseLevel, fringe: FringeLevel, strips: Strips, size: usize) -> SimConfig {
        SimConfig::new(noise, fringe, strips, size, 11).unwrap()
    }

    #[test]
    fn zero_bubbles_give_zero_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s1, s2) = clean_pair_with_bubbles(64, &[], &mut rng);
        assert!(s1.phase().data().iter().all(|&p| p == 0.0));
        assert!(s2.phase().data().iter().all(|&p| p == 0.0));
        assert_eq!(s1.amplitude(), s2.amplitude());
        let ifg = form_interferogram(&s1, &s2).unwrap();
        assert!(ifg.phase().data().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_bubble_has_one_fringe_crossing() {
        let size = 128;
        let b = GaussianBubble {
            center: (64.0, 64.0),
            sigma: 30.0,
            amplitude: 2.0 * PI,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (s1, s2) = clean_pair_with_bubbles(size, &[b], &mut rng);
        let truth = form_interferogram(&s1, &s2).unwrap().phase().clone();
        // Walk the radius along the center row, brute-force counting jumps.
        let jumps = (65..size)
            .filter(|&c| (truth.at(64, c) - truth.at(64, c - 1)).abs() > PI as f32)
            .count();
        assert_eq!(jumps, 1);
    }

    #[test]
    fn amplitude_ramp_column_means() {
        let size = 512;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ramp_amplitude(size, &mut rng);
        let col_mean = |cols: std::ops::Range<usize>| {
            let n = cols.len() * size;
            cols.flat_map(|c| (0..size).map(move |r| (r, c)))
                .map(|(r, c)| a.at(r, c) as f64)
                .sum::<f64>()
                / n as f64
        };
        let left = col_mean(0..2);
        let right = col_mean(size - 2..size);
        assert!((left - 0.1).abs() < 0.01, "left {left}");
        assert!((right - 1.0).abs() < 0.1, "right {right}");
        assert!(a.data().iter().all(|&v| (0.02..=2.0).contains(&v)));
    }

    #[test]
    fn strips_ns_is_identity() {
        let c = cfg(NoiseLevel::S1, FringeLevel::F1, Strips::NS, 64);
        let mut rng = c.rng(0, Step::Amplitude);
        let pair = simulate_clean_pair(&c, &mut rng);
        let out = apply_amplitude_strips(pair.clone(), &c, &mut c.rng(0, Step::Strips));
        assert_eq!(out.0, pair.0);
        assert_eq!(out.1, pair.1);
    }

    #[test]
    fn vertical_strip_scales_exactly_its_columns() {
        let c = cfg(NoiseLevel::S1, FringeLevel::F2, Strips::S, 64);
        let pair = simulate_clean_pair(&c, &mut c.rng(0, Step::Amplitude));
        let strip = Strip {
            orientation: Orientation::Vertical,
            start: 20,
            width: 10,
            factor: 0.2,
        };
        let out = apply_strips(pair.clone(), &[strip]);
        for slc in [(&pair.0, &out.0), (&pair.1, &out.1)] {
            for r in 0..64 {
                for col in 0..64 {
                    let before = slc.0.amplitude().at(r, col);
                    let after = slc.1.amplitude().at(r, col);
                    if (20..30).contains(&col) {
                        assert!(after < 0.3 * before);
                    } else {
                        assert_eq!(after, before);
                    }
                }
            }
            let bits = |s: &SlcImage| s.phase().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(slc.0), bits(slc.1));
        }
    }

    #[test]
    fn random_strips_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let strips = draw_strips(100, &mut rng);
            assert!((1..=4).contains(&strips.len()));
            for s in strips {
                assert!((4..=10).contains(&s.width));
                assert!(s.start + s.width <= 100);
                assert!(s.factor < 0.3 && s.factor > 0.0);
            }
        }
    }

    #[test]
    fn vanishing_noise_keeps_clean_pair() {
        let c = cfg(NoiseLevel::S1, FringeLevel::F1, Strips::NS, 64);
        let pair = simulate_clean_pair(&c, &mut c.rng(0, Step::Amplitude));
        let noisy = add_speckle_noise(&pair, 1e-9, &mut c.rng(0, Step::Noise));
        for (clean, noisy) in [(&pair.0, &noisy.0), (&pair.1, &noisy.1)] {
            for (a, b) in clean.amplitude().data().iter().zip(noisy.amplitude().data()) {
                assert!((a - b).abs() < 1e-6);
            }
            for (a, b) in clean.phase().data().iter().zip(noisy.phase().data()) {
                assert!(wrap_phase(a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn noise_variance_monte_carlo() {
        let sigma = 0.5;
        let size = 320; // > 1e5 pixels
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (s1, s2) = clean_pair_with_bubbles(size, &[], &mut rng);
        let noisy = add_speckle_noise(&(s1.clone(), s2), sigma, &mut rng);
        let (re, _) = noisy.0.to_complex();
        let (clean_re, _) = s1.to_complex();
        let d: Vec<f64> = re
            .data()
            .iter()
            .zip(clean_re.data())
            .map(|(a, b)| (*a - *b) as f64)
            .collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn zero_motion_noisy_phase_is_centered() {
        let c = cfg(NoiseLevel::S2, FringeLevel::F1, Strips::NS, 128);
        let mut rng = c.rng(0, Step::Amplitude);
        let pair = clean_pair_with_bubbles(128, &[], &mut rng);
        let noisy = add_speckle_noise(&pair, 0.5, &mut rng);
        let ifg = form_interferogram(&noisy.0, &noisy.1).unwrap();
        let (s, c): (f64, f64) = ifg
            .phase()
            .data()
            .iter()
            .fold((0.0, 0.0), |(s, c), &p| (s + (p as f64).sin(), c + (p as f64).cos()));
        assert!(s.atan2(c).abs() < 0.05);
    }

    #[test]
    fn coherence_formula_examples() {
        assert_eq!(coherence_from_amplitudes(0.7, 0.7, 0.0), 1.0);
        assert_eq!(coherence_from_amplitudes(0.0, 0.7, 0.3), 0.0);
        let half = coherence_from_amplitudes(1.0, 1.0, 1.0 / 2f64.sqrt());
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coherence_matches_monte_carlo_sample_coherence() {
        let sigma = 1.0 / 2f64.sqrt();
        let size = 256;
        let amp = Raster::filled(size, size, 1, 1.0f32).unwrap();
        let zero = Raster::zeros(size, size, 1).unwrap();
        let pair = (
            SlcImage::new(amp.clone(), zero.clone()).unwrap(),
            SlcImage::new(amp, zero).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noisy = add_speckle_noise(&pair, sigma, &mut rng);
        let (r1, i1) = noisy.0.to_complex();
        let (r2, i2) = noisy.1.to_complex();
        let (mut cr, mut ci, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..size * size {
            let (a, b) = (r1.data()[k] as f64, i1.data()[k] as f64);
            let (c, d) = (r2.data()[k] as f64, i2.data()[k] as f64);
            cr += a * c + b * d;
            ci += b * c - a * d;
            p1 += a * a + b * b;
            p2 += c * c + d * d;
        }
        let sample = cr.hypot(ci) / (p1 * p2).sqrt();
        assert!((sample - 0.5).abs() < 0.02, "sample coherence {sample}");
    }

    #[test]
    fn coherence_decreases_with_noise() {
        let c = cfg(NoiseLevel::S1, FringeLevel::F1, Strips::S, 64);
        let s = simulate_sample(&c, 0).unwrap();
        let a1 = s.clean_s1.amplitude();
        let a2 = s.clean_s2.amplitude();
        let lo = ground_truth_coherence(a1, a2, 0.2).unwrap();
        let hi = ground_truth_coherence(a1, a2, 0.5).unwrap();
        assert!(lo.data().iter().zip(hi.data()).all(|(l, h)| h < l));
    }

    #[test]
    fn strips_lower_coherence() {
        let c = cfg(NoiseLevel::S2, FringeLevel::F1, Strips::NS, 128);
        let pair = simulate_clean_pair(&c, &mut c.rng(0, Step::Amplitude));
        let strip = Strip {
            orientation: Orientation::Horizontal,
            start: 40,
            width: 10,
            factor: 0.2,
        };
        let out = apply_strips(pair, &[strip]);
        let coh = ground_truth_coherence(out.0.amplitude(), out.1.amplitude(), 0.5).unwrap();
        for col in 0..128 {
            let mean = |rows: std::ops::Range<usize>| {
                let n = rows.len() as f64;
                rows.map(|r| coh.at(r, col) as f64).sum::<f64>() / n
            };
            assert!(mean(40..50) < mean(20..40), "column {col}");
        }
    }

    #[test]
    fn sample_invariants_and_determinism() {
        for strips in [Strips::S, Strips::NS] {
            let c = cfg(NoiseLevel::S3, FringeLevel::F3, strips, 96);
            let a = simulate_sample(&c, 4).unwrap();
            let b = simulate_sample(&c, 4).unwrap();
            assert_eq!(a.noisy_s1, b.noisy_s1);
            assert_eq!(a.truth_phase, b.truth_phase);
            let expect = form_interferogram(&a.clean_s1, &a.clean_s2).unwrap();
            assert_eq!(&a.truth_phase, expect.phase());
            assert!(a.truth_coherence.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(a.clean_s1.phase().data().iter().all(|&p| p == 0.0));
            assert_ne!(simulate_sample(&c, 5).unwrap().noisy_s1, a.noisy_s1);
        }
    }
}
