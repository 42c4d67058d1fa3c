//! Classical reference estimators: the boxcar phase filter, the windowed
//! amplitude coherence estimator, and the coherence to phase-spread curve.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::phase::angle_narrow;
use crate::raster::{Interferogram, Raster};
use crate::scalar::Scalar;

fn check_window(window: usize, width: usize, height: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::EvenWindow(window));
    }
    if window > width.min(height) {
        return Err(Error::InvalidArgument(format!(
            "window {window} larger than image {width}x{height}"
        )));
    }
    Ok(())
}

/// Summed-area table over a single-channel plane, `f64` accumulation.
struct Integral {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0; stride * (height + 1)];
        for r in 0..height {
            let mut row = 0.0;
            for c in 0..width {
                row += value(r * width + c);
                sums[(r + 1) * stride + c + 1] = sums[r * stride + c + 1] + row;
            }
        }
        Self { width, height, sums }
    }

    /// Sum over the `window x window` box centered at `(r, c)`, clipped.
    fn boxed(&self, r: usize, c: usize, half: usize) -> f64 {
        let r0 = r.saturating_sub(half);
        let c0 = c.saturating_sub(half);
        let r1 = (r + half + 1).min(self.height);
        let c1 = (c + half + 1).min(self.width);
        let s = self.width + 1;
        self.sums[r1 * s + c1] - self.sums[r0 * s + c1] - self.sums[r1 * s + c0] + self.sums[r0 * s + c0]
    }
}

/// Amplitude-only coherence over one window of paired samples.
pub fn window_coherence(a1: &[f64], a2: &[f64]) -> f64 {
    let cross: f64 = a1.iter().zip(a2).map(|(x, y)| x * y).sum();
    let p1: f64 = a1.iter().map(|x| x * x).sum();
    let p2: f64 = a2.iter().map(|x| x * x).sum();
    ratio(cross, p1, p2)
}

#[inline]
fn ratio(cross: f64, p1: f64, p2: f64) -> f64 {
    let den = (p1 * p2).sqrt();
    if den > 0.0 {
        (cross.abs() / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// `|sum A1 A2| / sqrt(sum A1^2 sum A2^2)` over a centered, edge-clipped
/// `window x window` box at every pixel.
pub fn ml_coherence<T: Scalar>(a1: &Raster<T>, a2: &Raster<T>, window: usize) -> Result<Raster<T>> {
    a1.ensure_same_shape(a2)?;
    a1.ensure_channels(1)?;
    let (w, h) = (a1.width(), a1.height());
    check_window(window, w, h)?;
    let (d1, d2) = (a1.data(), a2.data());
    let cross = Integral::new(w, h, |i| d1[i].f64() * d2[i].f64());
    let p1 = Integral::new(w, h, |i| d1[i].f64().powi(2));
    let p2 = Integral::new(w, h, |i| d2[i].f64().powi(2));
    let half = window / 2;
    Raster::from_fn(w, h, |r, c| {
        T::of(ratio(
            cross.boxed(r, c, half),
            p1.boxed(r, c, half),
            p2.boxed(r, c, half),
        ))
    })
}

/// Boxcar filter output.
#[derive(Debug, Clone)]
pub struct BoxcarOutput<T = f32> {
    pub phase: Raster<T>,
    pub coherence: Raster<T>,
}

/// Phase of the windowed mean of amplitude-weighted phasors `A e^{i dphi}`.
pub fn boxcar_phase<T: Scalar>(ifg: &Interferogram<T>, window: usize) -> Result<Raster<T>> {
    let (w, h) = (ifg.width(), ifg.height());
    check_window(window, w, h)?;
    let amp = ifg.amplitude().data();
    let ph = ifg.phase().data();
    let re = Integral::new(w, h, |i| amp[i].f64() * ph[i].f64().cos());
    let im = Integral::new(w, h, |i| amp[i].f64() * ph[i].f64().sin());
    let half = window / 2;
    Raster::from_fn(w, h, |r, c| {
        if window == 1 {
            // A single-pixel window returns the input phase unchanged.
            ph[r * w + c]
        } else {
            angle_narrow(re.boxed(r, c, half), im.boxed(r, c, half))
        }
    })
}

/// Boxcar phase plus amplitude coherence over the same window.
pub fn boxcar_filter<T: Scalar>(
    ifg: &Interferogram<T>,
    a1: &Raster<T>,
    a2: &Raster<T>,
    window: usize,
) -> Result<BoxcarOutput<T>> {
    ifg.amplitude().ensure_same_shape(a1)?;
    Ok(BoxcarOutput {
        phase: boxcar_phase(ifg, window)?,
        coherence: ml_coherence(a1, a2, window)?,
    })
}

fn dilog_series(x: f64) -> f64 {
    // 0 <= x <= 0.5: terms shrink at least geometrically by 2.
    let mut sum = 0.0;
    let mut pow = x;
    let mut k = 1.0f64;
    while pow > 1e-18 * k * k {
        sum += pow / (k * k);
        pow *= x;
        k += 1.0;
    }
    sum
}

/// Euler dilogarithm `Li2(x) = sum_k x^k / k^2` on `[0, 1]`.
pub fn dilogarithm(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain {
            what: "dilogarithm argument",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(if x <= 0.5 {
        dilog_series(x)
    } else if x == 1.0 {
        PI * PI / 6.0
    } else {
        PI * PI / 6.0 - x.ln() * (1.0 - x).ln() - dilog_series(1.0 - x)
    })
}

/// Single-look phase standard deviation implied by coherence magnitude:
/// the square root of `pi^2/3 - pi asin(g) + asin(g)^2 - Li2(g^2)/2`.
pub fn phase_std_from_coherence(coherence: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&coherence) {
        return Err(Error::OutOfDomain {
            what: "coherence",
            value: coherence,
            lo: 0.0,
            hi: 1.0,
        });
    }
    // Rewritten as acos(g)^2 + (pi^2/6 - Li2(g^2))/2 so every term vanishes
    // smoothly at g = 1; the reflected form is used for g^2 > 1/2.
    let x = coherence * coherence;
    let tail = if x <= 0.5 {
        PI * PI / 12.0 - dilog_series(x) / 2.0
    } else if x == 1.0 {
        0.0
    } else {
        0.5 * (x.ln() * (1.0 - x).ln() + dilog_series(1.0 - x))
    };
    let variance = coherence.acos().powi(2) + tail;
    Ok(variance.max(0.0).sqrt())
}
