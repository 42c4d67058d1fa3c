//! Wrapped phase arithmetic on the half-open interval `[-pi, pi)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Narrow an `f64` angle already in `[-pi, pi]` into `T`, mapping anything
/// that rounds onto `+pi` to `-pi`.
#[inline]
fn canonical<T: Scalar>(angle: f64) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut r = T::of(angle);
    if r >= pi {
        r -= two_pi;
    }
    if r < -pi {
        r += two_pi;
    }
    r
}

/// Reduce `x` modulo `2 pi` into `[-pi, pi)`; `pi` itself maps to `-pi`.
#[inline]
pub fn wrap_phase<T: Scalar>(x: T) -> T {
    if x >= -T::PI() && x < T::PI() {
        return x;
    }
    let x = x.f64();
    let two_pi = 2.0 * PI;
    let r = x - two_pi * ((x + PI) / two_pi).floor();
    canonical(r)
}

/// Two-argument arctangent into `[-pi, pi)`; the origin maps to 0.
#[inline]
pub fn angle<T: Scalar>(real: T, imag: T) -> T {
    if real == T::zero() && imag == T::zero() {
        return T::zero();
    }
    canonical(imag.f64().atan2(real.f64()))
}

/// [`angle`] of an `f64` phasor, narrowed canonically into `T`.
#[inline]
pub(crate) fn angle_narrow<T: Scalar>(real: f64, imag: f64) -> T {
    if real == 0.0 && imag == 0.0 {
        return T::zero();
    }
    canonical(imag.atan2(real))
}

/// Unit phasor planes `(cos theta, sin theta)`.
pub fn phase_to_complex<T: Scalar>(phase: &Raster<T>) -> (Raster<T>, Raster<T>) {
    (phase.map(|t| t.cos()), phase.map(|t| t.sin()))
}

/// Inverse of [`phase_to_complex`] for any (not necessarily unit) phasor.
pub fn reconstruct_phase<T: Scalar>(real: &Raster<T>, imag: &Raster<T>) -> Result<Raster<T>> {
    real.zip_map(imag, angle)
}

pub(crate) struct PhaseCheck;

impl PhaseCheck {
    pub(crate) fn validate<T: Scalar>(phase: &Raster<T>) -> Result<()> {
        let pi = T::PI();
        match phase.data().iter().find(|&&p| !(p >= -pi && p < pi)) {
            Some(p) => Err(Error::OutOfDomain {
                what: "phase",
                value: p.f64(),
                lo: -PI,
                hi: PI,
            }),
            None => Ok(()),
        }
    }
}
