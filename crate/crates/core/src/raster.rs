//! Image containers: [`Raster`], [`SlcImage`] and [`Interferogram`].

use std::fmt;

use crate::error::{Error, Result};
use crate::phase::{wrap_phase, PhaseCheck};
use crate::scalar::Scalar;

/// A `width x height x channels` grid, row-major with channels fastest.
#[derive(Clone, PartialEq)]
pub struct Raster<T = f32> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

/// Shape triple, printed as `WxHxC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.channels)
    }
}

impl<T> fmt::Debug for Raster<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Raster({})", self.shape())
    }
}

impl<T> Raster<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let valid = width >= 1
            && height >= 1
            && channels >= 1
            && width.checked_mul(height).and_then(|v| v.checked_mul(channels)) == Some(data.len());
        if !valid {
            return Err(Error::InvalidShape {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> Shape {
        Shape {
            width: self.width,
            height: self.height,
            channels: self.channels,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        (row * self.width + col) * self.channels + channel
    }

    /// Errors unless `other` has the same width and height.
    pub fn ensure_same_grid<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::mismatch(self.shape(), other.shape()));
        }
        Ok(())
    }

    /// Errors unless `other` has the same width, height and channel count.
    pub fn ensure_same_shape<U>(&self, other: &Raster<U>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::mismatch(self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn ensure_channels(&self, channels: usize) -> Result<()> {
        if self.channels != channels {
            return Err(Error::InvalidArgument(format!(
                "expected {channels}-channel raster, got {}",
                self.shape()
            )));
        }
        Ok(())
    }
}

impl<T: Copy> Raster<T> {
    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        let len = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::InvalidArgument("raster too large".into()))?;
        Self::new(width, height, channels, vec![value; len])
    }

    /// Single-channel raster from a `(row, col)` function.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, 1, data)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.data[self.index(row, col, 0)]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[self.index(row, col, channel)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: T) {
        let i = self.index(row, col, channel);
        self.data[i] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Pointwise combination of two same-shaped rasters.
    pub fn zip_map<U: Copy, V>(&self, other: &Raster<U>, mut f: impl FnMut(T, U) -> V) -> Result<Raster<V>> {
        self.ensure_same_shape(other)?;
        Ok(Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Extract one channel as a single-channel raster.
    pub fn channel(&self, channel: usize) -> Result<Raster<T>> {
        if channel >= self.channels {
            return Err(Error::InvalidArgument(format!(
                "channel {channel} out of range for {}",
                self.shape()
            )));
        }
        let data = self.data.iter().skip(channel).step_by(self.channels).copied().collect();
        Raster::new(self.width, self.height, 1, data)
    }

    /// Interleave single-channel rasters into one multi-channel raster.
    pub fn stack(planes: &[&Raster<T>]) -> Result<Raster<T>> {
        let first = planes.first().ok_or(Error::EmptyInput("no planes to stack"))?;
        for p in planes {
            first.ensure_same_shape(p)?;
            p.ensure_channels(1)?;
        }
        let c = planes.len();
        let mut data = Vec::with_capacity(first.pixels() * c);
        for i in 0..first.pixels() {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Raster::new(first.width, first.height, c, data)
    }

    /// Copy a `width x height` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Raster<T>> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::InvalidArgument(format!(
                "crop {width}x{height} at ({row},{col}) exceeds {}",
                self.shape()
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(width * height * c);
        for r in row..row + height {
            let start = self.index(r, col, 0);
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        Raster::new(width, height, c, data)
    }
}

impl<T: Scalar> Raster<T> {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, T::zero())
    }

    /// Mean of all values, accumulated in `f64`.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| v.f64()).sum::<f64>() / self.data.len() as f64
    }

    pub fn cast<U: Scalar>(&self) -> Raster<U> {
        self.map(|v| U::of(v.f64()))
    }
}

/// One single-look complex acquisition as amplitude and phase planes.
#[derive(Debug, Clone, PartialEq)]
pub struct SlcImage<T = f32> {
    amplitude: Raster<T>,
    phase: Raster<T>,
}

impl<T: Scalar> SlcImage<T> {
    /// Validates matching single-channel grids, nonnegative amplitude and
    /// phase in `[-pi, pi)`.
    pub fn new(amplitude: Raster<T>, phase: Raster<T>) -> Result<Self> {
        amplitude.ensure_channels(1)?;
        phase.ensure_channels(1)?;
        amplitude.ensure_same_shape(&phase)?;
        if let Some(v) = amplitude.data().iter().find(|v| !(**v >= T::zero())) {
            return Err(Error::OutOfDomain {
                what: "amplitude",
                value: v.f64(),
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        PhaseCheck::validate(&phase)?;
        Ok(Self { amplitude, phase })
    }

    /// Build from real/imaginary parts: amplitude `hypot`, phase `atan2`.
    pub fn from_complex(real: &Raster<T>, imag: &Raster<T>) -> Result<Self> {
        let amplitude = real.zip_map(imag, |re, im| re.hypot(im))?;
        let phase = crate::phase::reconstruct_phase(real, imag)?;
        Self::new(amplitude, phase)
    }

    pub fn amplitude(&self) -> &Raster<T> {
        &self.amplitude
    }

    pub fn phase(&self) -> &Raster<T> {
        &self.phase
    }

    pub fn width(&self) -> usize {
        self.amplitude.width()
    }

    pub fn height(&self) -> usize {
        self.amplitude.height()
    }

    pub fn into_parts(self) -> (Raster<T>, Raster<T>) {
        (self.amplitude, self.phase)
    }

    /// Real and imaginary parts `A cos(phi)`, `A sin(phi)`.
    pub fn to_complex(&self) -> (Raster<T>, Raster<T>) {
        let re = self
            .amplitude
            .zip_map(&self.phase, |a, p| a * p.cos())
            .expect("validated shapes");
        let im = self
            .amplitude
            .zip_map(&self.phase, |a, p| a * p.sin())
            .expect("validated shapes");
        (re, im)
    }
}

/// Complex product of two acquisitions: amplitude `A1*A2`, wrapped phase
/// difference `phi2 - phi1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferogram<T = f32> {
    amplitude: Raster<T>,
    phase: Raster<T>,
}

impl<T: Scalar> Interferogram<T> {
    pub fn new(amplitude: Raster<T>, phase: Raster<T>) -> Result<Self> {
        amplitude.ensure_channels(1)?;
        phase.ensure_channels(1)?;
        amplitude.ensure_same_shape(&phase)?;
        PhaseCheck::validate(&phase)?;
        Ok(Self { amplitude, phase })
    }

    pub fn amplitude(&self) -> &Raster<T> {
        &self.amplitude
    }

    pub fn phase(&self) -> &Raster<T> {
        &self.phase
    }

    pub fn width(&self) -> usize {
        self.amplitude.width()
    }

    pub fn height(&self) -> usize {
        self.amplitude.height()
    }
}

/// Pointwise `S1 * conj(S2)`-style product, expressed on amplitude/phase.
pub fn form_interferogram<T: Scalar>(s1: &SlcImage<T>, s2: &SlcImage<T>) -> Result<Interferogram<T>> {
    if s1.amplitude.shape() != s2.amplitude.shape() {
        return Err(Error::mismatch(s1.amplitude.shape(), s2.amplitude.shape()));
    }
    let amplitude = s1.amplitude.zip_map(&s2.amplitude, |a, b| a * b)?;
    let phase = s1
        .phase
        .zip_map(&s2.phase, |p1, p2| wrap_phase(T::of(p2.f64() - p1.f64())))?;
    Ok(Interferogram { amplitude, phase })
}
