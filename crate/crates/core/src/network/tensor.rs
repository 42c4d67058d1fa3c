use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Batch of images, `batch x height x width x channels`, channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn new(batch: usize, height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != batch * height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "tensor {batch}x{height}x{width}x{channels} given {} values",
                data.len()
            )));
        }
        Ok(Self {
            batch,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(batch: usize, height: usize, width: usize, channels: usize) -> Self {
        Self {
            batch,
            height,
            width,
            channels,
            data: vec![T::zero(); batch * height * width * channels],
        }
    }

    pub fn pixels(&self) -> usize {
        self.batch * self.height * self.width
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.batch, self.height, self.width, self.channels]
    }

    /// Stack same-shaped rasters into a batch.
    pub fn from_rasters<U: Scalar>(rasters: &[&Raster<U>]) -> Result<Self> {
        let first = rasters.first().ok_or(Error::EmptyInput("empty batch"))?;
        let mut data = Vec::with_capacity(rasters.len() * first.data().len());
        for r in rasters {
            first.ensure_same_shape(r)?;
            data.extend(r.data().iter().map(|v| T::of(v.f64())));
        }
        Self::new(rasters.len(), first.height(), first.width(), first.channels(), data)
    }

    /// One batch element as a raster.
    pub fn to_raster<U: Scalar>(&self, index: usize) -> Result<Raster<U>> {
        let n = self.height * self.width * self.channels;
        let slice = self
            .data
            .get(index * n..(index + 1) * n)
            .ok_or_else(|| Error::InvalidArgument(format!("batch index {index} out of range")))?;
        Raster::new(
            self.width,
            self.height,
            self.channels,
            slice.iter().map(|v| U::of(v.f64())).collect(),
        )
    }

    pub fn image(&self, index: usize) -> &[T] {
        let n = self.height * self.width * self.channels;
        &self.data[index * n..(index + 1) * n]
    }

    pub fn same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(
                format!("{:?}", self.dims()),
                format!("{:?}", other.dims()),
            ));
        }
        Ok(())
    }
}
