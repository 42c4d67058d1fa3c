use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters.
///
/// A stem convolution feeds `dense_layers` pre-activation blocks, each
/// seeing the concatenation of the stem output and every earlier block and
/// adding `growth` channels. Three heads (residual real, residual imaginary,
/// coherence logits) each apply `head_layers` pre-activation convolutions of
/// width `head_width` and a final pre-activation convolution to one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub in_channels: usize,
    pub stem_channels: usize,
    pub growth: usize,
    pub dense_layers: usize,
    pub head_width: usize,
    pub head_layers: usize,
    /// Batchnorm + ReLU before every convolution after the stem. When
    /// false the network is purely linear (used for gradient checks).
    pub norm_act: bool,
}

impl ModelSpec {
    /// Desk-scale network: 6 dense blocks of growth 16, heads 3 x 32.
    pub fn lite() -> Self {
        Self {
            in_channels: 4,
            stem_channels: 16,
            growth: 16,
            dense_layers: 6,
            head_width: 32,
            head_layers: 3,
            norm_act: true,
        }
    }

    /// Small model for finite-difference checks.
    pub fn micro() -> Self {
        Self {
            in_channels: 4,
            stem_channels: 4,
            growth: 4,
            dense_layers: 2,
            head_width: 4,
            head_layers: 1,
            norm_act: true,
        }
    }

    pub fn micro_linear() -> Self {
        Self {
            norm_act: false,
            ..Self::micro()
        }
    }

    /// Input channel count of dense block `i`.
    pub fn dense_in(&self, i: usize) -> usize {
        self.stem_channels + i * self.growth
    }

    /// Channels of the full concatenated feature map.
    pub fn feature_channels(&self) -> usize {
        self.dense_in(self.dense_layers)
    }

    /// Input channels of head layer `l` (`l == head_layers` is the final conv).
    pub fn head_in(&self, l: usize) -> usize {
        if l == 0 {
            self.feature_channels()
        } else {
            self.head_width
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.stem_channels == 0 || self.growth == 0 || self.head_width == 0 {
            return Err(Error::InvalidArgument(format!("degenerate model spec {self:?}")));
        }
        Ok(())
    }
}

/// The three output heads, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Real,
    Imag,
    Coherence,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Real, Head::Imag, Head::Coherence];

    pub fn prefix(self) -> &'static str {
        match self {
            Head::Real => "head_real",
            Head::Imag => "head_imag",
            Head::Coherence => "head_coh",
        }
    }
}
