//! Interferometric SAR phase-filtering lab.
//!
//! * [`simulator`] produces noisy SLC pairs with ground-truth phase and
//!   coherence,
//! * [`preprocess`] turns a pair into the 4-channel network observation,
//! * [`baselines`] holds the boxcar filter and classical coherence tools,
//! * [`network`] is a small densely connected CNN with hand-written
//!   backpropagation, Adam, training and tiled inference,
//! * [`metrics`] scores predictions against the simulator's truth.
//!
//! Numeric code is generic over [`Scalar`] (`f32` / `f64`); the aliases
//! below name the concrete types used in practice.

pub mod baselines;
pub mod container;
pub mod error;
pub mod metrics;
pub mod network;
pub mod phase;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod scalar;
pub mod simulator;

pub use container::{read_raster, write_raster};
pub use error::{Error, Result};
pub use phase::{phase_to_complex, reconstruct_phase, wrap_phase};
pub use raster::{form_interferogram, Interferogram, Raster, SlcImage};
pub use scalar::Scalar;

pub type Raster32 = Raster<f32>;
pub type Raster64 = Raster<f64>;
pub type Tensor32 = network::Tensor4<f32>;
pub type Tensor64 = network::Tensor4<f64>;
pub type Model32 = network::ModelParams<f32>;
pub type Model64 = network::ModelParams<f64>;
