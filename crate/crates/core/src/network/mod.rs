//! Densely connected residual CNN with explicit backpropagation.
//!
//! The network maps the 4-channel observation to three planes: the
//! real/imaginary noise residual of the interferogram phasor and coherence
//! logits. Everything is hand written on channel-last buffers with
//! im2col + GEMM convolutions.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod infer;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod spec;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use gradcheck::{grad_check, GradCheckReport};
pub use infer::{infer, infer_interferogram, Prediction, RawOutputs, Tiling};
pub use loss::{loss_and_grad, LossParts, TrainTarget};
pub use model::{backward, forward, update_running_stats, ForwardCache, ForwardOptions, Mode, Outputs};
pub use params::{Grads, ModelParams, ParamKind};
pub use spec::{Head, ModelSpec};
pub use tensor::Tensor4;
pub use train::{load_training_set, train, TrainConfig, TrainLog, TrainSample};
