//! Minimal reverse-mode differentiation over dense real tensors: the
//! operations the spectrogram autoencoders need, a finite-difference
//! gradient checker, Xavier initialization, and an RMSProp optimizer.

mod gradcheck;
mod graph;
mod init;
mod ops;
mod rmsprop;
mod tensor;

pub use gradcheck::{finite_difference_gradients, max_relative_error};
pub use graph::{lstm_cell_step, Graph, LstmGateIds, LstmIds, NodeId};
pub use init::xavier_uniform;
pub use ops::{
    causal_conv_time, causal_conv_time_transposed_accumulate, kl_divergence, matmul, softplus,
    softplus_inverse, softplus_scalar, KL_EPS,
};
pub use rmsprop::{clip_global_norm, OptimizerState, RmsProp, RmsPropConfig};
pub use tensor::Tensor;
