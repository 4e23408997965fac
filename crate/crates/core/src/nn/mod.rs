//! Minimal neural-network engine: tensors, dilated convolutions,
//! activations, loss, Adam and gradient checking.

mod activation;
mod adam;
mod conv;
mod gradcheck;
mod init;
mod loss;
mod params;
mod tensor;

pub use activation::{activation, activation_backward, relu, sigmoid, Activation};
pub use adam::{adam_step, AdamConfig, AdamState, DEFAULT_LEARNING_RATE};
pub use conv::{conv_backward_sample, conv_forward_sample, dilated_conv2d, dilated_conv2d_backward, ConvGrads, ConvLayerParams};
pub use gradcheck::{grad_check, grad_check_directional, numeric_gradient, relative_error, DEFAULT_STEP};
pub use init::uniform_init;
pub use loss::mse_loss;
pub use params::{accumulate, ParamSpec, Parameterized};
pub use tensor::{Tensor, MAX_RANK};
