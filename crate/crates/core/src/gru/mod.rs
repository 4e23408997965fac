//! Convolutional GRU cell, patch sequencing and the recurrent MSD network.

mod cell;
mod cost;
pub(crate) mod network;
mod patches;

pub use cell::{conv_gru_backward, conv_gru_step, ConvGRUParams, GruVariant};
pub use cost::{cost_model, CostReport};
pub use network::{count_parameters_gru, msd_gru_backward, msd_gru_forward, MSDGRUWeights};
pub use patches::{image_to_tensor, slice_image, slice_patches, stitch_image, stitch_patches, PatchOrder, PatchSequence};
