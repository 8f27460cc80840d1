//! Dense neural-network kernel: layers, reverse-mode gradients, Adam and
//! checkpoints.

mod activation;
pub mod checkpoint;
pub mod gradcheck;
mod layer;
mod matrix;
mod params;
mod sequential;

pub use activation::{log_softmax, sigmoid, softmax_in_place, softplus, Activation};
pub use checkpoint::Checkpoint;
pub use layer::{LayerKind, LayerSpec, Normalization};
pub use matrix::Matrix;
pub use params::{polyak_update, Adam, Param, ParamId, ParamStore};
pub use sequential::{InputGradients, Network, Sequential, Tape};
