//! Dense tensors, reverse-mode gradients and the conditioning blocks.

mod adam;
mod graph;
mod layers;
mod model;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use layers::{gated_adaln, layer_norm, linear, positional_encoding, timestep_embed, Attention, ReBlock, LN_EPS};
pub use model::{denoiser_forward, AngleEncoding, Denoiser, DenoiserInput, DenoiserKind, ModelConfig};
pub use params::ModelParams;
pub use tensor::Tensor;
