//! Deterministic numeric core: sequence tensors, forward kernels,
//! reverse-mode gradients and the Adam update.

mod adam;
mod graph;
pub mod ops;
mod rng;
mod tensor;

pub use adam::{AdamConfig, Param, ParamBlock, ParamId};
pub use graph::{Graph, Var};
pub use rng::Rng;
pub use tensor::Tensor2D;
