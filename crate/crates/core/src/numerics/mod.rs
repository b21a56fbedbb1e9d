//! Dense-array primitives and the differentiation machinery the rest of the
//! crate builds on: linear maps, layer normalization, SiLU, their exact
//! gradients, and the two optimizers.
//!
//! Storage precision is generic; reductions outside the blocked matmul
//! kernel accumulate in f64. Every backward op here is validated against
//! central finite differences run fully in f64.

mod activation;
mod layernorm;
mod linear;
mod optim;
mod tensor;

pub use activation::{silu, silu_backward};
pub use layernorm::{layernorm_backward, layernorm_forward, LnCache, LN_EPS};
pub use linear::{linear_backward, linear_forward};
pub use optim::{OptimizerKind, OptimizerState, ParamWithGrad};
pub use tensor::Tensor2;
