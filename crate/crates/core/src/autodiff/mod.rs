//! Dense tensors with reverse-mode differentiation.
//!
//! The engine covers exactly what the attention CNN needs: convolution,
//! pooling, batch normalization, elementwise gates with broadcasting, small
//! matrix products and channel/axis reductions. Everything is `f64`.

pub mod checkpoint;
mod kernels;
mod tape;
mod tensor;

pub use kernels::Padding;
pub use tape::{sigmoid, BatchNormStats, Gradients, Mode, Tape, Var};
pub use tensor::Tensor;
