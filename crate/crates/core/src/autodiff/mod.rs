//! Reverse-mode automatic differentiation over dense f64 matrices.

mod params;
mod tape;
mod tensor;

pub use params::{Adam, ParamSet};
pub use tape::{layer_norm_in_place, sigmoid, softmax_in_place, softplus, Gradients, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;
pub(crate) use tensor::gemm;

#[cfg(test)]
mod tests;
