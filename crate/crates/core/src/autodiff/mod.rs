//! Minimal reverse-mode automatic differentiation over `f64` tensors.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_STEP, RELATIVE_FLOOR};
pub use graph::{sigmoid, Graph, Var};
pub use tensor::Tensor;
