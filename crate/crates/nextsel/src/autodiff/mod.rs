//! Dense-tensor math with tape-based reverse-mode differentiation.
//!
//! Just enough machinery for BiLSTM encoders, co-attention, pooling, and
//! small MLPs: 64-bit floats throughout, deterministic ops, and a
//! central-difference gradient checker. No GPU, no broadcasting beyond what
//! the models need.

mod check;
mod params;
mod tape;
mod tensor;

pub use check::{analytic_gradients, compare_gradients, gradient_check, gradient_check_report, randomize_params};
pub use params::{ParamId, Params};
pub use tape::{Gradients, NodeId, Tape, BCE_EPS};
pub use tensor::Tensor;
