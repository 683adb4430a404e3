//! Minimal reverse-mode autodiff and the layers built on it.
//!
//! Everything runs on 2-D arrays: batched vectors are `[rows, d]`, bias and
//! layer-norm parameters are `[1, d]`, scalars (losses) are `[1, 1]`.
//! A [`Tape`] records the forward pass; [`Tape::backward`] walks the
//! recording in reverse and accumulates gradients into the [`Parameter`]s
//! that were fed in. The whole stack is generic over [`Real`] so models
//! train at f32 while gradient checks can run the same graph at f64.

mod adam;
mod gradcheck;
mod layers;
mod param;
mod tape;

pub use adam::{adam_step, Adam, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{cross_entropy_nll, LayerNorm, Linear, Mlp, MultiHeadAttention};
pub use param::{init_normal_scaled, init_uniform_fan_in, Parameter};
pub use tape::{Tape, TensorId};

use thiserror::Error;

/// Scalar type the engine runs on. Implemented for `f32` and `f64`.
pub trait Real:
    num_traits::Float
    + ndarray::ScalarOperand
    + ndarray::LinalgScalar
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::fmt::Display
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Cast an `f64` constant into the engine scalar.
pub fn real<F: Real>(x: f64) -> F {
    F::from(x).expect("f64 constant representable in Real type")
}

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("masked softmax row {row} has no allowed entries")]
    FullyMaskedRow { row: usize },
    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange { row: usize, label: usize, classes: usize },
    #[error("d_model {d_model} not divisible by {heads} attention heads")]
    IndivisibleHeads { d_model: usize, heads: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("backward requires a scalar loss node, got shape {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
}
