//! Dense linear algebra, activations and the softmax/cross-entropy loss the
//! recurrent cells are built on. Sizes here are tiny (hidden width in the
//! tens at most), so everything is plain row-major `Vec` storage.

mod matrix;
mod ops;

use thiserror::Error;

pub use matrix::{Matrix, Vector};
pub use ops::{
    cross_entropy, sigmoid, sigmoid_scalar, softmax, softmax_cross_entropy_grad, softmax_in_place,
    tanh_act, LOSS_FLOOR,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
}
