//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] is built fresh for every essay: each primitive appends its
//! output, and [`Tape::backward`] walks the record in reverse, summing the
//! contributions of every use of a node. Distinct tapes over the same
//! read-only parameters may live on different threads; merging their
//! gradients is the caller's job.

mod check;
mod tape;
mod tensor;

pub use check::{
    check_primitive, grad_check, relative_error, GradCheck, GradCheckReport, ParamError,
    PrimitiveCheck,
};
pub use tape::{
    sigmoid, softmax, Gradients, NodeId, Primitive, PrimitiveKind, Tape, SIGMOID_MARGIN,
};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{primitive}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        primitive: PrimitiveKind,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{primitive}: expected {expected} input(s), got {got}")]
    Arity {
        primitive: PrimitiveKind,
        expected: usize,
        got: usize,
    },
    #[error("{primitive}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        primitive: PrimitiveKind,
        index: usize,
        len: usize,
    },
    #[error("loss must be a scalar of shape [1], got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tensor of shape {shape:?} cannot hold {got} values")]
    BadTensor { shape: Vec<usize>, got: usize },
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
}
