//! Softmax attention regression: loss, derivatives, convexity certificate.
//!
//! An instance couples two feature matrices A1, A2 (each n x d) through a
//! Kronecker-structured design: block j (one of n) is the n x d^2 matrix
//! whose row i is A1[j,:] (x) A2[i,:]. The model is a vectorized d x d
//! matrix x. Each block pushes its logits through a softmax and is scored
//! against a target slice; a weighted quadratic penalty on the logits keeps
//! the problem strongly convex when the weights clear the certificate
//! threshold.

mod fd;
mod instance;
mod ops;

pub use fd::{fd_gradient, fd_hessian};
pub use instance::{AttentionInstance, WeightVector};
pub use ops::{
    gradient, gradient_blocks, hessian, kron_block, loss, loss_blocks, min_singular_value,
    softmax_block, stacked_matrix, strong_convexity_certificate, vec_identity_check, weight_matrix,
    LossBreakdown, SoftmaxBlock, MAX_DENSE_DIM,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttentionError {
    #[error("a1 and a2 must both be n x d with n >= 1, d >= 1")]
    BadShapes,
    #[error("non-finite entry in instance or weight data")]
    NonFiniteData,
    #[error("target length {got} != n^2 = {want}")]
    BadTarget { got: usize, want: usize },
    #[error("per-row weights must have length n and strictly positive entries")]
    BadWeights,
    #[error("block index {index} out of range for n = {n}")]
    BlockIndex { index: usize, n: usize },
    #[error("weight vector length {len} is not a positive perfect square")]
    NotSquare { len: usize },
    #[error("weight vector has dimension {got}, instance expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("non-finite value produced in block {block}")]
    NonFinite { block: usize },
    #[error("dense dimension {dim} exceeds the supported maximum {max}")]
    CapacityExceeded { dim: usize, max: usize },
    #[error("convexity certificate inapplicable: design matrix is rank deficient")]
    CertificateInapplicable,
    #[error("mu must be strictly positive and finite")]
    InvalidMu,
    #[error("finite-difference step must be positive and finite")]
    BadStep,
}
