//! Seeded randomized sketch operators.
//!
//! A sketch compresses a length-`dim` vector to `b_sketch` coordinates
//! through a random matrix `R`; de-sketching applies the transpose. Every
//! operator here is realized as an explicit dense matrix, which is cheap at
//! the problem sizes we target and keeps the round-trip `Rᵀ(Rh)` exactly
//! reproducible from `(kind, b_sketch, dim, seed)`.
//!
//! The supported constructions differ in how `R` is drawn (dense Gaussian,
//! subsampled Hadamard, sign hashes, sparse embeddings), but all share the
//! same unbiasedness contract: averaged over seeds, `desk(sk(h))` recovers
//! `h`, with second moments controlled by the kind-specific `alpha`.

mod hash;
mod moments;
mod operator;

pub use hash::{PolyHash, MERSENNE_P};
pub use moments::embedding_moments;
pub use operator::SketchOperator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which random matrix family an operator draws from.
///
/// The sparse kinds carry their per-column fill `s`. Serialized form is
/// internally tagged, e.g. `{"kind":"gaussian"}` or
/// `{"kind":"sparse-embedding-ii","s":2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SketchKind {
    Gaussian,
    Srht,
    Ams,
    CountSketch,
    #[serde(rename = "sparse-embedding-i")]
    SparseEmbeddingI {
        s: usize,
    },
    #[serde(rename = "sparse-embedding-ii")]
    SparseEmbeddingII {
        s: usize,
    },
}

impl SketchKind {
    /// Leading constant of the coordinate-wise embedding parameter.
    pub(crate) fn alpha_factor(self) -> f64 {
        match self {
            SketchKind::Gaussian | SketchKind::CountSketch => 3.0,
            SketchKind::Srht
            | SketchKind::Ams
            | SketchKind::SparseEmbeddingI { .. }
            | SketchKind::SparseEmbeddingII { .. } => 2.0,
        }
    }
}

/// Operator description as it appears in simulation configs. The seed is
/// optional; training derives per-round seeds from the master seed when it
/// is absent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    #[serde(flatten)]
    pub kind: SketchKind,
    pub b_sketch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SketchError {
    #[error("sketch needs at least one row")]
    ZeroRows,
    #[error("sketch input dimension must be positive")]
    ZeroDim,
    #[error("sketch rows {b} exceed input dimension {dim}")]
    TooManyRows { b: usize, dim: usize },
    #[error("sparsity {s} outside 1..={b}")]
    BadSparsity { s: usize, b: usize },
    #[error("sparsity {s} does not divide {b} rows into bands")]
    UnevenBands { s: usize, b: usize },
    #[error("vector has length {got}, operator expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("moment estimation needs at least {min} trials, got {got}")]
    TrialsTooSmall { got: usize, min: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_serde_tags() {
        let g = serde_json::to_string(&SketchKind::Gaussian).unwrap();
        assert_eq!(g, r#"{"kind":"gaussian"}"#);
        let s = serde_json::to_string(&SketchKind::SparseEmbeddingII { s: 2 }).unwrap();
        assert_eq!(s, r#"{"kind":"sparse-embedding-ii","s":2}"#);
        let back: SketchKind = serde_json::from_str(&s).unwrap();
        assert_eq!(back, SketchKind::SparseEmbeddingII { s: 2 });
    }

    #[test]
    fn config_serde_roundtrip() {
        let cfg = SketchConfig {
            kind: SketchKind::CountSketch,
            b_sketch: 4,
            seed: None,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(text, r#"{"kind":"count-sketch","b_sketch":4}"#);
        let back: SketchConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        let with_seed: SketchConfig =
            serde_json::from_str(r#"{"kind":"srht","b_sketch":2,"seed":7}"#).unwrap();
        assert_eq!(with_seed.seed, Some(7));
    }
}
