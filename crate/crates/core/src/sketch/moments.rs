//! Monte-Carlo estimation of the coordinate-wise embedding moments.

use nalgebra::DVector;

use super::{SketchError, SketchKind, SketchOperator};
use crate::scalar::Scalar;
use crate::seed::derive_seed;

pub const MIN_TRIALS: usize = 1000;

/// Order-independent reduction so a future parallel split of the trial loop
/// cannot change the result.
fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n => {
            let (lo, hi) = xs.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Draws `trials` independent operators (seeds derived per trial) and
/// returns the empirical mean of the bilinear form hᵀRᵀRg and of its
/// square. The mean estimates hᵀg; the second moment is what the
/// (1 + alpha-style) variance bounds constrain.
pub fn embedding_moments<T: Scalar>(
    kind: SketchKind,
    b_sketch: usize,
    dim: usize,
    g: &DVector<T>,
    h: &DVector<T>,
    trials: usize,
    seed: u64,
) -> Result<(T, T), SketchError> {
    if trials < MIN_TRIALS {
        return Err(SketchError::TrialsTooSmall {
            got: trials,
            min: MIN_TRIALS,
        });
    }
    if g.len() != dim {
        return Err(SketchError::DimensionMismatch {
            got: g.len(),
            want: dim,
        });
    }
    if h.len() != dim {
        return Err(SketchError::DimensionMismatch {
            got: h.len(),
            want: dim,
        });
    }

    let mut bilinear = Vec::with_capacity(trials);
    let mut squares = Vec::with_capacity(trials);
    for t in 0..trials {
        let op = SketchOperator::<T>::new(kind, b_sketch, dim, derive_seed(seed, t as u64))?;
        let v = h.dot(&op.roundtrip(g)?);
        bilinear.push(v);
        squares.push(v * v);
    }
    let n = T::from_double(trials as f64);
    Ok((pairwise_sum(&bilinear) / n, pairwise_sum(&squares) / n))
}
