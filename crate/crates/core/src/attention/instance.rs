//! Problem instances and model vectors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::AttentionError;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_from, uniform_pm1};

/// One regression instance. `a1`, `a2` are n x d feature matrices, `b` the
/// length-n^2 target (blocks of n, stored row-major by block), `w` the
/// strictly positive per-row penalty weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionInstance<T: Scalar> {
    a1: DMatrix<T>,
    a2: DMatrix<T>,
    b: DVector<T>,
    w: DVector<T>,
}

impl<T: Scalar> AttentionInstance<T> {
    pub fn new(
        a1: DMatrix<T>,
        a2: DMatrix<T>,
        b: DVector<T>,
        w: DVector<T>,
    ) -> Result<Self, AttentionError> {
        let (n, d) = a1.shape();
        if n == 0 || d == 0 || a2.shape() != (n, d) {
            return Err(AttentionError::BadShapes);
        }
        let finite = a1
            .iter()
            .chain(a2.iter())
            .chain(b.iter())
            .chain(w.iter())
            .all(|v| v.finite());
        if !finite {
            return Err(AttentionError::NonFiniteData);
        }
        if b.len() != n * n {
            return Err(AttentionError::BadTarget {
                got: b.len(),
                want: n * n,
            });
        }
        if w.len() != n || w.iter().any(|v| *v <= T::zero()) {
            return Err(AttentionError::BadWeights);
        }
        Ok(Self { a1, a2, b, w })
    }

    /// Canonical seeded instance: feature entries uniform on (-1, 1), each
    /// target block a probability vector (softmax of uniform logits), and
    /// w = 3 so the convexity certificate has headroom when n >= d^2.
    pub fn generate(n: usize, d: usize, seed: u64) -> Self {
        assert!(n >= 1 && d >= 1, "instance needs n >= 1 and d >= 1");
        let mut ra = rng_from(derive_seed(seed, 0));
        let a1 = DMatrix::from_fn(n, d, |_, _| uniform_pm1(&mut ra));
        let mut rb = rng_from(derive_seed(seed, 1));
        let a2 = DMatrix::from_fn(n, d, |_, _| uniform_pm1(&mut rb));

        let mut rt = rng_from(derive_seed(seed, 2));
        let mut b = DVector::zeros(n * n);
        for j in 0..n {
            let logits: Vec<f64> = (0..n).map(|_| 2.0 * rt.gen::<f64>() - 1.0).collect();
            let m = logits.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
            let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for i in 0..n {
                b[j * n + i] = T::from_double(e[i] / s);
            }
        }
        let w = DVector::from_element(n, T::from_double(3.0));
        Self::new(a1, a2, b, w).expect("generated data is valid by construction")
    }

    pub fn n(&self) -> usize {
        self.a1.nrows()
    }

    pub fn d(&self) -> usize {
        self.a1.ncols()
    }

    /// Model dimension d^2.
    pub fn dim(&self) -> usize {
        self.d() * self.d()
    }

    pub fn a1(&self) -> &DMatrix<T> {
        &self.a1
    }

    pub fn a2(&self) -> &DMatrix<T> {
        &self.a2
    }

    pub fn b_target(&self) -> &DVector<T> {
        &self.b
    }

    pub fn w(&self) -> &DVector<T> {
        &self.w
    }

    /// Target slice for one block (length n).
    pub fn b_block(&self, block: usize) -> Result<DVector<T>, AttentionError> {
        self.check_block(block)?;
        let n = self.n();
        Ok(self.b.rows(block * n, n).into_owned())
    }

    pub(crate) fn check_block(&self, block: usize) -> Result<(), AttentionError> {
        if block >= self.n() {
            return Err(AttentionError::BlockIndex {
                index: block,
                n: self.n(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_x(&self, x: &WeightVector<T>) -> Result<(), AttentionError> {
        if x.dim() != self.dim() {
            return Err(AttentionError::DimensionMismatch {
                got: x.dim(),
                want: self.dim(),
            });
        }
        Ok(())
    }
}

/// Vectorized model parameters: a d x d matrix flattened row-major, so
/// X[i,j] sits at index i*d + j.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T: Scalar>(DVector<T>);

impl<T: Scalar> WeightVector<T> {
    pub fn new(values: DVector<T>) -> Result<Self, AttentionError> {
        let len = values.len();
        let d = (len as f64).sqrt().round() as usize;
        if len == 0 || d * d != len {
            return Err(AttentionError::NotSquare { len });
        }
        if values.iter().any(|v| !v.finite()) {
            return Err(AttentionError::NonFiniteData);
        }
        Ok(Self(values))
    }

    pub fn from_vec(values: Vec<T>) -> Result<Self, AttentionError> {
        Self::new(DVector::from_vec(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d * d))
    }

    /// Wraps without validating; callers guarantee shape and finiteness.
    pub(crate) fn new_unchecked(values: DVector<T>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<T> {
        self.0
    }
}
