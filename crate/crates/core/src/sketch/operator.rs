//! Realized sketch matrices and the sk/desk pair.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::hash::PolyHash;
use super::{SketchError, SketchKind};
use crate::scalar::Scalar;
use crate::seed::{rng_from, standard_normal};

/// A frozen draw of a random sketching matrix.
///
/// Construction is a pure function of `(kind, b_sketch, dim, seed)`. For
/// SRHT the working dimension is padded to the next power of two; vectors
/// are zero-extended on the way in and truncated on the way out, and alpha
/// uses the padded width.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchOperator<T: Scalar> {
    kind: SketchKind,
    b_sketch: usize,
    dim: usize,
    padded: usize,
    seed: u64,
    alpha: T,
    r: DMatrix<T>,
}

impl<T: Scalar> SketchOperator<T> {
    pub fn new(
        kind: SketchKind,
        b_sketch: usize,
        dim: usize,
        seed: u64,
    ) -> Result<Self, SketchError> {
        if b_sketch == 0 {
            return Err(SketchError::ZeroRows);
        }
        if dim == 0 {
            return Err(SketchError::ZeroDim);
        }
        if b_sketch > dim {
            return Err(SketchError::TooManyRows { b: b_sketch, dim });
        }
        match kind {
            SketchKind::SparseEmbeddingI { s } => {
                if s == 0 || s > b_sketch {
                    return Err(SketchError::BadSparsity { s, b: b_sketch });
                }
            }
            SketchKind::SparseEmbeddingII { s } => {
                if s == 0 || s > b_sketch {
                    return Err(SketchError::BadSparsity { s, b: b_sketch });
                }
                if b_sketch % s != 0 {
                    return Err(SketchError::UnevenBands { s, b: b_sketch });
                }
            }
            _ => {}
        }

        let padded = match kind {
            SketchKind::Srht => dim.next_power_of_two(),
            _ => dim,
        };
        let mut rng = rng_from(seed);
        let r = match kind {
            SketchKind::Gaussian => gaussian_matrix(&mut rng, b_sketch, padded),
            SketchKind::Srht => srht_matrix(&mut rng, b_sketch, padded),
            SketchKind::Ams => ams_matrix(&mut rng, b_sketch, padded),
            SketchKind::CountSketch => countsketch_matrix(&mut rng, b_sketch, padded),
            SketchKind::SparseEmbeddingI { s } => sparse_i_matrix(&mut rng, b_sketch, padded, s),
            SketchKind::SparseEmbeddingII { s } => sparse_ii_matrix(&mut rng, b_sketch, padded, s),
        };
        let alpha = T::from_double(kind.alpha_factor() * padded as f64 / b_sketch as f64);
        Ok(SketchOperator {
            kind,
            b_sketch,
            dim,
            padded,
            seed,
            alpha,
            r,
        })
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn b_sketch(&self) -> usize {
        self.b_sketch
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Working width: `dim`, or the next power of two for SRHT.
    pub fn padded_dim(&self) -> usize {
        self.padded
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.r
    }

    /// Compress: `R h`.
    pub fn sk(&self, h: &DVector<T>) -> Result<DVector<T>, SketchError> {
        if h.len() != self.dim {
            return Err(SketchError::DimensionMismatch {
                got: h.len(),
                want: self.dim,
            });
        }
        if self.padded == self.dim {
            return Ok(&self.r * h);
        }
        let mut wide = DVector::zeros(self.padded);
        wide.rows_mut(0, self.dim).copy_from(h);
        Ok(&self.r * wide)
    }

    /// Expand back: `Rᵀ y`, truncated to the original width when padded.
    pub fn desk(&self, y: &DVector<T>) -> Result<DVector<T>, SketchError> {
        if y.len() != self.b_sketch {
            return Err(SketchError::DimensionMismatch {
                got: y.len(),
                want: self.b_sketch,
            });
        }
        let wide = self.r.tr_mul(y);
        if self.padded == self.dim {
            return Ok(wide);
        }
        Ok(wide.rows(0, self.dim).into_owned())
    }

    /// Round trip `desk(sk(h))` as a single call.
    pub fn roundtrip(&self, h: &DVector<T>) -> Result<DVector<T>, SketchError> {
        self.desk(&self.sk(h)?)
    }

    /// True when a CountSketch draw maps every column to a distinct row, so
    /// the matrix is a signed permutation and the round trip is the exact
    /// identity. Always false for other kinds.
    pub fn is_injective_countsketch(&self) -> bool {
        if self.kind != SketchKind::CountSketch {
            return false;
        }
        let mut seen = vec![false; self.b_sketch];
        for col in 0..self.dim {
            let row = (0..self.b_sketch)
                .find(|&r| self.r[(r, col)] != T::zero())
                .expect("CountSketch column has one nonzero");
            if seen[row] {
                return false;
            }
            seen[row] = true;
        }
        true
    }
}

fn gaussian_matrix<T: Scalar, R: Rng>(rng: &mut R, b: usize, m: usize) -> DMatrix<T> {
    let sd = T::from_double((b as f64).recip().sqrt());
    let entries: Vec<T> = (0..b * m)
        .map(|_| standard_normal::<T, _>(rng) * sd)
        .collect();
    DMatrix::from_row_slice(b, m, &entries)
}

/// Subsampled randomized Hadamard transform on a power-of-two width `m`:
/// scaled row sample of H·D with H the orthonormal Walsh matrix,
/// H[i,j] = (-1)^popcount(i & j)/√m. Row entries collapse to ±d[j]/√b. The
/// diagonal signs are drawn first, then the `b` row indices (uniform with
/// replacement, which keeps E[RᵀR] = I on the padded space).
fn srht_matrix<T: Scalar, R: Rng>(rng: &mut R, b: usize, m: usize) -> DMatrix<T> {
    debug_assert!(m.is_power_of_two());
    let signs: Vec<f64> = (0..m)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let rows: Vec<usize> = (0..b).map(|_| rng.gen_range(0..m)).collect();
    let scale = (b as f64).recip().sqrt();
    DMatrix::from_fn(b, m, |r, c| {
        let parity = (rows[r] & c).count_ones() & 1;
        let h = if parity == 0 { 1.0 } else { -1.0 };
        T::from_double(h * signs[c] * scale)
    })
}

/// One 4-wise sign hash per row; entries ±1/√b.
fn ams_matrix<T: Scalar, R: Rng>(rng: &mut R, b: usize, m: usize) -> DMatrix<T> {
    let hashes: Vec<PolyHash> = (0..b).map(|_| PolyHash::sample(rng, 4)).collect();
    let scale = (b as f64).recip().sqrt();
    DMatrix::from_fn(b, m, |r, c| {
        T::from_double(hashes[r].sign(c as u64) as f64 * scale)
    })
}

/// Bucket hash is 2-wise, sign hash 4-wise; column i has the single entry
/// σ(i) in row h(i).
fn countsketch_matrix<T: Scalar, R: Rng>(rng: &mut R, b: usize, m: usize) -> DMatrix<T> {
    let bucket = PolyHash::sample(rng, 2);
    let sign = PolyHash::sample(rng, 4);
    let mut r = DMatrix::zeros(b, m);
    for col in 0..m {
        let row = bucket.bucket(col as u64, b as u64) as usize;
        r[(row, col)] = T::from_double(sign.sign(col as u64) as f64);
    }
    r
}

/// Per column: `s` distinct rows by partial Fisher-Yates over [b], then `s`
/// independent signs, each entry ±1/√s.
fn sparse_i_matrix<T: Scalar, R: Rng>(rng: &mut R, b: usize, m: usize, s: usize) -> DMatrix<T> {
    let scale = (s as f64).recip().sqrt();
    let mut r = DMatrix::zeros(b, m);
    let mut slots: Vec<usize> = (0..b).collect();
    for col in 0..m {
        for i in 0..b {
            slots[i] = i;
        }
        for j in 0..s {
            let k = rng.gen_range(j..b);
            slots.swap(j, k);
        }
        for &row in slots.iter().take(s) {
            let sign = if rng.gen::<bool>() { scale } else { -scale };
            r[(row, col)] = T::from_double(sign);
        }
    }
    r
}

/// Rows split into `s` bands of height b/s; band j of column i gets the
/// single entry σ(i,j)/√s at offset h(i,j), with h 2-wise and σ 4-wise on
/// the pair key i·s + j.
fn sparse_ii_matrix<T: Scalar, R: Rng>(rng: &mut R, b: usize, m: usize, s: usize) -> DMatrix<T> {
    let band = (b / s) as u64;
    let bucket = PolyHash::sample(rng, 2);
    let sign = PolyHash::sample(rng, 4);
    let scale = (s as f64).recip().sqrt();
    let mut r = DMatrix::zeros(b, m);
    for col in 0..m {
        for j in 0..s {
            let key = (col * s + j) as u64;
            let row = j as u64 * band + bucket.bucket(key, band);
            r[(row as usize, col)] = T::from_double(sign.sign(key) as f64 * scale);
        }
    }
    r
}
