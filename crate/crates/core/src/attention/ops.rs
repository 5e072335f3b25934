//! Operations on instances: design blocks, softmax, loss, derivatives, and
//! the convexity certificate.

use nalgebra::{DMatrix, DVector};

use super::instance::{AttentionInstance, WeightVector};
use super::AttentionError;
use crate::scalar::Scalar;

/// Dense-dimension guard for Hessian assembly.
pub const MAX_DENSE_DIM: usize = 64;

/// Block j of the design matrix: an n x d^2 matrix whose row i is
/// A1[j,:] (x) A2[i,:], i.e. entry (i, p*d + q) = a1[j,p] * a2[i,q].
pub fn kron_block<T: Scalar>(
    inst: &AttentionInstance<T>,
    block: usize,
) -> Result<DMatrix<T>, AttentionError> {
    inst.check_block(block)?;
    let (n, d) = (inst.n(), inst.d());
    let (a1, a2) = (inst.a1(), inst.a2());
    Ok(DMatrix::from_fn(n, d * d, |i, col| {
        a1[(block, col / d)] * a2[(i, col % d)]
    }))
}

/// All n blocks stacked into an n^2 x d^2 matrix; block j occupies rows
/// j*n .. (j+1)*n.
pub fn stacked_matrix<T: Scalar>(inst: &AttentionInstance<T>) -> DMatrix<T> {
    let (n, d) = (inst.n(), inst.d());
    let (a1, a2) = (inst.a1(), inst.a2());
    DMatrix::from_fn(n * n, d * d, |row, col| {
        a1[(row / n, col / d)] * a2[(row % n, col % d)]
    })
}

/// Row-major reshape of a model vector into its d x d matrix.
pub fn weight_matrix<T: Scalar>(
    x: &WeightVector<T>,
    d: usize,
) -> Result<DMatrix<T>, AttentionError> {
    if x.dim() != d * d {
        return Err(AttentionError::DimensionMismatch {
            got: x.dim(),
            want: d * d,
        });
    }
    let v = x.as_vector();
    Ok(DMatrix::from_fn(d, d, |i, j| v[i * d + j]))
}

fn inf_norm<T: Scalar>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, &e| acc.max(e.abs()))
}

/// Self-test of the vectorization identity: vec(A1 * mat(x) * A2^T) must
/// match the stacked design matrix applied to x. The two sides are computed
/// by independent code paths.
pub fn vec_identity_check<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
) -> Result<bool, AttentionError> {
    inst.check_x(x)?;
    let (n, d) = (inst.n(), inst.d());
    let xm = weight_matrix(x, d)?;
    let m = inst.a1() * xm * inst.a2().transpose();
    let lhs = DVector::from_fn(n * n, |row, _| m[(row / n, row % n)]);
    let rhs = stacked_matrix(inst) * x.as_vector();
    let tol = T::from_double(1e-10) * (T::one() + inf_norm(&rhs));
    Ok(inf_norm(&(lhs - &rhs)) <= tol)
}

/// Softmax evaluation of one block. `shift`/`sum_shifted` store the
/// normalizer in overflow-safe form: alpha = exp(shift) * sum_shifted.
#[derive(Clone, Debug)]
pub struct SoftmaxBlock<T: Scalar> {
    pub logits: DVector<T>,
    pub f: DVector<T>,
    pub shift: T,
    pub sum_shifted: T,
}

impl<T: Scalar> SoftmaxBlock<T> {
    pub fn alpha(&self) -> T {
        self.shift.exp() * self.sum_shifted
    }

    pub fn log_alpha(&self) -> T {
        self.shift + self.sum_shifted.ln()
    }

    /// Raw exponentials of the logits; available only while every logit is
    /// small enough (|logit| <= 500) that exp cannot overflow.
    pub fn raw_u(&self) -> Option<DVector<T>> {
        let cap = T::from_double(500.0);
        if self.logits.iter().all(|l| l.abs() <= cap) {
            Some(self.logits.map(|l| l.exp()))
        } else {
            None
        }
    }
}

fn softmax_of<T: Scalar>(
    a: &DMatrix<T>,
    x: &WeightVector<T>,
    block: usize,
) -> Result<SoftmaxBlock<T>, AttentionError> {
    let logits = a * x.as_vector();
    if logits.iter().any(|l| !l.finite()) {
        return Err(AttentionError::NonFinite { block });
    }
    let shift = logits.iter().fold(logits[0], |m, &l| m.max(l));
    let shifted = logits.map(|l| (l - shift).exp());
    let sum = shifted.sum();
    let f = shifted.unscale(sum);
    Ok(SoftmaxBlock {
        logits,
        f,
        shift,
        sum_shifted: sum,
    })
}

pub fn softmax_block<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
    block: usize,
) -> Result<SoftmaxBlock<T>, AttentionError> {
    inst.check_x(x)?;
    let a = kron_block(inst, block)?;
    softmax_of(&a, x, block)
}

/// Loss value split into its softmax misfit and logit penalty parts.
#[derive(Clone, Debug)]
pub struct LossBreakdown<T: Scalar> {
    pub total: T,
    pub exp_part: T,
    pub reg_part: T,
    pub per_block: DVector<T>,
}

fn block_terms<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
    block: usize,
) -> Result<(T, T), AttentionError> {
    let sb = softmax_block(inst, x, block)?;
    let c = &sb.f - inst.b_block(block)?;
    let wl = inst.w().component_mul(&sb.logits);
    let half = T::from_double(0.5);
    Ok((half * c.norm_squared(), half * wl.norm_squared()))
}

pub fn loss<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
) -> Result<LossBreakdown<T>, AttentionError> {
    inst.check_x(x)?;
    let n = inst.n();
    let mut exp_part = T::zero();
    let mut reg_part = T::zero();
    let mut per_block = DVector::zeros(n);
    for j in 0..n {
        let (e, r) = block_terms(inst, x, j)?;
        exp_part += e;
        reg_part += r;
        per_block[j] = e + r;
    }
    Ok(LossBreakdown {
        total: exp_part + reg_part,
        exp_part,
        reg_part,
        per_block,
    })
}

/// Sum of the per-block losses for a subset of blocks (a client's share).
pub fn loss_blocks<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
    blocks: &[usize],
) -> Result<T, AttentionError> {
    inst.check_x(x)?;
    let mut total = T::zero();
    for &j in blocks {
        let (e, r) = block_terms(inst, x, j)?;
        total += e + r;
    }
    Ok(total)
}

/// Gradient restricted to a subset of blocks. Per block with softmax f,
/// misfit c = f - b and logits l, the contribution is
/// A^T (c o f - <c,f> f + w^2 o l).
pub fn gradient_blocks<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
    blocks: &[usize],
) -> Result<DVector<T>, AttentionError> {
    inst.check_x(x)?;
    let mut g = DVector::zeros(inst.dim());
    let wsq = inst.w().map(|v| v * v);
    for &j in blocks {
        let a = kron_block(inst, j)?;
        let sb = softmax_of(&a, x, j)?;
        let c = &sb.f - inst.b_block(j)?;
        let cf = c.dot(&sb.f);
        let coeff = c.component_mul(&sb.f) - sb.f.scale(cf) + wsq.component_mul(&sb.logits);
        g += a.tr_mul(&coeff);
    }
    Ok(g)
}

pub fn gradient<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
) -> Result<DVector<T>, AttentionError> {
    let all: Vec<usize> = (0..inst.n()).collect();
    gradient_blocks(inst, x, &all)
}

/// Dense Hessian, assembled block by block. Per block the curvature of the
/// softmax misfit is P^2 + B with P = diag(f) - f f^T and
/// B = 2<c,f> f f^T - <c,f> diag(f) - f (c o f)^T - (c o f) f^T + diag(c o f);
/// the logit penalty adds the constant diag(w^2) inside the same A^T . A
/// sandwich. The result is exactly symmetrized.
pub fn hessian<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
) -> Result<DMatrix<T>, AttentionError> {
    inst.check_x(x)?;
    let dim = inst.dim();
    if dim > MAX_DENSE_DIM {
        return Err(AttentionError::CapacityExceeded {
            dim,
            max: MAX_DENSE_DIM,
        });
    }
    let n = inst.n();
    let wsq = inst.w().map(|v| v * v);
    let two = T::from_double(2.0);
    let mut h = DMatrix::zeros(dim, dim);
    for j in 0..n {
        let a = kron_block(inst, j)?;
        let sb = softmax_of(&a, x, j)?;
        let f = &sb.f;
        let c = f - inst.b_block(j)?;
        let cf = c.dot(f);
        let cfv = c.component_mul(f);
        let p = DMatrix::from_fn(n, n, |r, s| {
            let diag = if r == s { f[r] } else { T::zero() };
            diag - f[r] * f[s]
        });
        let mut m = &p * &p;
        for r in 0..n {
            for s in 0..n {
                let mut v = two * cf * f[r] * f[s] - f[r] * cfv[s] - cfv[r] * f[s];
                if r == s {
                    v += cfv[r] - cf * f[r] + wsq[r];
                }
                m[(r, s)] += v;
            }
        }
        h += a.transpose() * m * &a;
    }
    let ht = h.transpose();
    Ok((h + ht).scale(T::from_double(0.5)))
}

/// Smallest singular value of the stacked design matrix, by SVD. Errors if
/// the matrix is (numerically) rank deficient, which makes the convexity
/// certificate inapplicable.
pub fn min_singular_value<T: Scalar>(inst: &AttentionInstance<T>) -> Result<T, AttentionError> {
    let sv = stacked_matrix(inst).svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |acc, &v| acc.max(v));
    let smin = sv.iter().fold(smax, |acc, &v| acc.min(v));
    if smax <= T::zero() || smin <= smax * T::from_double(1e-10) {
        return Err(AttentionError::CertificateInapplicable);
    }
    Ok(smin)
}

/// Sufficient condition for the loss to be mu-strongly convex:
/// min_i w_i^2 >= 4 + mu / sigma_min^2, with sigma_min taken over the full
/// stacked design matrix. Each individual block has rank at most d (its
/// rows all share the factor A1[j,:]), so only the stacked matrix can be
/// full column rank; the per-block curvature never dips below -4 times the
/// block Gram matrix, which the weight threshold absorbs.
pub fn strong_convexity_certificate<T: Scalar>(
    inst: &AttentionInstance<T>,
    mu: T,
) -> Result<bool, AttentionError> {
    if !(mu > T::zero()) || !mu.finite() {
        return Err(AttentionError::InvalidMu);
    }
    if inst.n() < inst.dim() {
        return Err(AttentionError::CertificateInapplicable);
    }
    let smin = min_singular_value(inst)?;
    let min_wsq = inst
        .w()
        .iter()
        .fold(T::from_double(f64::INFINITY), |acc, &v| acc.min(v * v));
    Ok(min_wsq >= T::from_double(4.0) + mu / (smin * smin))
}
