//! Central finite differences: loss derivatives computed without the
//! analytic formulas, used by the gradient checker and as a test oracle.

use nalgebra::{DMatrix, DVector};

use super::instance::{AttentionInstance, WeightVector};
use super::ops::{gradient, loss};
use super::AttentionError;
use crate::scalar::Scalar;

fn check_step<T: Scalar>(step: T) -> Result<(), AttentionError> {
    if !(step > T::zero()) || !step.finite() {
        return Err(AttentionError::BadStep);
    }
    Ok(())
}

pub fn fd_gradient<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
    step: T,
) -> Result<DVector<T>, AttentionError> {
    check_step(step)?;
    inst.check_x(x)?;
    let dim = x.dim();
    let two = T::from_double(2.0);
    let mut g = DVector::zeros(dim);
    for i in 0..dim {
        let mut xp = x.as_vector().clone();
        xp[i] += step;
        let mut xm = x.as_vector().clone();
        xm[i] -= step;
        let lp = loss(inst, &WeightVector::new_unchecked(xp))?.total;
        let lm = loss(inst, &WeightVector::new_unchecked(xm))?.total;
        g[i] = (lp - lm) / (two * step);
    }
    Ok(g)
}

/// Columns are central differences of the analytic gradient; the result is
/// symmetrized the same way the analytic Hessian is.
pub fn fd_hessian<T: Scalar>(
    inst: &AttentionInstance<T>,
    x: &WeightVector<T>,
    step: T,
) -> Result<DMatrix<T>, AttentionError> {
    check_step(step)?;
    inst.check_x(x)?;
    let dim = x.dim();
    let two = T::from_double(2.0);
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let mut xp = x.as_vector().clone();
        xp[i] += step;
        let mut xm = x.as_vector().clone();
        xm[i] -= step;
        let gp = gradient(inst, &WeightVector::new_unchecked(xp))?;
        let gm = gradient(inst, &WeightVector::new_unchecked(xm))?;
        h.set_column(i, &((gp - gm).unscale(two * step)));
    }
    let ht = h.transpose();
    Ok((h + ht).scale(T::from_double(0.5)))
}
