//! Numerical smoothness/convexity constants and the convergence bound.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::FedError;
use crate::attention::{gradient, hessian, loss, AttentionInstance, WeightVector};
use crate::scalar::Scalar;
use crate::seed::{ball_point, rng_from};

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_CAP: usize = 200;

/// Curvature range sampled on a ball, plus the optimizer found by Newton.
#[derive(Clone, Debug)]
pub struct Constants<T: Scalar> {
    pub l_est: T,
    pub mu_est: T,
    pub x_star: WeightVector<T>,
    pub f_star: T,
}

/// The step-size rule eta = 1/(8(1+alpha)·L·K).
pub fn choose_eta<T: Scalar>(l_est: T, alpha: T, local_steps: usize) -> Result<T, FedError> {
    if local_steps == 0 {
        return Err(FedError::BadConfig);
    }
    if !(l_est > T::zero()) || !l_est.finite() {
        return Err(FedError::BadSmoothness);
    }
    if !(alpha >= T::zero()) || !alpha.finite() {
        return Err(FedError::BadAlpha);
    }
    let eight = T::from_double(8.0);
    let k = T::from_double(local_steps as f64);
    Ok(T::one() / (eight * (T::one() + alpha) * l_est * k))
}

/// Expected suboptimality after T rounds: (L/2)·D0·exp(-mu·eta·T).
pub fn convergence_bound<T: Scalar>(l_est: T, mu: T, eta: T, rounds: usize, init_sq_dist: T) -> T {
    let t = T::from_double(rounds as f64);
    l_est / T::from_double(2.0) * init_sq_dist * (-mu * eta * t).exp()
}

fn eig_range<T: Scalar>(h: &DMatrix<T>) -> (T, T) {
    let eig = SymmetricEigen::new(h.clone());
    let mut lo = T::from_double(f64::INFINITY);
    let mut hi = T::from_double(f64::NEG_INFINITY);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Solve H p = g, nudging the diagonal upward until the factorization
/// succeeds. Falls back to the raw gradient if the matrix resists even
/// heavy regularization.
fn newton_direction<T: Scalar>(h: &DMatrix<T>, g: &DVector<T>) -> DVector<T> {
    if let Some(chol) = h.clone().cholesky() {
        return chol.solve(g);
    }
    let dim = h.nrows();
    let mut ridge = T::from_double(1e-10);
    for _ in 0..16 {
        let damped = h + DMatrix::identity(dim, dim) * ridge;
        if let Some(chol) = damped.cholesky() {
            return chol.solve(g);
        }
        ridge *= T::from_double(10.0);
    }
    g.clone()
}

/// Samples curvature on ball(radius) and polishes the optimum with damped
/// Newton until the gradient norm drops to 1e-10.
pub fn estimate_constants<T: Scalar>(
    inst: &AttentionInstance<T>,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<Constants<T>, FedError> {
    if samples == 0 {
        return Err(FedError::NoSamples);
    }

    let mut rng = rng_from(seed);
    let mut l_est = T::from_double(f64::NEG_INFINITY);
    let mut mu_est = T::from_double(f64::INFINITY);
    for _ in 0..samples {
        let x = WeightVector::new_unchecked(ball_point(&mut rng, inst.dim(), radius));
        let (lo, hi) = eig_range(&hessian(inst, &x)?);
        mu_est = mu_est.min(lo);
        l_est = l_est.max(hi);
    }

    let mut x = DVector::zeros(inst.dim());
    let tol = T::from_double(NEWTON_TOL);
    let mut converged = false;
    for _ in 0..NEWTON_CAP {
        let xw = WeightVector::new_unchecked(x.clone());
        let g = gradient(inst, &xw)?;
        let gn = g.norm();
        if gn <= tol {
            converged = true;
            break;
        }
        let h = hessian(inst, &xw)?;
        let mut p = newton_direction(&h, &g);
        let mut slope = g.dot(&p);
        if !(slope > T::zero()) {
            p = g.clone();
            slope = g.norm_squared();
        }
        if gn <= T::from_double(1e-6) {
            // Inside the quadratic basin sufficient-decrease tests drown in
            // rounding noise; the undamped step converges quadratically.
            x -= p;
            continue;
        }
        let fx = loss(inst, &xw)?.total;
        let mut step = T::one();
        loop {
            let trial = &x - &p * step;
            let ft = loss(inst, &WeightVector::new_unchecked(trial.clone()))?.total;
            if ft <= fx - T::from_double(1e-4) * step * slope {
                x = trial;
                break;
            }
            step *= T::from_double(0.5);
            if step < T::from_double(1e-12) {
                return Err(FedError::NewtonStalled {
                    iterations: NEWTON_CAP,
                    grad_norm: gn.to_double(),
                });
            }
        }
    }
    if !converged {
        // The cap loop can exit with the last iterate just under tolerance.
        let xw = WeightVector::new_unchecked(x.clone());
        let gn = gradient(inst, &xw)?.norm();
        if gn > tol {
            return Err(FedError::NewtonStalled {
                iterations: NEWTON_CAP,
                grad_norm: gn.to_double(),
            });
        }
    }

    let x_star = WeightVector::new_unchecked(x);
    let f_star = loss(inst, &x_star)?.total;
    Ok(Constants {
        l_est,
        mu_est,
        x_star,
        f_star,
    })
}
