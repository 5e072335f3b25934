//! `gradcheck`: analytic derivatives against central finite differences,
//! with the worst offender's coordinates in the report.

use std::path::Path;

use gradchain_core::attention::{fd_gradient, fd_hessian, gradient, hessian};
use gradchain_core::seed::{ball_point, derive_seed, rng_from};
use gradchain_core::{Instance, Weights};
use nalgebra::DVector;

use crate::instance::InstanceFile;
use crate::{fmt_f64, rel_err, CliError};

pub const GRAD_TOL: f64 = 1e-6;
pub const HESS_TOL: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-5;
/// What the corruption hook adds to gradient coordinate 0.
pub const CORRUPTION: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub points: usize,
    pub grad_err: f64,
    /// (point, coordinate) of the worst gradient deviation.
    pub grad_worst: (usize, usize),
    pub hess_err: f64,
    /// (point, row, column) of the worst Hessian deviation.
    pub hess_worst: (usize, usize, usize),
    pub symmetric: bool,
}

impl GradcheckReport {
    pub fn grad_ok(&self) -> bool {
        self.grad_err <= GRAD_TOL
    }

    pub fn hess_ok(&self) -> bool {
        self.hess_err <= HESS_TOL && self.symmetric
    }

    pub fn passed(&self) -> bool {
        self.grad_ok() && self.hess_ok()
    }

    pub fn render(&self) -> String {
        let (gp, gi) = self.grad_worst;
        let (hp, hi, hj) = self.hess_worst;
        format!(
            "gradient: max rel err {} at point {gp} coordinate {gi} (tol {})\n\
             hessian: max rel err {} at point {hp} entry ({hi}, {hj}) (tol {})\n\
             hessian symmetry: {}\n\
             gradcheck: {}\n",
            fmt_f64(self.grad_err),
            fmt_f64(GRAD_TOL),
            fmt_f64(self.hess_err),
            fmt_f64(HESS_TOL),
            if self.symmetric { "exact" } else { "BROKEN" },
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Point 0 is always the origin; the rest are drawn from the unit ball.
pub fn run(
    inst: &Instance,
    seed: u64,
    points: usize,
    corrupt: bool,
) -> Result<GradcheckReport, CliError> {
    let dim = inst.dim();
    let mut rng = rng_from(derive_seed(seed, 0x6C));
    let mut report = GradcheckReport {
        points: points.max(1),
        grad_err: 0.0,
        grad_worst: (0, 0),
        hess_err: 0.0,
        hess_worst: (0, 0, 0),
        symmetric: true,
    };
    for p in 0..report.points {
        let x = if p == 0 {
            DVector::zeros(dim)
        } else {
            ball_point(&mut rng, dim, 1.0)
        };
        let x = Weights::new(x).expect("sample points are finite");

        let mut g = gradient(inst, &x)?;
        if corrupt {
            g[0] += CORRUPTION;
        }
        let fd_g = fd_gradient(inst, &x, FD_STEP)?;
        for i in 0..dim {
            let e = rel_err(g[i], fd_g[i]);
            if e > report.grad_err {
                report.grad_err = e;
                report.grad_worst = (p, i);
            }
        }

        let h = hessian(inst, &x)?;
        let fd_h = fd_hessian(inst, &x, FD_STEP)?;
        for i in 0..dim {
            for j in 0..dim {
                if h[(i, j)].to_bits() != h[(j, i)].to_bits() {
                    report.symmetric = false;
                }
                let e = rel_err(h[(i, j)], fd_h[(i, j)]);
                if e > report.hess_err {
                    report.hess_err = e;
                    report.hess_worst = (p, i, j);
                }
            }
        }
    }
    Ok(report)
}

pub fn run_file(
    path: &Path,
    seed: u64,
    points: usize,
    corrupt: bool,
) -> Result<GradcheckReport, CliError> {
    let inst = InstanceFile::load(path)?.to_instance()?;
    run(&inst, seed, points, corrupt)
}
