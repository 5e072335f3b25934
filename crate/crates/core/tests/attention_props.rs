//! Seeded property sweeps for the attention loss stack: softmax
//! normalization, the vectorization and norm equivalences, derivative
//! agreement with finite differences, and the curvature guarantees.

use gradchain_core::attention::{
    fd_gradient, fd_hessian, gradient, hessian, min_singular_value, softmax_block,
    stacked_matrix, strong_convexity_certificate, vec_identity_check, AttentionInstance,
    WeightVector,
};
use gradchain_core::seed::{ball_point, derive_seed2, rng_from};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

type Inst = AttentionInstance<f64>;

fn random_x(inst: &Inst, radius: f64, seed: u64) -> WeightVector<f64> {
    let mut rng = rng_from(seed);
    WeightVector::new(ball_point(&mut rng, inst.dim(), radius)).unwrap()
}

fn eig_extremes(h: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(h.clone());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[test]
fn softmax_blocks_normalize() {
    for (n, d) in [(1, 1), (3, 2), (4, 3), (6, 2)] {
        for seed in 0..5u64 {
            let inst = Inst::generate(n, d, derive_seed2(1, seed, 0));
            let x = random_x(&inst, 1.0, derive_seed2(1, seed, 1));
            for j in 0..n {
                let block = softmax_block(&inst, &x, j).unwrap();
                let total: f64 = block.f.iter().sum();
                assert!((total - 1.0).abs() <= 1e-12, "n={n} d={d} block {j}");
                for &p in block.f.iter() {
                    assert!(p > 0.0 && p <= 1.0);
                }
            }
        }
    }
}

#[test]
fn vectorization_identity_holds() {
    for (n, d) in [(2, 2), (3, 3), (4, 2), (5, 4)] {
        for seed in 0..5u64 {
            let inst = Inst::generate(n, d, derive_seed2(2, seed, 0));
            let x = random_x(&inst, 2.0, derive_seed2(2, seed, 1));
            assert!(vec_identity_check(&inst, &x).unwrap(), "n={n} d={d}");
        }
    }
}

/// Matrix-form residuals match the stacked vector form: plain, entrywise
/// exponential, and row-normalized exponential.
#[test]
fn norm_equivalences_match() {
    for (n, d) in [(2, 1), (2, 2), (3, 2), (4, 2), (4, 1)] {
        for seed in 0..4u64 {
            let inst = Inst::generate(n, d, derive_seed2(3, seed, 0));
            let x = random_x(&inst, 0.8, derive_seed2(3, seed, 1));

            let xm = DMatrix::from_fn(d, d, |i, j| x.as_vector()[i * d + j]);
            let m = inst.a1() * &xm * inst.a2().transpose();
            let bm = DMatrix::from_fn(n, n, |j, i| inst.b_target()[j * n + i]);

            let ax = stacked_matrix(&inst) * x.as_vector();
            let tol = |rhs: f64| 1e-10 * (1.0 + rhs.abs());

            let lhs_plain = (&m - &bm).norm();
            let rhs_plain = (&ax - inst.b_target()).norm();
            assert!(
                (lhs_plain - rhs_plain).abs() <= tol(rhs_plain),
                "plain n={n} d={d}"
            );

            let me = m.map(f64::exp);
            let lhs_exp = (&me - &bm).norm();
            let rhs_exp = (ax.map(f64::exp) - inst.b_target()).norm();
            assert!((lhs_exp - rhs_exp).abs() <= tol(rhs_exp), "exp n={n} d={d}");

            let mut normalized = me.clone();
            for j in 0..n {
                let row_sum: f64 = me.row(j).iter().sum();
                for i in 0..n {
                    normalized[(j, i)] /= row_sum;
                }
            }
            let lhs_soft = (&normalized - &bm).norm();
            let mut stacked_f = DVector::zeros(n * n);
            for j in 0..n {
                let f = softmax_block(&inst, &x, j).unwrap().f;
                stacked_f.rows_mut(j * n, n).copy_from(&f);
            }
            let rhs_soft = (stacked_f - inst.b_target()).norm();
            assert!(
                (lhs_soft - rhs_soft).abs() <= tol(rhs_soft),
                "normalized n={n} d={d}"
            );
        }
    }
}

#[test]
fn gradient_agrees_with_finite_differences() {
    let shapes = [(4, 3), (3, 2), (5, 2), (2, 1), (6, 2)];
    let mut pairs = 0;
    for (n, d) in shapes {
        for seed in 0..4u64 {
            let inst = Inst::generate(n, d, derive_seed2(4, seed, n as u64));
            let x = random_x(&inst, 1.0, derive_seed2(4, seed, d as u64 + 100));
            let g = gradient(&inst, &x).unwrap();
            let fd = fd_gradient(&inst, &x, 1e-5).unwrap();
            let rel = (&g - &fd).norm() / (1.0 + g.norm());
            assert!(rel <= 1e-6, "n={n} d={d} seed={seed}: rel {rel}");
            pairs += 1;
        }
    }
    assert!(pairs >= 20);
}

#[test]
fn hessian_agrees_with_finite_differences() {
    for (n, d) in [(3, 2), (4, 2), (2, 1), (4, 3)] {
        for seed in 0..2u64 {
            let inst = Inst::generate(n, d, derive_seed2(5, seed, n as u64));
            let x = random_x(&inst, 1.0, derive_seed2(5, seed, d as u64 + 100));
            let h = hessian(&inst, &x).unwrap();
            let fd = fd_hessian(&inst, &x, 1e-5).unwrap();
            let rel = (&h - &fd).norm() / (1.0 + h.norm());
            assert!(rel <= 1e-5, "n={n} d={d} seed={seed}: rel {rel}");
            assert_eq!(h, h.transpose(), "asymmetric hessian n={n} d={d}");
        }
    }
}

/// Certified instances really are strongly convex: the realized curvature
/// clears mu at random points, not just in the algebra.
#[test]
fn certificate_lower_bounds_realized_curvature() {
    for (n, d) in [(4, 2), (6, 2), (9, 3)] {
        for seed in 0..3u64 {
            let inst = Inst::generate(n, d, derive_seed2(6, seed, n as u64));
            let smin = min_singular_value(&inst).unwrap();
            let mu = 4.0 * smin * smin;
            assert!(
                strong_convexity_certificate(&inst, mu).unwrap(),
                "certificate rejected n={n} d={d} seed={seed}"
            );
            for k in 0..10u64 {
                let x = random_x(&inst, 1.0, derive_seed2(6, seed * 31 + k, 7));
                let (lo, _) = eig_extremes(&hessian(&inst, &x).unwrap());
                assert!(
                    lo >= mu - 1e-8,
                    "n={n} d={d} seed={seed} x#{k}: lambda_min {lo} < mu {mu}"
                );
            }
        }
    }
}

/// Largest curvature stays uniformly bounded on the sampling ball; its
/// maximum is the smoothness estimate downstream code relies on.
#[test]
fn max_curvature_bounded_on_ball() {
    let inst = Inst::generate(4, 3, 7);
    let mut l_est = 0.0f64;
    for k in 0..50u64 {
        let x = random_x(&inst, 1.0, derive_seed2(7, k, 0));
        let (_, hi) = eig_extremes(&hessian(&inst, &x).unwrap());
        assert!(hi.is_finite() && hi > 0.0);
        l_est = l_est.max(hi);
    }
    assert!(l_est < 1e4, "curvature estimate {l_est} implausibly large");
}
