//! `sketch-bench`: Monte Carlo audit of every sketch family at one shape.
//! Over fresh seeds, the de-sketched mean must track the probe vector
//! componentwise within four standard errors, and the mean round-trip
//! energy must stay under (1 + alpha) times the probe's energy with a
//! five-standard-error allowance.

use gradchain_core::seed::{derive_seed, derive_seed2, rng_from, uniform_pm1};
use gradchain_core::sketch::{SketchKind, SketchOperator};
use nalgebra::DVector;

use crate::{fmt_f64, CliError};

/// The kinds under audit. Sparse fill is 2 when the row count allows even
/// bands, else 1; banded embeddings need the fill to divide the rows.
pub fn kinds_for(b: usize) -> Vec<SketchKind> {
    let s = if b >= 2 && b % 2 == 0 { 2 } else { 1 };
    vec![
        SketchKind::Gaussian,
        SketchKind::Srht,
        SketchKind::Ams,
        SketchKind::CountSketch,
        SketchKind::SparseEmbeddingI { s },
        SketchKind::SparseEmbeddingII { s },
    ]
}

pub fn kind_label(kind: SketchKind) -> String {
    match kind {
        SketchKind::Gaussian => "gaussian".into(),
        SketchKind::Srht => "srht".into(),
        SketchKind::Ams => "ams".into(),
        SketchKind::CountSketch => "count-sketch".into(),
        SketchKind::SparseEmbeddingI { s } => format!("sparse-embedding-i(s={s})"),
        SketchKind::SparseEmbeddingII { s } => format!("sparse-embedding-ii(s={s})"),
    }
}

#[derive(Clone, Debug)]
pub struct KindRow {
    pub label: String,
    pub alpha: f64,
    /// Worst componentwise |mean - probe| over its 4-standard-error
    /// allowance; at most 1 when the kind is unbiased at this sample size.
    pub bias_ratio: f64,
    pub energy_mean: f64,
    pub energy_cap: f64,
    pub unbiased: bool,
    pub bounded: bool,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub dim: usize,
    pub b: usize,
    pub draws: usize,
    pub probe_norm_sq: f64,
    pub rows: Vec<KindRow>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.unbiased && r.bounded)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "sketch-bench: dim {}, b {}, draws {}, probe energy {}\n",
            self.dim,
            self.b,
            self.draws,
            fmt_f64(self.probe_norm_sq)
        );
        for r in &self.rows {
            out.push_str(&format!(
                "  {:<24} alpha {} bias_ratio {} energy {} cap {} {}\n",
                r.label,
                fmt_f64(r.alpha),
                fmt_f64(r.bias_ratio),
                fmt_f64(r.energy_mean),
                fmt_f64(r.energy_cap),
                if r.unbiased && r.bounded {
                    "ok"
                } else {
                    "VIOLATED"
                }
            ));
        }
        out.push_str(&format!(
            "sketch-bench: {}\n",
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

pub fn run(dim: usize, b: usize, draws: usize, seed: u64) -> Result<BenchReport, CliError> {
    if dim == 0 || b == 0 {
        return Err(CliError::BadArgs("dim and b must be at least 1".into()));
    }
    if b > dim {
        return Err(CliError::BadArgs(format!("b {b} exceeds dim {dim}")));
    }
    if draws < 2 {
        return Err(CliError::BadArgs("need at least 2 draws".into()));
    }

    let mut rng = rng_from(derive_seed(seed, 0xBE01));
    let h = DVector::from_fn(dim, |_, _| uniform_pm1::<f64, _>(&mut rng) * 2.0);
    let op_base = derive_seed(seed, 0xBE02);

    let mut rows = Vec::new();
    for (k, kind) in kinds_for(b).into_iter().enumerate() {
        let mut sum = DVector::<f64>::zeros(dim);
        let mut sumsq = DVector::<f64>::zeros(dim);
        let mut e_sum = 0.0;
        let mut e_sumsq = 0.0;
        let mut alpha = 0.0;
        for t in 0..draws {
            let op = SketchOperator::<f64>::new(
                kind,
                b,
                dim,
                derive_seed2(op_base, k as u64, t as u64),
            )?;
            alpha = op.alpha();
            let back = op.roundtrip(&h)?;
            sum += &back;
            sumsq += back.component_mul(&back);
            let e = back.norm_squared();
            e_sum += e;
            e_sumsq += e * e;
        }

        let n = draws as f64;
        let mut bias_ratio: f64 = 0.0;
        for i in 0..dim {
            let mean = sum[i] / n;
            let var = (sumsq[i] / n - mean * mean).max(0.0);
            let se = (var / n).sqrt();
            bias_ratio = bias_ratio.max((mean - h[i]).abs() / (4.0 * se + 1e-12));
        }
        let energy_mean = e_sum / n;
        let e_var = (e_sumsq / n - energy_mean * energy_mean).max(0.0);
        let rel_se = (e_var / n).sqrt() / energy_mean.max(1e-300);
        let energy_cap = (1.0 + alpha) * h.norm_squared() * (1.0 + 5.0 * rel_se);

        rows.push(KindRow {
            label: kind_label(kind),
            alpha,
            bias_ratio,
            energy_mean,
            energy_cap,
            unbiased: bias_ratio <= 1.0,
            bounded: energy_mean <= energy_cap,
        });
    }

    Ok(BenchReport {
        dim,
        b,
        draws,
        probe_norm_sq: h.norm_squared(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_audit_passes_all_kinds() {
        let report = run(8, 4, 1500, 7).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(report.passed(), "{}", report.render());
        assert!(report.render().contains("sketch-bench: PASS"));
    }

    #[test]
    fn odd_row_counts_fall_back_to_unit_fill() {
        let kinds = kinds_for(3);
        assert!(kinds.contains(&SketchKind::SparseEmbeddingI { s: 1 }));
        assert!(kinds.contains(&SketchKind::SparseEmbeddingII { s: 1 }));
    }

    #[test]
    fn shape_guards_reject_degenerate_requests() {
        assert!(matches!(run(0, 1, 10, 1), Err(CliError::BadArgs(_))));
        assert!(matches!(run(4, 5, 10, 1), Err(CliError::BadArgs(_))));
        assert!(matches!(run(4, 2, 1, 1), Err(CliError::BadArgs(_))));
    }
}
