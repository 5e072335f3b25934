//! On-disk instance format: a metadata block recording the generator
//! inputs and certificate outcome, plus row-major matrix data. Files are
//! written by a fixed-layout formatter so rerunning `gen` with the same
//! arguments is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use gradchain_core::{Instance, Real};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{fmt_f64, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertStatus {
    Passed,
    Inapplicable,
}

impl CertStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CertStatus::Passed => "passed",
            CertStatus::Inapplicable => "inapplicable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Strong-convexity modulus the certificate was checked against. Absent
    /// when the certificate does not apply (n < d^2, or a rank-deficient
    /// design).
    pub mu: Option<f64>,
    pub certificate: CertStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub metadata: InstanceMeta,
    pub a1: Vec<Vec<f64>>,
    pub a2: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance, metadata: InstanceMeta) -> Self {
        let rows = |m: &DMatrix<Real>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        };
        InstanceFile {
            metadata,
            a1: rows(inst.a1()),
            a2: rows(inst.a2()),
            b: inst.b_target().iter().copied().collect(),
            w: inst.w().iter().copied().collect(),
        }
    }

    pub fn to_instance(&self) -> Result<Instance, CliError> {
        let (n, d) = (self.metadata.n, self.metadata.d);
        let build = |name: &str, rows: &[Vec<f64>]| -> Result<DMatrix<f64>, CliError> {
            if rows.len() != n || rows.iter().any(|r| r.len() != d) {
                return Err(CliError::BadInstanceFile(format!(
                    "{name} must be {n} rows of {d} entries"
                )));
            }
            Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
        };
        let a1 = build("a1", &self.a1)?;
        let a2 = build("a2", &self.a2)?;
        Instance::new(
            a1,
            a2,
            DVector::from_vec(self.b.clone()),
            DVector::from_vec(self.w.clone()),
        )
        .map_err(CliError::from)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Fixed-layout JSON: one matrix row per line, every double at 17
    /// significant digits.
    pub fn to_json(&self) -> String {
        fn row(r: &[f64]) -> String {
            let cells: Vec<String> = r.iter().map(|v| fmt_f64(*v)).collect();
            format!("[{}]", cells.join(", "))
        }
        fn matrix(out: &mut String, name: &str, rows: &[Vec<f64>]) {
            writeln!(out, "  \"{name}\": [").unwrap();
            for (i, r) in rows.iter().enumerate() {
                let comma = if i + 1 < rows.len() { "," } else { "" };
                writeln!(out, "    {}{comma}", row(r)).unwrap();
            }
            out.push_str("  ],\n");
        }

        let mut out = String::from("{\n");
        writeln!(out, "  \"metadata\": {},", self.metadata_json()).unwrap();
        matrix(&mut out, "a1", &self.a1);
        matrix(&mut out, "a2", &self.a2);
        writeln!(out, "  \"b\": {},", row(&self.b)).unwrap();
        writeln!(out, "  \"w\": {}", row(&self.w)).unwrap();
        out.push_str("}\n");
        out
    }

    /// One-line metadata object, also what `gen` echoes to stdout.
    pub fn metadata_json(&self) -> String {
        let m = &self.metadata;
        let mu = match m.mu {
            Some(v) => fmt_f64(v),
            None => "null".into(),
        };
        format!(
            "{{\"n\": {}, \"d\": {}, \"seed\": {}, \"mu\": {}, \"certificate\": \"{}\"}}",
            m.n,
            m.d,
            m.seed,
            mu,
            m.certificate.as_str()
        )
    }
}
