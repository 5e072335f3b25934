//! `gen`: write a seeded instance file and report its convexity
//! certificate.

use std::path::{Path, PathBuf};

use gradchain_core::attention::{
    min_singular_value, strong_convexity_certificate, AttentionError, MAX_DENSE_DIM,
};
use gradchain_core::Instance;

use crate::instance::{CertStatus, InstanceFile, InstanceMeta};
use crate::CliError;

pub fn checked_generate(n: usize, d: usize, seed: u64) -> Result<Instance, CliError> {
    if n == 0 || d == 0 {
        return Err(CliError::BadArgs("n and d must be at least 1".into()));
    }
    if d * d > MAX_DENSE_DIM {
        return Err(CliError::BadArgs(format!(
            "d = {d} gives dense dimension d^2 = {} past the supported {MAX_DENSE_DIM}",
            d * d
        )));
    }
    Ok(Instance::generate(n, d, seed))
}

/// Certificate outcome for a generated instance. With the generator's
/// w = 3, any mu up to 5 sigma_min^2 clears the threshold; reporting
/// 4 sigma_min^2 leaves margin.
pub fn certificate_meta(inst: &Instance, seed: u64) -> Result<InstanceMeta, CliError> {
    let (n, d) = (inst.n(), inst.d());
    let (mu, certificate) = if n >= d * d {
        match min_singular_value(inst) {
            Ok(smin) => {
                let mu = 4.0 * smin * smin;
                let holds = strong_convexity_certificate(inst, mu)?;
                assert!(holds, "w = 3 certifies mu = 4 sigma_min^2 by construction");
                (Some(mu), CertStatus::Passed)
            }
            Err(AttentionError::CertificateInapplicable) => (None, CertStatus::Inapplicable),
            Err(e) => return Err(e.into()),
        }
    } else {
        (None, CertStatus::Inapplicable)
    };
    Ok(InstanceMeta {
        n,
        d,
        seed,
        mu,
        certificate,
    })
}

pub struct GenReport {
    pub file: InstanceFile,
    pub out: PathBuf,
}

impl GenReport {
    pub fn render(&self) -> String {
        format!("{}\n", self.file.metadata_json())
    }
}

pub fn run(n: usize, d: usize, seed: u64, out: &Path) -> Result<GenReport, CliError> {
    let inst = checked_generate(n, d, seed)?;
    let metadata = certificate_meta(&inst, seed)?;
    let file = InstanceFile::from_instance(&inst, metadata);
    file.save(out)?;
    Ok(GenReport {
        file,
        out: out.to_path_buf(),
    })
}
