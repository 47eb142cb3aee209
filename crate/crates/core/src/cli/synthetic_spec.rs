use sha2::{Digest, Sha256};

use super::{parse_list, CliError};
use crate::estimators::{SyntheticKind, SyntheticPosterior};

/// `<kind>:<p1,p2,..>` where kind is `bernoulli`, `point-mass` or `beta-loss`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPosteriorSpec {
    pub kind: SyntheticKind,
    pub means: Vec<f64>,
}

impl SyntheticPosteriorSpec {
    /// Parse a spec string. A single mean is replicated `m` times; a longer
    /// list must have exactly `m` entries when `m` is given.
    pub fn parse(text: &str, m: Option<usize>, concentration: f64) -> Result<Self, CliError> {
        let (kind, values) = text.split_once(':').ok_or_else(|| {
            CliError::Validation(format!("synthetic spec `{text}` must look like <kind>:<means>"))
        })?;
        let kind = match kind.trim() {
            "bernoulli" | "bernoulli-per-example" => SyntheticKind::Bernoulli,
            "point-mass" => SyntheticKind::PointMass,
            "beta" | "beta-loss" => SyntheticKind::BetaLoss { concentration },
            other => {
                return Err(CliError::Validation(format!("unknown synthetic kind `{other}`")))
            }
        };
        let mut means = parse_list(values, "synthetic means")?;
        match (m, means.len()) {
            (Some(0), _) => return Err(CliError::Validation("--m must be at least 1".into())),
            (Some(m), 1) => means = vec![means[0]; m],
            (Some(m), len) if m != len => {
                return Err(CliError::Validation(format!(
                    "--m {m} does not match {len} synthetic means"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, means })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn posterior(&self, seed: u64) -> Result<SyntheticPosterior, CliError> {
        Ok(SyntheticPosterior::new(self.kind, self.means.clone(), seed)?)
    }

    /// Digest of the normalized spec, recorded as data provenance.
    pub fn digest(&self) -> String {
        let kind = match self.kind {
            SyntheticKind::Bernoulli => "bernoulli".to_string(),
            SyntheticKind::PointMass => "point-mass".to_string(),
            SyntheticKind::BetaLoss { concentration } => format!("beta-loss@{concentration:e}"),
        };
        let means: Vec<String> = self.means.iter().map(|p| format!("{p:e}")).collect();
        let text = format!("{kind}:{}", means.join(","));
        format!("synthetic:{}", hex::encode(Sha256::digest(text.as_bytes())))
    }
}
