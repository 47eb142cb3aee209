use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::error::{Error, Result};
use crate::kl::{kl_inverse_upper_with, InversionConfig, Probability, SlackBudget};

/// Schema version written into every certificate.
pub const CERTIFICATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Classic,
    Fresh,
    Testset,
    Subsampled,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Classic => "classic",
            Method::Fresh => "fresh",
            Method::Testset => "testset",
            Method::Subsampled => "subsampled",
        }
    }
}

/// Audit trail for a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_digest: Option<String>,
    pub loss_evaluations: u64,
    /// Caller attestation that test examples are held out (testset only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_seed: Option<u64>,
    pub inversion_tol: f64,
    pub roundtrip_tol: f64,
}

/// A high-probability upper bound on a Gibbs risk.
///
/// `bound = kl_inverse_upper(empirical_mean, slack)` with
/// `slack = log(1/delta) / summands`; both are recomputable from the stored
/// fields by [`recompute_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub method: Method,
    pub empirical_mean: f64,
    /// Number of independent summands `T`.
    pub summands: u64,
    pub delta: f64,
    pub slack: f64,
    pub bound: f64,
    /// Passes over the data; absent for the sub-sampled estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_passes: Option<u64>,
    pub m: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    pub provenance: Provenance,
}

impl Certificate {
    /// Canonical JSON: sorted keys, 17 significant digits for floats.
    pub fn to_canonical_json(&self) -> String {
        to_canonical_json(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }

    /// Flat `key,value` CSV rendering.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |x: f64| format!("{x:.16e}");
        let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        let rows: Vec<(&str, String)> = vec![
            ("version", self.version.to_string()),
            ("method", self.method.as_str().to_string()),
            ("empirical_mean", fmt(self.empirical_mean)),
            ("summands", self.summands.to_string()),
            ("delta", fmt(self.delta)),
            ("slack", fmt(self.slack)),
            ("bound", fmt(self.bound)),
            ("n_passes", opt(self.n_passes)),
            ("m", self.m.to_string()),
            ("seed", self.seed.to_string()),
            ("created_at", self.created_at.clone().unwrap_or_default()),
            ("data_digest", self.provenance.data_digest.clone().unwrap_or_default()),
            ("loss_evaluations", self.provenance.loss_evaluations.to_string()),
            ("held_out", self.provenance.held_out.map(|b| b.to_string()).unwrap_or_default()),
            ("subsample_seed", opt(self.provenance.subsample_seed)),
            ("inversion_tol", fmt(self.provenance.inversion_tol)),
            ("roundtrip_tol", fmt(self.provenance.roundtrip_tol)),
        ];
        w.write_record(["key", "value"]).expect("in-memory write");
        for (k, v) in rows {
            w.write_record([k, v.as_str()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Recompute the bound of `cert` from its stored mean and slack.
///
/// Also checks the structural invariants (delta range, `T` versus method,
/// slack versus `log(1/delta)/T`). The recomputed bound must equal the stored
/// one bit for bit; anything else means corruption or version drift.
pub fn recompute_bound(cert: &Certificate) -> Result<Probability> {
    if cert.version != CERTIFICATE_VERSION {
        return Err(Error::Inconsistent(format!("unsupported version {}", cert.version)));
    }
    if !(cert.delta > 0.0 && cert.delta < 1.0) {
        return Err(Error::Inconsistent(format!("delta {} outside (0, 1)", cert.delta)));
    }
    if cert.summands == 0 || cert.m == 0 {
        return Err(Error::Inconsistent("T and m must be positive".into()));
    }
    let expected_t = match (cert.method, cert.n_passes) {
        (Method::Classic, Some(n)) => Some(n),
        (Method::Fresh | Method::Testset, Some(n)) => n.checked_mul(cert.m),
        (Method::Subsampled, None) => Some(cert.summands),
        _ => None,
    };
    if expected_t != Some(cert.summands) {
        return Err(Error::Inconsistent(format!(
            "T = {} does not match method {} with n = {:?}, m = {}",
            cert.summands,
            cert.method.as_str(),
            cert.n_passes,
            cert.m
        )));
    }
    let expected_slack = SlackBudget::from_confidence(cert.delta, cert.summands)?.value();
    if (cert.slack - expected_slack).abs() > 4.0 * f64::EPSILON * expected_slack {
        return Err(Error::Inconsistent(format!(
            "slack {} differs from log(1/delta)/T = {expected_slack}",
            cert.slack
        )));
    }
    let mean = Probability::new(cert.empirical_mean)
        .map_err(|_| Error::Inconsistent(format!("mean {} outside [0, 1]", cert.empirical_mean)))?;
    let slack = SlackBudget::new(cert.slack)?;
    let cfg = InversionConfig {
        tol: cert.provenance.inversion_tol,
        roundtrip_tol: cert.provenance.roundtrip_tol,
        ..InversionConfig::default()
    };
    let bound = kl_inverse_upper_with(mean, slack, &cfg);
    if bound.value().to_bits() != cert.bound.to_bits() {
        return Err(Error::Inconsistent(format!(
            "stored bound {:e} but recomputed {:e}",
            cert.bound,
            bound.value()
        )));
    }
    Ok(bound)
}
