//! Monte-Carlo certification of the Gibbs risk of a posterior.
//!
//! Four procedures share one evaluation engine:
//!
//! * **classic**: `n` hypotheses, each evaluated on all `m` examples. The pass
//!   means are the `T = n` independent summands.
//! * **fresh**: a new hypothesis for every (pass, example) pair. With 0-based
//!   pass `i` and example `j` the draw index is `t = j + m * i`, and each of
//!   the `T = n * m` losses is an independent summand.
//! * **testset**: the fresh construction over held-out examples, certifying
//!   the out-of-sample risk.
//! * **subsampled**: `T` draws, each paired with an example index sampled
//!   uniformly with replacement.
//!
//! In every case the certified bound is `kl_inverse_upper(mean, log(1/delta) / T)`.
//!
//! Summands are computed independently per draw index (optionally in
//! parallel) and reduced in ascending index order with compensated
//! summation, so a certificate is bit-identical however it was evaluated.

mod certificate;
mod loss_matrix;
mod synthetic;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kl::{kl_inverse_upper_with, InversionConfig, Probability, SlackBudget};
use crate::rng;
use crate::summation::{compensated_sum, CompensatedSum};

pub use certificate::{recompute_bound, Certificate, Method, Provenance, CERTIFICATE_VERSION};
pub use loss_matrix::LossMatrix;
pub use synthetic::{Remapped, SyntheticHypothesis, SyntheticKind, SyntheticPosterior};

/// Source of i.i.d. hypotheses `H ~ rho`.
///
/// `draw(t)` must be a pure function of the master seed and the 0-based draw
/// index `t`: distinct indices give independent, identically distributed
/// hypotheses and repeated calls give the same one.
pub trait PosteriorSampler: Send + Sync {
    type Hypothesis: Send;

    fn seed(&self) -> u64;

    fn draw(&self, t: u64) -> Result<Self::Hypothesis>;

    /// Number of distinct draws available, for samplers backed by recorded
    /// draws. Estimators require an exact match so draws are never reused.
    fn capacity(&self) -> Option<u64> {
        None
    }

    /// `false` forces sequential evaluation.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Loss `l(h, z_j)` of a hypothesis on the example with 0-based index `j`.
///
/// Values are validated by the estimators; anything outside `[0, 1]` aborts
/// the certification with the offending coordinates.
pub trait LossOracle<H>: Send + Sync {
    fn loss(&self, hypothesis: &H, example: usize) -> Result<f64>;

    fn concurrent(&self) -> bool {
        true
    }
}

/// A fixed dataset `s = {z_0, .., z_{m-1}}`, addressed by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHandle {
    size: usize,
    digest: Option<String>,
}

impl DatasetHandle {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::ZeroCount { name: "dataset size m" });
        }
        Ok(Self { size, digest: None })
    }

    /// Attach a content digest recorded in certificate provenance.
    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.digest = Some(digest.into());
        self
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn digest(&self) -> Option<&str> {
        self.digest.as_deref()
    }
}

/// Map a loss in `[lower, upper]` affinely onto `[0, 1]`.
///
/// This is explicit pre-processing: the estimators never rescale on their own.
pub fn rescale_loss(value: f64, lower: f64, upper: f64) -> Result<Probability> {
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(Error::InvalidInterval { lower, upper });
    }
    if !(value >= lower && value <= upper) {
        return Err(Error::OutsideInterval { value, lower, upper });
    }
    Probability::new(((value - lower) / (upper - lower)).clamp(0.0, 1.0))
}

/// Settings shared by all estimators.
#[derive(Debug, Clone)]
pub struct Certifier {
    inversion: InversionConfig<f64>,
    parallel: bool,
    created_at: Option<String>,
}

impl Default for Certifier {
    fn default() -> Self {
        Self { inversion: InversionConfig::default(), parallel: true, created_at: None }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

fn check_loss(value: f64, draw: u64, example: usize) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::LossOutOfRange { draw, example, value })
    }
}

fn check_capacity<S: PosteriorSampler>(sampler: &S, required: u64) -> Result<()> {
    match sampler.capacity() {
        Some(available) if available != required => Err(Error::Dimension(format!(
            "estimator needs exactly {required} posterior draws, sampler provides {available}"
        ))),
        _ => Ok(()),
    }
}

impl Certifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inversion(mut self, cfg: InversionConfig<f64>) -> Self {
        self.inversion = cfg;
        self
    }

    pub fn parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// Timestamp copied verbatim into certificates. Unset by default so that
    /// identical inputs give byte-identical output.
    pub fn created_at(mut self, stamp: Option<String>) -> Self {
        self.created_at = stamp;
        self
    }

    /// Evaluate `summand(t)` for `t in 0..count`, in index order.
    fn summands<F>(&self, count: u64, concurrent: bool, summand: F) -> Result<Vec<f64>>
    where
        F: Fn(u64) -> Result<f64> + Sync + Send,
    {
        if self.parallel && concurrent {
            (0..count).into_par_iter().map(summand).collect()
        } else {
            (0..count).map(summand).collect()
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        method: Method,
        summands: &[f64],
        delta: f64,
        n_passes: Option<u64>,
        m: usize,
        seed: u64,
        provenance: Provenance,
    ) -> Result<Certificate> {
        let count = summands.len() as u64;
        let mean = (compensated_sum(summands) / count as f64).clamp(0.0, 1.0);
        let empirical_mean = Probability::new(mean)?;
        let slack = SlackBudget::from_confidence(delta, count)?;
        let bound = kl_inverse_upper_with(empirical_mean, slack, &self.inversion);
        Ok(Certificate {
            version: CERTIFICATE_VERSION,
            method,
            empirical_mean: mean,
            summands: count,
            delta,
            slack: slack.value(),
            bound: bound.value(),
            n_passes,
            m: m as u64,
            seed,
            created_at: self.created_at.clone(),
            provenance,
        })
    }

    fn provenance(&self, data: &DatasetHandle, evaluations: u64) -> Provenance {
        Provenance {
            data_digest: data.digest().map(str::to_owned),
            loss_evaluations: evaluations,
            held_out: None,
            subsample_seed: None,
            inversion_tol: self.inversion.tol,
            roundtrip_tol: self.inversion.roundtrip_tol,
        }
    }

    /// Classic multi-pass estimator: `T = n` full-dataset losses.
    pub fn classic<S, L>(
        &self,
        sampler: &S,
        data: &DatasetHandle,
        loss: &L,
        n: u64,
        delta: f64,
    ) -> Result<Certificate>
    where
        S: PosteriorSampler,
        L: LossOracle<S::Hypothesis>,
    {
        check_delta(delta)?;
        if n == 0 {
            return Err(Error::ZeroCount { name: "number of passes n" });
        }
        check_capacity(sampler, n)?;
        let m = data.len();
        let concurrent = sampler.concurrent() && loss.concurrent();
        let pass_means = self.summands(n, concurrent, |t| {
            let h = sampler.draw(t)?;
            let mut acc = CompensatedSum::new();
            for j in 0..m {
                acc.add(check_loss(loss.loss(&h, j)?, t, j)?);
            }
            Ok(acc.value() / m as f64)
        })?;
        let evaluations = n.checked_mul(m as u64).ok_or_else(overflow)?;
        let prov = self.provenance(data, evaluations);
        self.finish(Method::Classic, &pass_means, delta, Some(n), m, sampler.seed(), prov)
    }

    /// Fresh-sample-per-example estimator: `T = n * m` single losses.
    pub fn fresh<S, L>(
        &self,
        sampler: &S,
        data: &DatasetHandle,
        loss: &L,
        n: u64,
        delta: f64,
    ) -> Result<Certificate>
    where
        S: PosteriorSampler,
        L: LossOracle<S::Hypothesis>,
    {
        let (summands, evaluations) = self.fresh_summands(sampler, data, loss, n, delta)?;
        let prov = self.provenance(data, evaluations);
        self.finish(Method::Fresh, &summands, delta, Some(n), data.len(), sampler.seed(), prov)
    }

    /// Test-set estimator over `stream`, a sequence of `m` held-out examples.
    ///
    /// `held_out` is the caller's attestation that the examples were drawn
    /// i.i.d. and never used to build the posterior; it is recorded, not checked.
    pub fn testset<S, L>(
        &self,
        sampler: &S,
        stream: &DatasetHandle,
        loss: &L,
        n: u64,
        delta: f64,
        held_out: bool,
    ) -> Result<Certificate>
    where
        S: PosteriorSampler,
        L: LossOracle<S::Hypothesis>,
    {
        let (summands, evaluations) = self.fresh_summands(sampler, stream, loss, n, delta)?;
        let mut prov = self.provenance(stream, evaluations);
        prov.held_out = Some(held_out);
        self.finish(Method::Testset, &summands, delta, Some(n), stream.len(), sampler.seed(), prov)
    }

    fn fresh_summands<S, L>(
        &self,
        sampler: &S,
        data: &DatasetHandle,
        loss: &L,
        n: u64,
        delta: f64,
    ) -> Result<(Vec<f64>, u64)>
    where
        S: PosteriorSampler,
        L: LossOracle<S::Hypothesis>,
    {
        check_delta(delta)?;
        if n == 0 {
            return Err(Error::ZeroCount { name: "number of passes n" });
        }
        let m = data.len() as u64;
        let total = n.checked_mul(m).ok_or_else(overflow)?;
        check_capacity(sampler, total)?;
        let concurrent = sampler.concurrent() && loss.concurrent();
        let summands = self.summands(total, concurrent, |t| {
            let j = (t % m) as usize;
            let h = sampler.draw(t)?;
            check_loss(loss.loss(&h, j)?, t, j)
        })?;
        Ok((summands, total))
    }

    /// Sub-sampled estimator: `T` draws, each on an example index chosen
    /// uniformly with replacement from the stream keyed by `subsample_seed`.
    pub fn subsampled<S, L>(
        &self,
        sampler: &S,
        data: &DatasetHandle,
        loss: &L,
        summands: u64,
        delta: f64,
        subsample_seed: u64,
    ) -> Result<Certificate>
    where
        S: PosteriorSampler,
        L: LossOracle<S::Hypothesis>,
    {
        check_delta(delta)?;
        if summands == 0 {
            return Err(Error::ZeroCount { name: "number of summands T" });
        }
        check_capacity(sampler, summands)?;
        let m = data.len();
        let concurrent = sampler.concurrent() && loss.concurrent();
        let values = self.summands(summands, concurrent, |t| {
            let j = subsample_index(subsample_seed, t, m);
            let h = sampler.draw(t)?;
            check_loss(loss.loss(&h, j)?, t, j)
        })?;
        let mut prov = self.provenance(data, summands);
        prov.subsample_seed = Some(subsample_seed);
        self.finish(Method::Subsampled, &values, delta, None, m, sampler.seed(), prov)
    }
}

/// Example index paired with draw `t` by the sub-sampled estimator.
pub fn subsample_index(subsample_seed: u64, t: u64, m: usize) -> usize {
    rng::stream(subsample_seed, t).random_range(0..m)
}

fn overflow() -> Error {
    Error::Dimension("number of loss evaluations overflows u64".into())
}

/// [`Certifier::classic`] with default settings.
pub fn estimate_classic<S, L>(
    sampler: &S,
    data: &DatasetHandle,
    loss: &L,
    n: u64,
    delta: f64,
) -> Result<Certificate>
where
    S: PosteriorSampler,
    L: LossOracle<S::Hypothesis>,
{
    Certifier::default().classic(sampler, data, loss, n, delta)
}

/// [`Certifier::fresh`] with default settings.
pub fn estimate_fresh<S, L>(
    sampler: &S,
    data: &DatasetHandle,
    loss: &L,
    n: u64,
    delta: f64,
) -> Result<Certificate>
where
    S: PosteriorSampler,
    L: LossOracle<S::Hypothesis>,
{
    Certifier::default().fresh(sampler, data, loss, n, delta)
}

/// [`Certifier::testset`] with default settings.
pub fn estimate_testset<S, L>(
    sampler: &S,
    stream: &DatasetHandle,
    loss: &L,
    n: u64,
    delta: f64,
    held_out: bool,
) -> Result<Certificate>
where
    S: PosteriorSampler,
    L: LossOracle<S::Hypothesis>,
{
    Certifier::default().testset(sampler, stream, loss, n, delta, held_out)
}

/// [`Certifier::subsampled`] with default settings.
pub fn estimate_subsampled<S, L>(
    sampler: &S,
    data: &DatasetHandle,
    loss: &L,
    summands: u64,
    delta: f64,
    subsample_seed: u64,
) -> Result<Certificate>
where
    S: PosteriorSampler,
    L: LossOracle<S::Hypothesis>,
{
    Certifier::default().subsampled(sampler, data, loss, summands, delta, subsample_seed)
}
