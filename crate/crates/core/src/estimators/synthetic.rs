//! Synthetic posteriors with a known Gibbs risk, used for simulation.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{LossOracle, PosteriorSampler};
use crate::error::{Error, Result};
use crate::rng;
use crate::summation::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// `l(H, z_j) ~ Bernoulli(p_j)`, independently across hypotheses and examples.
    Bernoulli,
    /// A single hypothesis with deterministic losses `l(h, z_j) = p_j`.
    PointMass,
    /// `l(H, z_j) ~ Beta(k p_j, k (1 - p_j))` with concentration `k`.
    BetaLoss { concentration: f64 },
}

/// Opaque hypothesis handle: the key of its private random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SyntheticHypothesis(pub u64);

/// Posterior whose expected per-example losses are the given `means`, so the
/// in-sample Gibbs risk is their average. Acts as both sampler and oracle.
#[derive(Debug, Clone)]
pub struct SyntheticPosterior {
    kind: SyntheticKind,
    means: Vec<f64>,
    seed: u64,
}

impl SyntheticPosterior {
    pub fn new(kind: SyntheticKind, means: Vec<f64>, seed: u64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::ZeroCount { name: "number of examples m" });
        }
        if let Some(&bad) = means.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::ProbabilityOutOfRange(bad));
        }
        if let SyntheticKind::BetaLoss { concentration } = kind {
            if !(concentration.is_finite() && concentration > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "beta concentration must be positive, got {concentration}"
                )));
            }
        }
        Ok(Self { kind, means, seed })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// `L_s(rho)`.
    pub fn gibbs_risk(&self) -> f64 {
        compensated_sum(&self.means) / self.means.len() as f64
    }
}

impl PosteriorSampler for SyntheticPosterior {
    type Hypothesis = SyntheticHypothesis;

    fn seed(&self) -> u64 {
        self.seed
    }

    fn draw(&self, t: u64) -> Result<SyntheticHypothesis> {
        Ok(SyntheticHypothesis(rng::derive_seed(self.seed, t)))
    }
}

impl LossOracle<SyntheticHypothesis> for SyntheticPosterior {
    fn loss(&self, h: &SyntheticHypothesis, example: usize) -> Result<f64> {
        let p = *self.means.get(example).ok_or_else(|| {
            Error::Dimension(format!("example {example} out of range for m = {}", self.len()))
        })?;
        let mut stream = rng::stream(h.0, example as u64);
        Ok(match self.kind {
            SyntheticKind::PointMass => p,
            SyntheticKind::Bernoulli => {
                if stream.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            SyntheticKind::BetaLoss { concentration } => {
                if p == 0.0 || p == 1.0 {
                    p
                } else {
                    let beta = Beta::new(concentration * p, concentration * (1.0 - p))
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    beta.sample(&mut stream)
                }
            }
        })
    }
}

/// Oracle adapter that reads example `j` as `index[j]` of the inner oracle.
///
/// A test stream `Z_1..Z_m` drawn from a finite population is expressed as the
/// population oracle remapped through the drawn indices.
pub struct Remapped<'a, L> {
    inner: &'a L,
    index: Vec<usize>,
}

impl<'a, L> Remapped<'a, L> {
    pub fn new(inner: &'a L, index: Vec<usize>) -> Self {
        Self { inner, index }
    }

    /// `m` population indices drawn uniformly with replacement from `0..population`.
    pub fn uniform_stream(inner: &'a L, population: usize, m: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, 0);
        let index = (0..m).map(|_| r.random_range(0..population)).collect();
        Self { inner, index }
    }

    pub fn indices(&self) -> &[usize] {
        &self.index
    }
}

impl<H, L: LossOracle<H>> LossOracle<H> for Remapped<'_, L> {
    fn loss(&self, h: &H, example: usize) -> Result<f64> {
        let j = *self
            .index
            .get(example)
            .ok_or_else(|| Error::Dimension(format!("stream position {example} out of range")))?;
        self.inner.loss(h, j)
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }
}
