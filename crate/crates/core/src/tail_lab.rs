//! Verification laboratory for the concentration inequalities behind the
//! estimators.
//!
//! For independent `X_i in [0, 1]` with means `p_i`, mean `X` and aggregate
//! mean `p`, the lower tail satisfies `Pr(X <= t) <= exp(-T kl(t, p))` for
//! every `t <= p`. Inverting it gives `p <= kl_inverse_upper(X, log(1/delta)/T)`
//! with probability at least `1 - delta`. The lab checks the first statement
//! exactly on Bernoulli variables (Poisson-binomial tails) and the second by
//! simulation.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kl::{kl_inverse_upper, kl_raw, Probability, SlackBudget};
use crate::rng;
use crate::scalar::Scalar;
use crate::summation::{compensated_sum, CompensatedSum};

/// Independent Bernoulli variables with means `p_1, .., p_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousBernoulliSpec<F = f64> {
    means: Vec<F>,
}

impl<F: Scalar> HeterogeneousBernoulliSpec<F> {
    pub fn new(means: Vec<F>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::ZeroCount { name: "number of variables T" });
        }
        for &p in &means {
            Probability::new(p)?;
        }
        Ok(Self { means })
    }

    /// `T` copies of `p`.
    pub fn homogeneous(p: F, count: usize) -> Result<Self> {
        Self::new(vec![p; count])
    }

    pub fn means(&self) -> &[F] {
        &self.means
    }

    /// `T`.
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Aggregate mean `p = (1/T) sum p_i`.
    pub fn mean(&self) -> F {
        let p = compensated_sum(&self.means) / F::from_count(self.len());
        p.min(F::one()).max(F::zero())
    }
}

/// Exact tail against the Chernoff-kl bound at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport<F = f64> {
    pub t: F,
    pub exact_tail: F,
    pub bound: F,
    pub satisfied: bool,
}

/// Outcome of a coverage simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub trials: u64,
    /// Trials in which the bound fell below the true mean.
    pub failures: u64,
    pub delta: f64,
    pub failure_rate: f64,
    /// `(delta - failure_rate) / sqrt(delta (1 - delta) / trials)`: headroom
    /// below `delta` in binomial standard errors.
    pub z_slack: f64,
    pub summands: u64,
    pub true_mean: f64,
    pub seed: u64,
}

impl CoverageReport {
    /// Acceptance threshold `delta + z sqrt(delta (1 - delta) / trials)`.
    pub fn threshold(&self, z: f64) -> f64 {
        self.delta + z * (self.delta * (1.0 - self.delta) / self.trials as f64).sqrt()
    }

    pub fn within(&self, z: f64) -> bool {
        self.failure_rate <= self.threshold(z)
    }
}

/// Equal-evaluation-budget comparison of the classic and fresh estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetComparison<F = f64> {
    pub m: u64,
    pub n_classic: u64,
    pub delta: F,
    pub q: F,
    /// Loss evaluations `n_classic * m` spent by either method.
    pub evaluations: u64,
    pub slack_classic: F,
    pub slack_fresh_equal_budget: F,
    pub bound_classic: F,
    pub bound_fresh: F,
    /// Factor by which fresh sampling cuts the passes needed for equal slack (`m`).
    pub pass_ratio: u64,
    /// Passes the fresh estimator needs to match the classic slack: `ceil(n_classic / m)`.
    pub fresh_passes_for_equal_slack: u64,
}

fn check_threshold<F: Scalar>(spec: &HeterogeneousBernoulliSpec<F>, t: Probability<F>) -> Result<F> {
    let p = spec.mean();
    if t.value() > p {
        return Err(Error::ThresholdAboveMean {
            t: t.value().to_f64().unwrap_or(f64::NAN),
            p: p.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(p)
}

/// `exp(-T kl(t, p))`; requires `t <= p`.
pub fn chernoff_kl_tail_bound<F: Scalar>(
    spec: &HeterogeneousBernoulliSpec<F>,
    t: Probability<F>,
) -> Result<Probability<F>> {
    let p = check_threshold(spec, t)?;
    let exponent = F::from_count(spec.len()) * kl_raw(t.value(), p);
    Probability::new((-exponent).exp())
}

/// Probability mass function of `sum X_i` on `{0, .., T}`, by the O(T^2)
/// convolution recurrence.
pub fn poisson_binomial_pmf<F: Scalar>(spec: &HeterogeneousBernoulliSpec<F>) -> Vec<F> {
    let mut pmf = vec![F::zero(); spec.len() + 1];
    pmf[0] = F::one();
    for (i, &p) in spec.means().iter().enumerate() {
        let q = F::one() - p;
        for k in (1..=i + 1).rev() {
            pmf[k] = pmf[k] * q + pmf[k - 1] * p;
        }
        pmf[0] = pmf[0] * q;
    }
    pmf
}

/// Whether `X = k / T` is at most `t`.
#[inline]
fn counts_toward<F: Scalar>(k: usize, total: usize, t: F) -> bool {
    F::from_count(k) / F::from_count(total) <= t
}

/// Exact `Pr(X <= t)` from the Poisson-binomial distribution.
pub fn exact_lower_tail<F: Scalar>(
    spec: &HeterogeneousBernoulliSpec<F>,
    t: Probability<F>,
) -> Probability<F> {
    let total = spec.len();
    let pmf = poisson_binomial_pmf(spec);
    let mut acc = CompensatedSum::new();
    for (k, &mass) in pmf.iter().enumerate() {
        if counts_toward(k, total, t.value()) {
            acc.add(mass);
        }
    }
    Probability::new(acc.value().min(F::one()).max(F::zero())).expect("clamped")
}

/// `Pr(X <= t)` by summing all `2^T` outcomes. Limited to `T <= 20`.
pub fn enumerate_lower_tail<F: Scalar>(
    spec: &HeterogeneousBernoulliSpec<F>,
    t: Probability<F>,
) -> Result<Probability<F>> {
    let total = spec.len();
    if total > 20 {
        return Err(Error::InvalidParameter(format!("enumeration needs T <= 20, got {total}")));
    }
    let mut acc = CompensatedSum::new();
    for outcome in 0u32..(1u32 << total) {
        let ones = outcome.count_ones() as usize;
        if !counts_toward(ones, total, t.value()) {
            continue;
        }
        let mut mass = F::one();
        for (i, &p) in spec.means().iter().enumerate() {
            mass = mass * if outcome >> i & 1 == 1 { p } else { F::one() - p };
        }
        acc.add(mass);
    }
    Probability::new(acc.value().min(F::one()).max(F::zero()))
}

/// Pair the exact tail with the bound at every grid point.
///
/// A report is satisfied when `exact_tail <= bound + 1e-12`.
pub fn verify_theorem3<F: Scalar>(
    spec: &HeterogeneousBernoulliSpec<F>,
    t_grid: &[Probability<F>],
) -> Result<Vec<TailReport<F>>> {
    let slack = F::lit(1e-12);
    t_grid
        .iter()
        .map(|&t| {
            let bound = chernoff_kl_tail_bound(spec, t)?.value();
            let exact_tail = exact_lower_tail(spec, t).value();
            Ok(TailReport { t: t.value(), exact_tail, bound, satisfied: exact_tail <= bound + slack })
        })
        .collect()
}

/// Monte-Carlo coverage of `kl_inverse_upper(X, log(1/delta)/T)` as an upper
/// bound on `p`.
///
/// Trial `k` draws `X_1..X_T` from stream `(seed, k)`; trials run in parallel
/// and the failure count does not depend on scheduling.
pub fn coverage_simulation<F: Scalar>(
    true_means: &HeterogeneousBernoulliSpec<F>,
    delta: F,
    trials: u64,
    seed: u64,
) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::ZeroCount { name: "trials" });
    }
    let count = true_means.len();
    let slack = SlackBudget::from_confidence(delta, count as u64)?;
    let p = true_means.mean();
    let failures: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(seed, trial);
            let ones = true_means
                .means()
                .iter()
                .filter(|&&pi| F::lit(r.random::<f64>()) < pi)
                .count();
            let x = Probability::new(F::from_count(ones) / F::from_count(count)).expect("in [0, 1]");
            u64::from(kl_inverse_upper(x, slack).value() < p)
        })
        .sum();

    let delta = delta.to_f64().expect("finite");
    let failure_rate = failures as f64 / trials as f64;
    let se = (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok(CoverageReport {
        trials,
        failures,
        delta,
        failure_rate,
        z_slack: (delta - failure_rate) / se,
        summands: count as u64,
        true_mean: p.to_f64().expect("finite"),
        seed,
    })
}

/// Slacks and bounds of both estimators at the same `n_classic * m` loss
/// evaluations and common empirical mean `q`.
pub fn budget_compare<F: Scalar>(
    m: u64,
    n_classic: u64,
    delta: F,
    q: Probability<F>,
) -> Result<BudgetComparison<F>> {
    if m == 0 {
        return Err(Error::ZeroCount { name: "dataset size m" });
    }
    let evaluations = n_classic
        .checked_mul(m)
        .ok_or_else(|| Error::Dimension("n_classic * m overflows u64".into()))?;
    let slack_classic = SlackBudget::from_confidence(delta, n_classic)?;
    let slack_fresh =
        SlackBudget::new(slack_classic.value() / F::from_u64(m).expect("count is representable"))?;
    Ok(BudgetComparison {
        m,
        n_classic,
        delta,
        q: q.value(),
        evaluations,
        slack_classic: slack_classic.value(),
        slack_fresh_equal_budget: slack_fresh.value(),
        bound_classic: kl_inverse_upper(q, slack_classic).value(),
        bound_fresh: kl_inverse_upper(q, slack_fresh).value(),
        pass_ratio: m,
        fresh_passes_for_equal_slack: n_classic.div_ceil(m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(ps: &[f64]) -> HeterogeneousBernoulliSpec {
        HeterogeneousBernoulliSpec::new(ps.to_vec()).unwrap()
    }

    fn pr(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    #[test]
    fn bound_examples() {
        let s = spec(&[0.2, 0.6]);
        assert_eq!(chernoff_kl_tail_bound(&s, pr(s.mean())).unwrap().value(), 1.0);
        assert_abs_diff_eq!(chernoff_kl_tail_bound(&s, pr(0.0)).unwrap().value(), 0.36, epsilon = 1e-15);
        let h = HeterogeneousBernoulliSpec::homogeneous(0.5, 10).unwrap();
        // exp(-10 kl(0.2, 0.5)) = (0.4^0.2 1.6^0.8)^-10
        assert_abs_diff_eq!(
            chernoff_kl_tail_bound(&h, pr(0.2)).unwrap().value(),
            0.145_519_152_283_668_5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn threshold_above_mean_is_rejected() {
        let s = spec(&[0.2, 0.6]);
        assert!(matches!(
            chernoff_kl_tail_bound(&s, pr(0.41)),
            Err(Error::ThresholdAboveMean { .. })
        ));
        assert!(verify_theorem3(&s, &[pr(0.0), pr(0.5)]).is_err());
    }

    #[test]
    fn exact_tail_examples() {
        let s = spec(&[0.2, 0.6]);
        assert_abs_diff_eq!(exact_lower_tail(&s, pr(0.0)).value(), 0.32, epsilon = 1e-15);
        assert_eq!(exact_lower_tail(&spec(&[0.3]), pr(0.0)).value(), 0.7);
        assert_abs_diff_eq!(exact_lower_tail(&spec(&[0.1, 0.5, 0.9, 0.33]), pr(1.0)).value(), 1.0, epsilon = 4e-15);
    }

    #[test]
    fn pmf_sums_to_one() {
        let s = spec(&[0.05, 0.5, 0.95, 0.2, 0.7, 0.0, 1.0]);
        let pmf = poisson_binomial_pmf(&s);
        assert_eq!(pmf.len(), 8);
        assert_abs_diff_eq!(compensated_sum(&pmf), 1.0, epsilon = 7e-15);
    }

    #[test]
    fn dp_matches_enumeration() {
        let s = spec(&[0.13, 0.5, 0.77, 0.02, 0.91, 0.4]);
        for k in 0..=6 {
            let t = pr(k as f64 / 6.0);
            assert_abs_diff_eq!(
                exact_lower_tail(&s, t).value(),
                enumerate_lower_tail(&s, t).unwrap().value(),
                epsilon = 1e-14
            );
        }
        assert!(enumerate_lower_tail(&HeterogeneousBernoulliSpec::homogeneous(0.5, 21).unwrap(), pr(0.1)).is_err());
    }

    #[test]
    fn verify_small_grid() {
        let s = spec(&[0.2, 0.6]);
        let reports = verify_theorem3(&s, &[pr(0.0), pr(0.2), pr(0.4)]).unwrap();
        assert!(reports.iter().all(|r| r.satisfied));
        assert_abs_diff_eq!(reports[0].exact_tail, 0.32, epsilon = 1e-15);
        assert_abs_diff_eq!(reports[0].bound, 0.36, epsilon = 1e-15);
    }

    #[test]
    fn coverage_of_zero_loss() {
        let s = spec(&[0.0]);
        let rep = coverage_simulation(&s, 0.5, 200, 3).unwrap();
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.failure_rate, 0.0);
    }

    #[test]
    fn coverage_is_seed_deterministic() {
        let s = HeterogeneousBernoulliSpec::homogeneous(0.3, 40).unwrap();
        let a = coverage_simulation(&s, 0.2, 300, 9).unwrap();
        let b = coverage_simulation(&s, 0.2, 300, 9).unwrap();
        assert_eq!(a, b);
        assert!(coverage_simulation(&s, 0.2, 0, 9).is_err());
        assert!(coverage_simulation(&s, 1.2, 10, 9).is_err());
    }

    #[test]
    fn budget_examples() {
        let same = budget_compare(1, 40, 0.05, pr(0.2)).unwrap();
        assert_eq!(same.slack_classic, same.slack_fresh_equal_budget);
        assert_eq!(same.bound_classic, same.bound_fresh);

        let big = budget_compare(50_000, 150_000, 0.01, pr(0.1)).unwrap();
        assert_eq!(big.fresh_passes_for_equal_slack, 3);
        assert_eq!(big.pass_ratio, 50_000);

        let c = budget_compare(1000, 100, 0.05, pr(0.1)).unwrap();
        assert_abs_diff_eq!(c.slack_fresh_equal_budget, 2.995_732_273_553_991e-5, epsilon = 1e-19);
        assert!(c.bound_fresh <= c.bound_classic);
    }

    #[test]
    fn generic_over_f32() {
        let s = HeterogeneousBernoulliSpec::<f32>::new(vec![0.2, 0.6]).unwrap();
        let t = Probability::<f32>::new(0.0).unwrap();
        assert!((exact_lower_tail(&s, t).value() - 0.32).abs() < 1e-6);
        assert!((chernoff_kl_tail_bound(&s, t).unwrap().value() - 0.36).abs() < 1e-6);
    }
}
