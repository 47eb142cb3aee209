//! Binary KL divergence, its one-sided variant, and certified upper inversion.
//!
//! All routines are pure and generic over the [`Scalar`] type.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A real number in `[0, 1]`.
///
/// Construction rejects anything outside the interval (including NaN).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability<F = f64>(F);

impl<F: Scalar> Probability<F> {
    pub fn new(value: F) -> Result<Self> {
        if value >= F::zero() && value <= F::one() {
            Ok(Self(value))
        } else {
            Err(Error::ProbabilityOutOfRange(value.to_f64().unwrap_or(f64::NAN)))
        }
    }

    #[inline]
    pub fn zero() -> Self {
        Self(F::zero())
    }

    #[inline]
    pub fn one() -> Self {
        Self(F::one())
    }

    #[inline]
    pub fn value(self) -> F {
        self.0
    }
}

impl<F: Scalar> TryFrom<f64> for Probability<F> {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        match F::from_f64(value) {
            Some(v) => Self::new(v),
            None => Err(Error::ProbabilityOutOfRange(value)),
        }
    }
}

/// Slack `c >= 0` (in nats) allowed between the empirical and certified mean.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SlackBudget<F = f64>(F);

impl<F: Scalar> SlackBudget<F> {
    pub fn new(c: F) -> Result<Self> {
        if c.is_finite() && c >= F::zero() {
            Ok(Self(c))
        } else {
            Err(Error::InvalidSlack(c.to_f64().unwrap_or(f64::NAN)))
        }
    }

    /// `log(1/delta) / summands`, the slack for `summands` independent terms
    /// at confidence `1 - delta`.
    pub fn from_confidence(delta: F, summands: u64) -> Result<Self> {
        if !(delta > F::zero() && delta < F::one()) {
            return Err(Error::InvalidDelta(delta.to_f64().unwrap_or(f64::NAN)));
        }
        if summands == 0 {
            return Err(Error::ZeroCount { name: "number of summands" });
        }
        let t = F::from_u64(summands).expect("count is representable");
        Self::new(-delta.ln() / t)
    }

    #[inline]
    pub fn value(self) -> F {
        self.0
    }
}

/// Stopping rule for [`kl_inverse_upper_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig<F = f64> {
    /// Bracket width at which the upper endpoint may be returned.
    pub tol: F,
    /// Maximum allowed `kl(q, u) - c` at the returned bound `u < 1`.
    pub roundtrip_tol: F,
    pub max_iter: usize,
}

impl<F: Scalar> Default for InversionConfig<F> {
    fn default() -> Self {
        Self {
            tol: F::default_inversion_tol(),
            roundtrip_tol: F::default_roundtrip_tol(),
            max_iter: 2000,
        }
    }
}

/// `kl(q, p)` on raw scalars assumed to lie in `[0, 1]`.
///
/// Uses `0 log 0 = 0` and returns `+inf` when `p` is 0 or 1 and differs from `q`.
/// Both logarithms are written as `ln_1p` of the relative gap so that
/// evaluation near `p = 1` stays accurate.
pub(crate) fn kl_raw<F: Scalar>(q: F, p: F) -> F {
    if q == p {
        return F::zero();
    }
    if q == F::zero() {
        return if p == F::one() { F::infinity() } else { -(-p).ln_1p() };
    }
    if q == F::one() {
        return if p == F::zero() { F::infinity() } else { -p.ln() };
    }
    if p == F::zero() || p == F::one() {
        return F::infinity();
    }
    let gap = p - q;
    let one_minus_q = F::one() - q;
    let one_minus_p = F::one() - p;
    // q log(q/p) = -q log(1 + gap/q); (1-q) log((1-q)/(1-p)) = (1-q) log(1 + gap/(1-p))
    let head = -q * (gap / q).ln_1p();
    let tail = one_minus_q * (gap / one_minus_p).ln_1p();
    (head + tail).max(F::zero())
}

/// Bernoulli KL divergence `kl(q, p)`.
pub fn kl<F: Scalar>(q: Probability<F>, p: Probability<F>) -> F {
    kl_raw(q.value(), p.value())
}

/// One-sided KL: `kl(q, p)` when `q <= p`, zero otherwise.
pub fn kl_plus<F: Scalar>(q: Probability<F>, p: Probability<F>) -> F {
    if q.value() <= p.value() {
        kl(q, p)
    } else {
        F::zero()
    }
}

/// `sup { p in [0, 1] : kl(q, p) <= c }` with the default stopping rule.
pub fn kl_inverse_upper<F: Scalar>(q: Probability<F>, c: SlackBudget<F>) -> Probability<F> {
    kl_inverse_upper_with(q, c, &InversionConfig::default())
}

/// Certified upper inversion of `kl(q, .)`.
///
/// Bisects `p` on `[q, 1 - tol]` keeping `kl(q, lo) <= c < kl(q, hi)` and
/// returns the upper endpoint `hi`, so the result never falls below the
/// supremum. Iteration stops once the bracket is narrower than `cfg.tol` and
/// `kl(q, hi)` is within `cfg.roundtrip_tol` of `c`.
///
/// Near `p = 1` the slope of `kl(q, .)` grows like `(1 - q) / (1 - p)`, and
/// adjacent floats stop resolving `c` to within `roundtrip_tol`. Roots past
/// `1 - (1 - q) * 4 eps / roundtrip_tol` are therefore rounded up to 1. The
/// cutoff depends only on `q`, which keeps the result monotone in `c`.
pub fn kl_inverse_upper_with<F: Scalar>(
    q: Probability<F>,
    c: SlackBudget<F>,
    cfg: &InversionConfig<F>,
) -> Probability<F> {
    let q = q.value();
    let c = c.value();
    if q == F::one() {
        return Probability::one();
    }
    if c == F::zero() {
        return Probability(q);
    }

    let four = F::lit(4.0);
    let resolvable = (F::one() - q) * four * F::epsilon() / cfg.roundtrip_tol;
    let cap = if resolvable.is_finite() {
        F::one() - cfg.tol.max(resolvable)
    } else {
        F::one() - cfg.tol
    };
    if cap <= q {
        return Probability::one();
    }
    let kl_cap = kl_raw(q, cap);
    if c >= kl_cap {
        return Probability::one();
    }

    let mut lo = q;
    let mut hi = cap;
    let mut kl_hi = kl_cap;
    let two = F::one() + F::one();
    for _ in 0..cfg.max_iter {
        if hi - lo <= cfg.tol && kl_hi - c <= cfg.roundtrip_tol {
            return Probability(hi);
        }
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let kl_mid = kl_raw(q, mid);
        if kl_mid > c {
            hi = mid;
            kl_hi = kl_mid;
        } else {
            lo = mid;
        }
    }

    if kl_hi - c <= cfg.roundtrip_tol {
        Probability(hi)
    } else {
        Probability::one()
    }
}

/// `min(1, q + sqrt(c / 2))`, the Pinsker ceiling on [`kl_inverse_upper`].
pub fn pinsker_relaxation<F: Scalar>(q: Probability<F>, c: SlackBudget<F>) -> Probability<F> {
    let two = F::one() + F::one();
    Probability((q.value() + (c.value() / two).sqrt()).min(F::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    fn c(x: f64) -> SlackBudget {
        SlackBudget::new(x).unwrap()
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-1e-300).is_err());
        assert!(Probability::new(1.0000001).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(Probability::new(0.0).is_ok());
        assert!(Probability::new(1.0).is_ok());
    }

    #[test]
    fn slack_rejects_negative_and_nonfinite() {
        assert!(SlackBudget::new(-0.1).is_err());
        assert!(SlackBudget::new(f64::INFINITY).is_err());
        assert!(SlackBudget::new(f64::NAN).is_err());
        assert!(SlackBudget::from_confidence(0.0, 10).is_err());
        assert!(SlackBudget::from_confidence(1.0, 10).is_err());
        assert!(SlackBudget::from_confidence(0.5, 0).is_err());
    }

    #[test]
    fn kl_reference_values() {
        assert_eq!(kl(p(0.5), p(0.5)), 0.0);
        // -ln(0.6)
        assert_abs_diff_eq!(kl(p(0.0), p(0.4)), 0.510_825_623_765_990_7, epsilon = 1e-15);
        assert_abs_diff_eq!(kl(p(0.1), p(0.2)), 0.036_690_014_034_750_58, epsilon = 1e-15);
    }

    #[test]
    fn kl_boundaries() {
        assert_eq!(kl(p(0.3), p(0.0)), f64::INFINITY);
        assert_eq!(kl(p(0.3), p(1.0)), f64::INFINITY);
        assert_eq!(kl(p(0.0), p(1.0)), f64::INFINITY);
        assert_eq!(kl(p(1.0), p(0.0)), f64::INFINITY);
        assert_eq!(kl(p(0.0), p(0.0)), 0.0);
        assert_eq!(kl(p(1.0), p(1.0)), 0.0);
        assert_abs_diff_eq!(kl(p(1.0), p(0.25)), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn kl_plus_branches() {
        assert_eq!(kl_plus(p(0.3), p(0.1)), 0.0);
        assert_abs_diff_eq!(kl_plus(p(0.1), p(0.2)), 0.036_690_014_034_750_58, epsilon = 1e-15);
        for x in [0.0, 0.2, 0.77, 1.0] {
            assert_eq!(kl_plus(p(x), p(x)), 0.0);
        }
    }

    #[test]
    fn inverse_closed_forms() {
        for q in [0.0, 0.1, 0.5, 0.999, 1.0] {
            assert_eq!(kl_inverse_upper(p(q), c(0.0)).value(), q);
        }
        let u = kl_inverse_upper(p(0.0), c(0.05)).value();
        let exact = 0.048_770_575_499_285_99;
        assert!(u >= exact - 1e-16);
        assert!(u <= exact + 1e-12);
        for cc in [0.0, 0.3, 7.0] {
            assert_eq!(kl_inverse_upper(p(1.0), c(cc)).value(), 1.0);
        }
    }

    #[test]
    fn inverse_matches_high_precision_root() {
        // root of kl(0.1, p) = 0.01, from a 50-digit bisection
        let exact = 0.147_675_539_298_007_47;
        let u = kl_inverse_upper(p(0.1), c(0.01)).value();
        assert!(u >= exact - 1e-16, "{u}");
        assert!(u - exact <= 1e-12, "{u}");
    }

    #[test]
    fn inverse_saturates_for_huge_slack() {
        assert_eq!(kl_inverse_upper(p(0.5), c(100.0)).value(), 1.0);
        assert_eq!(kl_inverse_upper(p(0.99), c(5.0)).value(), 1.0);
    }

    #[test]
    fn inverse_unresolvable_root_rounds_up_to_one() {
        // root sits about 1e-9 below 1: representable floats there are too
        // coarse to meet the round-trip tolerance
        let q = 0.9;
        let target = 1.0 - 1e-9;
        let slack = kl_raw(q, target);
        let u = kl_inverse_upper(p(q), c(slack)).value();
        assert!(u >= target);
        if u < 1.0 {
            assert!(kl_raw(q, u) - slack <= 1e-10);
        }
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_relaxation(p(0.37), c(0.0)).value(), 0.37);
        assert_eq!(pinsker_relaxation(p(0.9), c(0.5)).value(), 1.0);
        assert_abs_diff_eq!(pinsker_relaxation(p(0.1), c(0.02)).value(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let q = Probability::<f32>::new(0.1).unwrap();
        let s = SlackBudget::<f32>::new(0.01).unwrap();
        let u = kl_inverse_upper(q, s).value();
        assert!(u >= 0.147_675_54 - 1e-7);
        assert!(u <= 0.147_675_54 + 1e-5);
        assert!(u <= pinsker_relaxation(q, s).value());
    }
}
