//! High-probability upper bounds ("certificates") on the Gibbs risk of a
//! randomized predictor, computed from Monte-Carlo loss evaluations.
//!
//! * [`kl`]: binary KL divergence and its certified upper inversion.
//! * [`estimators`]: classic, fresh-sample, test-set and sub-sampled
//!   certification over abstract samplers and loss oracles.
//! * [`tail_lab`]: exact and simulated checks of the underlying tail bounds.
//! * [`cli`]: the `gibbs-cert` command-line front end.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common instantiations. Certificates are always `f64`.

pub mod canonical;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod kl;
pub mod rng;
pub mod scalar;
pub mod summation;
pub mod tail_lab;

pub use error::{Error, Result};
pub use estimators::{
    estimate_classic, estimate_fresh, estimate_subsampled, estimate_testset, recompute_bound,
    Certificate, Certifier, DatasetHandle, LossMatrix, LossOracle, Method, PosteriorSampler,
};
pub use kl::{
    kl, kl_inverse_upper, kl_inverse_upper_with, kl_plus, pinsker_relaxation, InversionConfig,
    Probability, SlackBudget,
};
pub use scalar::Scalar;
pub use summation::CompensatedSum;
pub use tail_lab::{
    budget_compare, chernoff_kl_tail_bound, coverage_simulation, exact_lower_tail,
    verify_theorem3, BudgetComparison, CoverageReport, HeterogeneousBernoulliSpec, TailReport,
};

pub type Probability64 = Probability<f64>;
pub type Probability32 = Probability<f32>;
pub type SlackBudget64 = SlackBudget<f64>;
pub type SlackBudget32 = SlackBudget<f32>;
pub type InversionConfig64 = InversionConfig<f64>;
pub type InversionConfig32 = InversionConfig<f32>;
pub type BernoulliSpec64 = HeterogeneousBernoulliSpec<f64>;
pub type BernoulliSpec32 = HeterogeneousBernoulliSpec<f32>;
pub type TailReport64 = TailReport<f64>;
pub type TailReport32 = TailReport<f32>;
