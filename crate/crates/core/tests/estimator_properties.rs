use gibbs_cert::estimators::{subsample_index, Remapped, SyntheticKind, SyntheticPosterior};
use gibbs_cert::summation::compensated_sum;
use gibbs_cert::{
    estimate_classic, estimate_fresh, estimate_subsampled, estimate_testset, kl_inverse_upper,
    Certifier, DatasetHandle, LossOracle, PosteriorSampler, Probability, SlackBudget,
};
use proptest::prelude::*;

fn bernoulli(means: Vec<f64>, seed: u64) -> (SyntheticPosterior, DatasetHandle) {
    let data = DatasetHandle::new(means.len()).unwrap();
    (SyntheticPosterior::new(SyntheticKind::Bernoulli, means, seed).unwrap(), data)
}

/// Means alternating around `risk` so that their average is exactly `risk`.
fn means_around(risk: f64, m: usize) -> Vec<f64> {
    let d = risk.min(1.0 - risk) / 2.0;
    (0..m).map(|j| if j % 2 == 0 { risk - d } else { risk + d }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fresh_slack_is_classic_over_m(n in 1u64..50, m in 1usize..40, delta in 0.001..0.999f64, seed: u64) {
        let (post, data) = bernoulli(vec![0.4; m], seed);
        let classic = estimate_classic(&post, &data, &post, n, delta).unwrap();
        let fresh = estimate_fresh(&post, &data, &post, n, delta).unwrap();
        let ratio = classic.slack / fresh.slack;
        prop_assert!((ratio - m as f64).abs() <= 4.0 * f64::EPSILON * m as f64);
        for q in [0.0, 0.1, 0.5, 0.9] {
            let pq = Probability::new(q).unwrap();
            prop_assert!(
                kl_inverse_upper(pq, SlackBudget::new(fresh.slack).unwrap()).value()
                    <= kl_inverse_upper(pq, SlackBudget::new(classic.slack).unwrap()).value()
            );
        }
    }

    #[test]
    fn point_mass_means_match(losses in prop::collection::vec(0.0..=1.0f64, 1..30), n in 1u64..20, s1: u64, s2: u64) {
        let m = losses.len();
        let exact = compensated_sum(&losses) / m as f64;
        let post = SyntheticPosterior::new(SyntheticKind::PointMass, losses, s1).unwrap();
        let other = post.with_seed(s2);
        let data = DatasetHandle::new(m).unwrap();
        let classic = estimate_classic(&post, &data, &post, n, 0.1).unwrap();
        let fresh = estimate_fresh(&other, &data, &other, n, 0.1).unwrap();
        let tol = 1e-12 * (n as f64) * (m as f64);
        prop_assert!((classic.empirical_mean - exact).abs() <= tol);
        prop_assert!((fresh.empirical_mean - exact).abs() <= tol);
        prop_assert!((classic.empirical_mean - fresh.empirical_mean).abs() <= tol);
    }
}

#[test]
fn certificates_follow_index_discipline() {
    let means = vec![0.1, 0.7, 0.35, 0.5, 0.9];
    let (post, data) = bernoulli(means.clone(), 2024);
    let (n, m) = (7u64, means.len() as u64);
    let cert = estimate_fresh(&post, &data, &post, n, 0.05).unwrap();

    // evaluate summands in reverse order, each from (seed, t, j) alone
    let mut values = vec![0.0; (n * m) as usize];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let t = j + m * i;
            let h = post.draw(t).unwrap();
            values[t as usize] = post.loss(&h, j as usize).unwrap();
        }
    }
    let mean = compensated_sum(&values) / (n * m) as f64;
    assert_eq!(mean.to_bits(), cert.empirical_mean.to_bits());

    let seq = Certifier::new().parallel(false).fresh(&post, &data, &post, n, 0.05).unwrap();
    assert_eq!(seq.to_canonical_json(), cert.to_canonical_json());
}

#[test]
fn subsampled_uses_index_stream() {
    let means: Vec<f64> = (0..50).map(|j| j as f64 / 49.0).collect();
    let post = SyntheticPosterior::new(SyntheticKind::PointMass, means.clone(), 1).unwrap();
    let data = DatasetHandle::new(50).unwrap();
    let cert = estimate_subsampled(&post, &data, &post, 200, 0.05, 77).unwrap();
    let values: Vec<f64> = (0..200).map(|t| means[subsample_index(77, t, 50)]).collect();
    assert_eq!(cert.empirical_mean, compensated_sum(&values) / 200.0);
    assert_eq!(cert.summands, 200);
}

#[test]
fn fresh_mean_is_unbiased() {
    // E[empirical mean] = (1/m) sum p_j, checked within 3 standard errors
    let means = vec![0.05, 0.2, 0.5, 0.65, 0.9, 0.33];
    let target = compensated_sum(&means) / means.len() as f64;
    let data = DatasetHandle::new(means.len()).unwrap();
    let runs = 10_000u64;
    let n = 2u64;
    let base = SyntheticPosterior::new(SyntheticKind::Bernoulli, means.clone(), 0).unwrap();
    let estimates: Vec<f64> = (0..runs)
        .map(|seed| {
            let post = base.with_seed(seed);
            Certifier::new().parallel(false).fresh(&post, &data, &post, n, 0.1).unwrap().empirical_mean
        })
        .collect();
    let avg = compensated_sum(&estimates) / runs as f64;
    let var_single: f64 = means.iter().map(|p| p * (1.0 - p)).sum::<f64>()
        / (means.len() as f64).powi(2)
        / n as f64;
    let se = (var_single / runs as f64).sqrt();
    assert!((avg - target).abs() <= 3.0 * se, "avg {avg}, target {target}, se {se}");
}

fn coverage_rate(risk: f64, trials: u64, mut one: impl FnMut(u64) -> f64) -> f64 {
    let covered = (0..trials).filter(|&seed| one(seed) >= risk).count();
    covered as f64 / trials as f64
}

#[test]
fn fresh_coverage_at_desk_scale() {
    let risk = 0.3;
    let means = means_around(risk, 100);
    let (base, data) = bernoulli(means, 0);
    let rate = coverage_rate(risk, 500, |seed| {
        let post = base.with_seed(seed);
        estimate_fresh(&post, &data, &post, 5, 0.1).unwrap().bound
    });
    let floor = 0.9 - 3.0 * (0.09f64 / 500.0).sqrt();
    assert!(rate >= floor, "coverage {rate}");
}

#[test]
fn testset_coverage_on_population() {
    let risk = 0.2;
    let population = means_around(risk, 400);
    let base = SyntheticPosterior::new(SyntheticKind::Bernoulli, population, 0).unwrap();
    let (m, n) = (50usize, 10u64);
    let data = DatasetHandle::new(m).unwrap();
    let rate = coverage_rate(risk, 500, |seed| {
        let post = base.with_seed(seed);
        let stream = Remapped::uniform_stream(&post, 400, m, seed ^ 0x5eed);
        estimate_testset(&post, &data, &stream, n, 0.05, true).unwrap().bound
    });
    let floor = 0.95 - 3.0 * (0.05f64 * 0.95 / 500.0).sqrt();
    assert!(rate >= floor, "coverage {rate}");
}

#[test]
fn subsampled_coverage_on_large_dataset() {
    let risk = 0.25;
    let m = 1_000_000;
    let base = SyntheticPosterior::new(SyntheticKind::Bernoulli, means_around(risk, m), 0).unwrap();
    let data = DatasetHandle::new(m).unwrap();
    let trials = 200;
    let rate = coverage_rate(risk, trials, |seed| {
        let post = base.with_seed(seed);
        estimate_subsampled(&post, &data, &post, 10_000, 0.05, seed.wrapping_add(1 << 40))
            .unwrap()
            .bound
    });
    let floor = 0.95 - 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt();
    assert!(rate >= floor, "coverage {rate}");
}

#[test]
fn serial_oracle_forces_sequential_evaluation() {
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

    struct Serial {
        busy: AtomicBool,
        calls: AtomicUsize,
    }
    impl LossOracle<gibbs_cert::estimators::SyntheticHypothesis> for Serial {
        fn loss(&self, _: &gibbs_cert::estimators::SyntheticHypothesis, _: usize) -> gibbs_cert::Result<f64> {
            assert!(!self.busy.swap(true, Ordering::SeqCst), "concurrent call");
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::yield_now();
            self.busy.store(false, Ordering::SeqCst);
            Ok(0.25)
        }
        fn concurrent(&self) -> bool {
            false
        }
    }
    let (post, data) = bernoulli(vec![0.5; 20], 3);
    let oracle = Serial { busy: AtomicBool::new(false), calls: AtomicUsize::new(0) };
    let cert = estimate_fresh(&post, &data, &oracle, 20, 0.1).unwrap();
    assert_eq!(oracle.calls.load(Ordering::SeqCst), 400);
    assert_eq!(cert.empirical_mean, 0.25);
}
