//! Monte Carlo estimation of misclassification, false-reject and false-alarm
//! probabilities, sweeps over `n` and `lambda`, and empirical exponent fits.
//!
//! Trial `t` of a scenario with seed `S` draws its data from the child seed
//! `(S, TRIAL_DATA, t)` and its test randomness from `(S, TRIAL_TEST, t)`.
//! Sweeps reuse `S` at every grid point, so curves are paired trial by
//! trial. Trials run on a rayon pool; per-trial outcomes are collected in
//! trial order and summed, so results do not depend on the worker count.

use rayon::prelude::*;

use crate::detect::{
    test_known_with, test_unknown_with, Hypothesis, KnownTestOptions, UnknownTestOptions,
};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mmd::CachedMmd;
use crate::simgen::{derive_seed, domain, generate, max_outliers, ScenarioSpec};
use crate::theory::gaussian_population_mmd2;

/// Which test a trial runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestChoice {
    Known {
        s: usize,
        max_iterations: usize,
    },
    /// `t_max` is the assumed cap `T` on the outlier count. Decisions larger
    /// than `T` are counted in [`ErrorEstimates::exceeded_t_count`], not
    /// altered.
    Unknown {
        lambda: f64,
        t_max: usize,
    },
}

impl TestChoice {
    pub fn known(s: usize) -> Self {
        TestChoice::Known {
            s,
            max_iterations: KnownTestOptions::DEFAULT_MAX_ITERATIONS,
        }
    }

    /// Unknown-count test with the default cap `T = ceil(M/2) - 1`.
    pub fn unknown(lambda: f64, m: usize) -> Self {
        TestChoice::Unknown {
            lambda,
            t_max: max_outliers(m),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    Correct,
    Misclassified,
    FalseReject,
    FalseAlarm,
}

/// Maps a (truth, decision) pair to exactly one category.
pub fn classify(truth: &Hypothesis, decision: &Hypothesis) -> Classification {
    match (truth, decision) {
        (Hypothesis::Reject, Hypothesis::Reject) => Classification::Correct,
        (Hypothesis::Reject, Hypothesis::Outliers(_)) => Classification::FalseAlarm,
        (Hypothesis::Outliers(_), Hypothesis::Reject) => Classification::FalseReject,
        (Hypothesis::Outliers(t), Hypothesis::Outliers(d)) if t == d => Classification::Correct,
        (Hypothesis::Outliers(_), Hypothesis::Outliers(_)) => Classification::Misclassified,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub truth: Hypothesis,
    pub decision: Hypothesis,
    pub classification: Classification,
}

impl TrialOutcome {
    pub fn new(truth: Hypothesis, decision: Hypothesis) -> Self {
        let classification = classify(&truth, &decision);
        Self {
            truth,
            decision,
            classification,
        }
    }
}

/// Error counts over a batch of trials. Rates are derived from counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorEstimates {
    pub trials: u64,
    pub miscls_count: u64,
    pub false_reject_count: u64,
    pub false_alarm_count: u64,
    /// Unknown test only: decisions whose outlier set exceeded `T`.
    pub exceeded_t_count: u64,
}

/// `p` and its normal-approximation standard error `sqrt(p(1-p)/trials)`.
pub fn rate_and_se(count: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let t = trials as f64;
    let p = count as f64 / t;
    (p, (p * (1.0 - p) / t).sqrt())
}

/// Laplace-smoothed rate `(count + 1) / (trials + 2)`, always in `(0, 1)`.
pub fn smoothed_rate(count: u64, trials: u64) -> f64 {
    (count as f64 + 1.0) / (trials as f64 + 2.0)
}

impl ErrorEstimates {
    fn record(&mut self, c: Classification) {
        self.trials += 1;
        match c {
            Classification::Correct => {}
            Classification::Misclassified => self.miscls_count += 1,
            Classification::FalseReject => self.false_reject_count += 1,
            Classification::FalseAlarm => self.false_alarm_count += 1,
        }
    }

    fn merge(&mut self, other: &ErrorEstimates) {
        self.trials += other.trials;
        self.miscls_count += other.miscls_count;
        self.false_reject_count += other.false_reject_count;
        self.false_alarm_count += other.false_alarm_count;
        self.exceeded_t_count += other.exceeded_t_count;
    }

    pub fn beta_hat(&self) -> f64 {
        rate_and_se(self.miscls_count, self.trials).0
    }

    pub fn zeta_hat(&self) -> f64 {
        rate_and_se(self.false_reject_count, self.trials).0
    }

    pub fn fa_hat(&self) -> f64 {
        rate_and_se(self.false_alarm_count, self.trials).0
    }

    pub fn beta_se(&self) -> f64 {
        rate_and_se(self.miscls_count, self.trials).1
    }

    pub fn zeta_se(&self) -> f64 {
        rate_and_se(self.false_reject_count, self.trials).1
    }

    pub fn fa_se(&self) -> f64 {
        rate_and_se(self.false_alarm_count, self.trials).1
    }

    /// Trials with any error under a non-null truth (misclassification or
    /// false reject; the two events are disjoint).
    pub fn nonnull_error_count(&self) -> u64 {
        self.miscls_count + self.false_reject_count
    }

    /// `beta_hat + zeta_hat` and its standard error.
    pub fn nonnull_error(&self) -> (f64, f64) {
        rate_and_se(self.nonnull_error_count(), self.trials)
    }

    pub fn beta_smoothed(&self) -> f64 {
        smoothed_rate(self.miscls_count, self.trials)
    }

    pub fn zeta_smoothed(&self) -> f64 {
        smoothed_rate(self.false_reject_count, self.trials)
    }

    pub fn fa_smoothed(&self) -> f64 {
        smoothed_rate(self.false_alarm_count, self.trials)
    }
}

fn check_test(scenario: &ScenarioSpec, test: &TestChoice) -> Result<()> {
    match *test {
        TestChoice::Known { s, .. } => {
            if scenario.outliers.len() != s || s == 0 {
                return Err(Error::Config(format!(
                    "known test with s = {s} needs a scenario with exactly s planted outliers; \
                     scenario has {}",
                    scenario.outliers.len()
                )));
            }
        }
        TestChoice::Unknown { lambda, t_max } => {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::Config(format!(
                    "threshold lambda must be finite and > 0; got {lambda}"
                )));
            }
            let cap = max_outliers(scenario.m);
            if t_max == 0 || t_max > cap {
                return Err(Error::Config(format!(
                    "outlier cap T = {t_max} must satisfy 1 <= T <= {cap}"
                )));
            }
            if scenario.outliers.len() > t_max {
                return Err(Error::Config(format!(
                    "scenario plants {} outliers, more than T = {t_max}",
                    scenario.outliers.len()
                )));
            }
        }
    }
    Ok(())
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `trials` trials of `scenario`, evaluating every test in `tests` on
/// the same data and test seed. Column `k` of the result equals
/// `run_trials(scenario, kernel, tests[k], trials, _)`.
///
/// `jobs = 0` uses rayon's global pool.
pub fn evaluate_trials(
    scenario: &ScenarioSpec,
    kernel: &KernelSpec,
    tests: &[TestChoice],
    trials: u64,
    jobs: usize,
) -> Result<Vec<ErrorEstimates>> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    scenario.validate()?;
    for t in tests {
        check_test(scenario, t)?;
    }
    let truth = if scenario.is_null() {
        Hypothesis::Reject
    } else {
        Hypothesis::Outliers(scenario.outliers.clone())
    };

    let run_one = |t: u64| -> Result<Vec<ErrorEstimates>> {
        let trial_scenario = ScenarioSpec {
            seed: derive_seed(scenario.seed, domain::TRIAL_DATA, t),
            ..scenario.clone()
        };
        let test_seed = derive_seed(scenario.seed, domain::TRIAL_TEST, t);
        let seqs = generate(&trial_scenario)?;
        let cache = CachedMmd::new(&seqs, kernel);
        tests
            .iter()
            .map(|test| {
                let mut est = ErrorEstimates::default();
                let decision = match *test {
                    TestChoice::Known { s, max_iterations } => {
                        let opts = KnownTestOptions {
                            s,
                            max_iterations,
                            seed: test_seed,
                        };
                        test_known_with(&cache, &opts)?.0
                    }
                    TestChoice::Unknown { lambda, t_max } => {
                        let opts = UnknownTestOptions {
                            lambda,
                            seed: test_seed,
                        };
                        let d = test_unknown_with(&cache, &opts)?.0;
                        if d.outlier_set().is_some_and(|b| b.len() > t_max) {
                            est.exceeded_t_count += 1;
                        }
                        d
                    }
                };
                est.record(classify(&truth, &decision));
                Ok(est)
            })
            .collect()
    };

    let per_trial: Vec<Vec<ErrorEstimates>> = with_pool(jobs, || {
        (0..trials)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>>>()
    })??;

    let mut totals = vec![ErrorEstimates::default(); tests.len()];
    for row in &per_trial {
        for (total, est) in totals.iter_mut().zip(row) {
            total.merge(est);
        }
    }
    Ok(totals)
}

/// Monte Carlo error estimates for one test on one scenario.
pub fn run_trials(
    scenario: &ScenarioSpec,
    kernel: &KernelSpec,
    test: TestChoice,
    trials: u64,
    jobs: usize,
) -> Result<ErrorEstimates> {
    Ok(evaluate_trials(scenario, kernel, &[test], trials, jobs)?[0])
}

/// One grid point of an `n` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    /// One entry per test, in the order the tests were given.
    pub estimates: Vec<ErrorEstimates>,
}

/// Runs several tests at each `n` in `n_values`, in the given order, reusing
/// the base seed at every point.
pub fn sweep_n_multi(
    base: &ScenarioSpec,
    kernel: &KernelSpec,
    tests: &[TestChoice],
    n_values: &[usize],
    trials: u64,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    n_values
        .iter()
        .map(|&n| {
            let scenario = ScenarioSpec { n, ..base.clone() };
            Ok(SweepRow {
                n,
                estimates: evaluate_trials(&scenario, kernel, tests, trials, jobs)?,
            })
        })
        .collect()
}

/// Error estimates for one test as a function of `n`.
pub fn sweep_n(
    base: &ScenarioSpec,
    kernel: &KernelSpec,
    test: TestChoice,
    n_values: &[usize],
    trials: u64,
    jobs: usize,
) -> Result<Vec<(usize, ErrorEstimates)>> {
    Ok(
        sweep_n_multi(base, kernel, &[test], n_values, trials, jobs)?
            .into_iter()
            .map(|row| (row.n, row.estimates[0]))
            .collect(),
    )
}

/// One grid point of a threshold sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaRow {
    pub alpha: f64,
    pub lambda: f64,
    /// Under the planted-outlier scenario.
    pub nonnull: ErrorEstimates,
    /// Under the all-nominal scenario with the same trial seeds.
    pub null: ErrorEstimates,
}

/// Unknown-count test at `lambda = alpha * MMD^2(f_N, f_A)` for each alpha,
/// under both `base` (which must plant outliers) and its null counterpart.
pub fn sweep_lambda(
    base: &ScenarioSpec,
    kernel: &KernelSpec,
    alpha_values: &[f64],
    n: usize,
    trials: u64,
    jobs: usize,
) -> Result<Vec<LambdaRow>> {
    if let Some(bad) = alpha_values.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1); got {bad}"
        )));
    }
    if base.is_null() {
        return Err(Error::Config(
            "threshold sweep needs a scenario with planted outliers".into(),
        ));
    }
    let mmd2 = gaussian_population_mmd2(&base.nominal, &base.anomalous, kernel.sigma0())?;
    let t_max = max_outliers(base.m);
    let tests: Vec<TestChoice> = alpha_values
        .iter()
        .map(|a| TestChoice::Unknown {
            lambda: a * mmd2,
            t_max,
        })
        .collect();
    let planted = ScenarioSpec { n, ..base.clone() };
    let null = ScenarioSpec {
        outliers: Default::default(),
        ..planted.clone()
    };
    let nonnull_est = evaluate_trials(&planted, kernel, &tests, trials, jobs)?;
    let null_est = evaluate_trials(&null, kernel, &tests, trials, jobs)?;
    Ok(alpha_values
        .iter()
        .zip(tests.iter())
        .zip(nonnull_est.into_iter().zip(null_est))
        .map(|((&alpha, test), (nonnull, null))| {
            let TestChoice::Unknown { lambda, .. } = *test else {
                unreachable!()
            };
            LambdaRow {
                alpha,
                lambda,
                nonnull,
                null,
            }
        })
        .collect())
}

/// Least-squares fit of `-ln(rate)` against `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    /// Empirical exponent, nats per sample.
    pub slope: f64,
    pub intercept: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares of `-ln(rate)` on `n` over `(n, rate)` points.
/// Needs at least 3 points with rates strictly inside `(0, 1)`.
pub fn fit_log_linear(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, p)| *p > 0.0 && *p < 1.0)
        .map(|&(n, p)| (n, -p.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::Estimation(format!(
            "need at least 3 points with rate in (0, 1); got {}",
            usable.len()
        )));
    }
    let k = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::Estimation("all points share the same n".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = usable.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    let (n_min, n_max) = usable
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    Ok(ExponentFit {
        slope,
        intercept,
        n_min,
        n_max,
        r_squared,
        points: usable.len(),
    })
}

/// Exponent fit over `(n, error count, trials)` points using Laplace-smoothed
/// rates. Points whose raw rate is exactly 0 or 1 are dropped unless
/// `include_saturated` is set.
pub fn fit_exponent(points: &[(usize, u64, u64)], include_saturated: bool) -> Result<ExponentFit> {
    let rates: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c, t)| *t > 0 && (include_saturated || (*c > 0 && c < t)))
        .map(|&(n, c, t)| (n as f64, smoothed_rate(c, t)))
        .collect();
    fit_log_linear(&rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::GaussianSpec;

    #[test]
    fn classification_is_total() {
        let b = Hypothesis::outliers([0, 1]);
        let other = Hypothesis::outliers([0, 2]);
        let r = Hypothesis::Reject;
        assert_eq!(classify(&b, &b), Classification::Correct);
        assert_eq!(classify(&b, &other), Classification::Misclassified);
        assert_eq!(classify(&b, &r), Classification::FalseReject);
        assert_eq!(classify(&r, &r), Classification::Correct);
        assert_eq!(classify(&r, &b), Classification::FalseAlarm);
    }

    #[test]
    fn rates_and_errors() {
        let e = ErrorEstimates {
            trials: 100,
            miscls_count: 10,
            false_reject_count: 5,
            false_alarm_count: 0,
            exceeded_t_count: 0,
        };
        assert_eq!(e.beta_hat(), 0.1);
        assert!((e.beta_se() - (0.1f64 * 0.9 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.nonnull_error().0, 0.15);
        assert_eq!(e.fa_hat(), 0.0);
        assert_eq!(e.fa_smoothed(), 1.0 / 102.0);
        assert!(e.fa_smoothed() > 0.0 && e.beta_smoothed() < 1.0);
    }

    #[test]
    fn fit_recovers_exact_exponent() {
        let c = 0.07;
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let n = 5.0 * i as f64;
                (n, (-c * n).exp())
            })
            .collect();
        let fit = fit_log_linear(&pts).unwrap();
        assert!((fit.slope - c).abs() < 1e-9);
        assert!(fit.intercept.abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_from_counts_within_smoothing_bias() {
        let c = 0.05;
        let trials = 1_000_000_000u64;
        let pts: Vec<(usize, u64, u64)> = (1..=8)
            .map(|i| {
                let n = 10 * i;
                let count = ((-c * n as f64).exp() * trials as f64).round() as u64;
                (n, count, trials)
            })
            .collect();
        let fit = fit_exponent(&pts, false).unwrap();
        assert!((fit.slope - c).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn fit_constant_rates_gives_zero_slope() {
        let pts: Vec<(usize, u64, u64)> = (1..=5).map(|i| (i * 10, 300, 1000)).collect();
        let fit = fit_exponent(&pts, false).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_needs_three_unsaturated_points() {
        let pts = [(10, 5, 100), (20, 0, 100), (30, 100, 100), (40, 1, 100)];
        assert!(matches!(
            fit_exponent(&pts, false),
            Err(Error::Estimation(_))
        ));
        assert!(fit_exponent(&pts, true).is_ok());
    }

    fn constant_like_scenario() -> ScenarioSpec {
        // Tiny variance and a wide gap: effectively separated constants.
        ScenarioSpec::with_leading_outliers(
            8,
            10,
            GaussianSpec::new(0.0, 1e-9).unwrap(),
            GaussianSpec::new(3.0, 1e-9).unwrap(),
            2,
            17,
        )
    }

    #[test]
    fn separated_scenario_has_no_errors() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let s = constant_like_scenario();
        let est = run_trials(&s, &k, TestChoice::known(2), 100, 0).unwrap();
        assert_eq!(est.trials, 100);
        assert_eq!(est.miscls_count, 0);
        let est = run_trials(&s, &k, TestChoice::unknown(0.5, 8), 100, 0).unwrap();
        assert_eq!(est.nonnull_error_count(), 0);
    }

    #[test]
    fn threshold_above_kernel_range_never_alarms() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let mut s = constant_like_scenario();
        s.nominal = GaussianSpec::new(0.0, 1.0).unwrap();
        s.outliers.clear();
        let est = run_trials(
            &s,
            &k,
            TestChoice::unknown(2.0 * k.bound() + 0.1, 8),
            100,
            0,
        )
        .unwrap();
        assert_eq!(est.false_alarm_count, 0);
    }

    #[test]
    fn inconsistent_configurations_rejected() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let s = constant_like_scenario();
        assert!(run_trials(&s, &k, TestChoice::known(1), 10, 0).is_err());
        assert!(run_trials(&s, &k, TestChoice::known(2), 0, 0).is_err());
        let bad_t = TestChoice::Unknown {
            lambda: 0.5,
            t_max: 1,
        };
        assert!(run_trials(&s, &k, bad_t, 10, 0).is_err());
        let mut null = s.clone();
        null.outliers.clear();
        assert!(run_trials(&null, &k, TestChoice::known(2), 10, 0).is_err());
        assert!(sweep_lambda(&s, &k, &[0.0], 10, 10, 0).is_err());
        assert!(sweep_lambda(&s, &k, &[1.0], 10, 10, 0).is_err());
        assert!(sweep_lambda(&null, &k, &[0.5], 10, 10, 0).is_err());
    }

    #[test]
    fn sweeps_preserve_order_and_match_single_runs() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let base = ScenarioSpec::with_leading_outliers(
            6,
            10,
            GaussianSpec::new(0.0, 1.0).unwrap(),
            GaussianSpec::new(1.5, 1.0).unwrap(),
            1,
            3,
        );
        let test = TestChoice::known(1);
        let table = sweep_n(&base, &k, test, &[30, 10, 20], 50, 0).unwrap();
        assert_eq!(
            table.iter().map(|r| r.0).collect::<Vec<_>>(),
            vec![30, 10, 20]
        );
        let single = run_trials(
            &ScenarioSpec {
                n: 10,
                ..base.clone()
            },
            &k,
            test,
            50,
            0,
        )
        .unwrap();
        assert_eq!(table[1].1, single);
        let one = sweep_n(&base, &k, test, &[10], 50, 0).unwrap();
        assert_eq!(one, vec![(10, single)]);
    }

    #[test]
    fn results_independent_of_job_count() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let base = ScenarioSpec::with_leading_outliers(
            6,
            8,
            GaussianSpec::new(0.0, 1.0).unwrap(),
            GaussianSpec::new(1.0, 1.0).unwrap(),
            2,
            99,
        );
        let tests = [TestChoice::known(2), TestChoice::unknown(0.1, 6)];
        let a = evaluate_trials(&base, &k, &tests, 200, 1).unwrap();
        let b = evaluate_trials(&base, &k, &tests, 200, 3).unwrap();
        assert_eq!(a, b);
        let single = run_trials(&base, &k, tests[1], 200, 2).unwrap();
        assert_eq!(a[1], single);
    }
}
