//! The four conditional-independence tests.
//!
//! All four ask whether permuting the rows of the tested columns S (which
//! breaks any link between S and the rest of the data while preserving the
//! marginals) costs predictive performance on a holdout set:
//!
//! - [`coinp`]: refit on each of B permuted training sets and rank the
//!   observed holdout risk among the B permuted risks. The rank is the
//!   p-value.
//! - [`approx_coinp`]: one fit; rank the observed risk among risks of the
//!   same fit on B permuted holdouts.
//! - [`cpi`]: one extra fit on a single permuted training set; one-sided
//!   paired t-test on the per-row holdout loss differences.
//! - [`approx_cpi`]: same t-test with the original fit evaluated on a
//!   permuted holdout.
//!
//! With the `parallel` feature, the B refit iterations run in parallel;
//! permutations and fit seeds are drawn up front so results are identical
//! to the sequential build.

use std::fmt;

use crate::data::{permute_columns, Dataset, FeatureSet, Permutation};
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::{empirical_risk, pointwise_losses, Learner};
use crate::seed;

mod student_t;

pub use student_t::{regularized_incomplete_beta, student_t_cdf};

/// Which test to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Coinp,
    ApproxCoinp,
    Cpi,
    ApproxCpi,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Coinp,
        Method::ApproxCoinp,
        Method::Cpi,
        Method::ApproxCpi,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Coinp => "coinp",
            Method::ApproxCoinp => "approx_coinp",
            Method::Cpi => "cpi",
            Method::ApproxCpi => "approx_cpi",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "coinp" => Ok(Method::Coinp),
            "approx_coinp" => Ok(Method::ApproxCoinp),
            "cpi" => Ok(Method::Cpi),
            "approx_cpi" => Ok(Method::ApproxCpi),
            other => Err(Error::invalid(format!(
                "unknown method `{other}` (expected coinp, approx_coinp, cpi, or approx_cpi)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Configuration shared by the four tests.
#[derive(Clone, Debug)]
pub struct TestConfig {
    /// The tested column subset S.
    pub s: FeatureSet,
    /// Number of permutations B (rank methods).
    pub b: usize,
    /// Significance level, recorded for rejection decisions downstream.
    pub alpha: f64,
    pub seed: u64,
    /// Report `(1 + count) / (1 + B)` instead of the raw rank `count / B`.
    /// The raw rank can be exactly 0; the smoothed version cannot.
    pub smoothed_pvalue: bool,
}

impl TestConfig {
    pub fn new(s: FeatureSet, seed: u64) -> TestConfig {
        TestConfig {
            s,
            b: 100,
            alpha: 0.05,
            seed,
            smoothed_pvalue: false,
        }
    }

    fn validate(&self, train: &Dataset, holdout: &Dataset) -> Result<()> {
        if self.b == 0 {
            return Err(Error::invalid("b (number of permutations) must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if train.n_features() != holdout.n_features() {
            return Err(Error::invalid(format!(
                "train has {} features but holdout has {}",
                train.n_features(),
                holdout.n_features()
            )));
        }
        self.s.validate_for(train.n_features())
    }
}

/// Outcome of one test.
#[derive(Clone, Debug)]
pub struct TestResult {
    pub method: Method,
    pub p_value: f64,
    /// Holdout risk of the fit on the unpermuted data.
    pub observed_risk: f64,
    /// The B permuted risks, indexed by permutation (rank methods only).
    pub permuted_risks: Option<Vec<f64>>,
    /// t statistic of the paired comparison (t methods only).
    pub t_statistic: Option<f64>,
    pub degrees_of_freedom: Option<usize>,
    /// How many times the learner was fitted.
    pub fit_count: usize,
}

/// Rank p-value: the fraction of permuted risks that the observed risk
/// reaches or exceeds. Ties count toward the numerator, so an observed risk
/// equal to every permuted risk gives p = 1.
pub fn rank_pvalue(observed: f64, permuted: &[f64]) -> Result<f64> {
    if permuted.is_empty() {
        return Err(Error::invalid("permuted risk vector is empty"));
    }
    if !observed.is_finite() || permuted.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("risks must be finite"));
    }
    let count = permuted.iter().filter(|&&r| observed >= r).count();
    Ok(count as f64 / permuted.len() as f64)
}

fn rank_pvalue_with(observed: f64, permuted: &[f64], smoothed: bool) -> Result<f64> {
    if smoothed {
        let count = permuted.iter().filter(|&&r| observed >= r).count();
        Ok((1.0 + count as f64) / (1.0 + permuted.len() as f64))
    } else {
        rank_pvalue(observed, permuted)
    }
}

/// One-sided paired t-test for `mean(d) > 0`. Returns `(p, t, df)` with
/// `t = mean / (sd / sqrt(m))` (sample sd) and `p` the upper t tail.
/// Zero-variance convention: p = 1 when the mean is <= 0, p = 0 when it is
/// positive, with t reported as 0 / +-infinity accordingly.
pub fn paired_t_pvalue(differences: &[f64]) -> Result<(f64, f64, usize)> {
    let m = differences.len();
    if m < 2 {
        return Err(Error::invalid(format!(
            "paired t-test needs at least 2 differences, got {m}"
        )));
    }
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("differences must be finite"));
    }
    let mean = differences.iter().sum::<f64>() / m as f64;
    let var = differences.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let df = m - 1;
    if var == 0.0 {
        return Ok(if mean > 0.0 {
            (0.0, f64::INFINITY, df)
        } else if mean < 0.0 {
            (1.0, f64::NEG_INFINITY, df)
        } else {
            (1.0, 0.0, df)
        });
    }
    let t = mean / (var.sqrt() / (m as f64).sqrt());
    let p = 1.0 - student_t_cdf(t, df)?;
    Ok((p, t, df))
}

fn fit_context(err: Error, context: &str) -> Error {
    match err {
        Error::Fit { message, .. } => Error::Fit {
            context: context.into(),
            message,
        },
        Error::Training(message) => Error::Fit {
            context: context.into(),
            message,
        },
        other => other,
    }
}

/// Full permutation test: refit on each permuted training set and rank the
/// observed holdout risk among the B permuted holdout risks.
///
/// Each iteration draws its training and holdout permutations independently
/// (they are different lengths and the procedure treats the two sets as
/// separate samples). All fits share one derived seed, so a refit differs
/// from the observed fit only through the permuted data.
pub fn coinp(
    learner: &dyn Learner,
    train: &Dataset,
    holdout: &Dataset,
    cfg: &TestConfig,
) -> Result<TestResult> {
    cfg.validate(train, holdout)?;
    let fit_seed = seed::derive(cfg.seed, &[seed::tag("fit")]);
    let f = learner
        .fit(train, fit_seed)
        .map_err(|e| fit_context(e, "observed fit"))?;
    let observed = empirical_risk(f.as_ref(), holdout)?.value;

    let jobs: Vec<(usize, Permutation, Permutation)> = (0..cfg.b)
        .map(|j| {
            let tp = Permutation::sample(
                train.n_rows(),
                seed::derive(cfg.seed, &[seed::tag("train-perm"), j as u64]),
            )?;
            let hp = Permutation::sample(
                holdout.n_rows(),
                seed::derive(cfg.seed, &[seed::tag("holdout-perm"), j as u64]),
            )?;
            Ok((j, tp, hp))
        })
        .collect::<Result<_>>()?;

    let risks: Vec<Result<f64>> = exec::map_collect(jobs, |(j, tp, hp)| {
        let permuted_train = permute_columns(train, &cfg.s, &tp)?;
        let permuted_holdout = permute_columns(holdout, &cfg.s, &hp)?;
        let fj = learner
            .fit(&permuted_train, fit_seed)
            .map_err(|e| fit_context(e, &format!("permutation {j}")))?;
        Ok(empirical_risk(fj.as_ref(), &permuted_holdout)?.value)
    });
    let permuted: Vec<f64> = risks.into_iter().collect::<Result<_>>()?;

    let p_value = rank_pvalue_with(observed, &permuted, cfg.smoothed_pvalue)?;
    Ok(TestResult {
        method: Method::Coinp,
        p_value,
        observed_risk: observed,
        permuted_risks: Some(permuted),
        t_statistic: None,
        degrees_of_freedom: None,
        fit_count: 1 + cfg.b,
    })
}

/// Single-fit variant of [`coinp`]: the original fit is scored on B
/// permuted holdouts.
pub fn approx_coinp(
    learner: &dyn Learner,
    train: &Dataset,
    holdout: &Dataset,
    cfg: &TestConfig,
) -> Result<TestResult> {
    cfg.validate(train, holdout)?;
    let fit_seed = seed::derive(cfg.seed, &[seed::tag("fit")]);
    let f = learner
        .fit(train, fit_seed)
        .map_err(|e| fit_context(e, "observed fit"))?;
    let observed = empirical_risk(f.as_ref(), holdout)?.value;

    let perms: Vec<Permutation> = (0..cfg.b)
        .map(|j| {
            Permutation::sample(
                holdout.n_rows(),
                seed::derive(cfg.seed, &[seed::tag("holdout-perm"), j as u64]),
            )
        })
        .collect::<Result<_>>()?;
    let risks: Vec<Result<f64>> = exec::map_collect(perms, |hp| {
        let permuted_holdout = permute_columns(holdout, &cfg.s, &hp)?;
        Ok(empirical_risk(f.as_ref(), &permuted_holdout)?.value)
    });
    let permuted: Vec<f64> = risks.into_iter().collect::<Result<_>>()?;

    let p_value = rank_pvalue_with(observed, &permuted, cfg.smoothed_pvalue)?;
    Ok(TestResult {
        method: Method::ApproxCoinp,
        p_value,
        observed_risk: observed,
        permuted_risks: Some(permuted),
        t_statistic: None,
        degrees_of_freedom: None,
        fit_count: 1,
    })
}

fn cpi_impl(
    learner: &dyn Learner,
    train: &Dataset,
    holdout: &Dataset,
    cfg: &TestConfig,
    refit: bool,
) -> Result<TestResult> {
    cfg.validate(train, holdout)?;
    if holdout.n_rows() < 2 {
        return Err(Error::invalid("paired comparison needs at least 2 holdout rows"));
    }
    let fit_seed = seed::derive(cfg.seed, &[seed::tag("fit")]);
    let f = learner
        .fit(train, fit_seed)
        .map_err(|e| fit_context(e, "observed fit"))?;
    let losses_observed = pointwise_losses(f.as_ref(), holdout)?;

    let hp = Permutation::sample(
        holdout.n_rows(),
        seed::derive(cfg.seed, &[seed::tag("holdout-perm"), 0]),
    )?;
    let permuted_holdout = permute_columns(holdout, &cfg.s, &hp)?;

    let (losses_permuted, fit_count) = if refit {
        let tp = Permutation::sample(
            train.n_rows(),
            seed::derive(cfg.seed, &[seed::tag("train-perm"), 0]),
        )?;
        let permuted_train = permute_columns(train, &cfg.s, &tp)?;
        let f1 = learner
            .fit(&permuted_train, fit_seed)
            .map_err(|e| fit_context(e, "permuted fit"))?;
        (pointwise_losses(f1.as_ref(), &permuted_holdout)?, 2)
    } else {
        (pointwise_losses(f.as_ref(), &permuted_holdout)?, 1)
    };

    // positive differences mean the permuted side predicts worse
    let differences: Vec<f64> = losses_permuted
        .iter()
        .zip(&losses_observed)
        .map(|(lp, lo)| lp - lo)
        .collect();
    let (p_value, t, df) = paired_t_pvalue(&differences)?;
    let observed = losses_observed.iter().sum::<f64>() / losses_observed.len() as f64;
    Ok(TestResult {
        method: if refit { Method::Cpi } else { Method::ApproxCpi },
        p_value,
        observed_risk: observed,
        permuted_risks: None,
        t_statistic: Some(t),
        degrees_of_freedom: Some(df),
        fit_count,
    })
}

/// Paired-loss comparison of the observed fit against a fit on a
/// once-permuted training set, scored on a once-permuted holdout. Small
/// p-values mean the original model predicts better, i.e. evidence against
/// conditional independence.
pub fn cpi(
    learner: &dyn Learner,
    train: &Dataset,
    holdout: &Dataset,
    cfg: &TestConfig,
) -> Result<TestResult> {
    cpi_impl(learner, train, holdout, cfg, true)
}

/// Single-fit variant of [`cpi`]: the observed fit is scored on both the
/// original and the permuted holdout.
pub fn approx_cpi(
    learner: &dyn Learner,
    train: &Dataset,
    holdout: &Dataset,
    cfg: &TestConfig,
) -> Result<TestResult> {
    cpi_impl(learner, train, holdout, cfg, false)
}

/// Runs the selected method.
pub fn run_method(
    method: Method,
    learner: &dyn Learner,
    train: &Dataset,
    holdout: &Dataset,
    cfg: &TestConfig,
) -> Result<TestResult> {
    match method {
        Method::Coinp => coinp(learner, train, holdout, cfg),
        Method::ApproxCoinp => approx_coinp(learner, train, holdout, cfg),
        Method::Cpi => cpi(learner, train, holdout, cfg),
        Method::ApproxCpi => approx_cpi(learner, train, holdout, cfg),
    }
}
