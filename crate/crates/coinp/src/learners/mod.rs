//! Regression learners and risk estimation.
//!
//! A [`Learner`] turns a training dataset (plus a seed) into a fitted
//! [`Predictor`]; fitting the same learner on the same data with the same
//! seed always yields the same predictions. The harness drives everything
//! through [`LearnerSpec`], the named configuration the grid iterates over;
//! tests can substitute their own `Learner` impls (e.g. a fit counter).

use crate::data::Dataset;
use crate::error::{Error, Result};

pub mod forest;
pub mod mlp;
pub mod ols;

pub use forest::{ForestParams, RandomForest};
pub use mlp::{Mlp, MlpParams};
pub use ols::Ols;

/// A fitted prediction function. Prediction is deterministic and total on
/// finite inputs.
pub trait Predictor: Send + Sync {
    /// Predicts the label for one feature row of length `p`.
    fn predict(&self, row: &[f64]) -> f64;
}

/// A prediction method: anything that maps a dataset to a predictor.
pub trait Learner: Send + Sync {
    /// Short stable name, used in records and report files.
    fn name(&self) -> &str;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>>;
}

/// Named learner configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum LearnerSpec {
    Ols,
    RandomForest(ForestParams),
    Mlp(MlpParams),
}

impl LearnerSpec {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ols" => Ok(LearnerSpec::Ols),
            "random_forest" => Ok(LearnerSpec::RandomForest(ForestParams::default())),
            "mlp" => Ok(LearnerSpec::Mlp(MlpParams::default())),
            other => Err(Error::invalid(format!(
                "unknown learner `{other}` (expected ols, random_forest, or mlp)"
            ))),
        }
    }
}

impl Learner for LearnerSpec {
    fn name(&self) -> &str {
        match self {
            LearnerSpec::Ols => "ols",
            LearnerSpec::RandomForest(_) => "random_forest",
            LearnerSpec::Mlp(_) => "mlp",
        }
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        match self {
            LearnerSpec::Ols => Ols.fit(train, seed),
            LearnerSpec::RandomForest(params) => RandomForest {
                params: params.clone(),
            }
            .fit(train, seed),
            LearnerSpec::Mlp(params) => Mlp {
                params: params.clone(),
            }
            .fit(train, seed),
        }
    }
}

/// The squared loss `(y - y_hat)^2`.
pub fn squared_loss(y: f64, y_hat: f64) -> f64 {
    let d = y - y_hat;
    d * d
}

/// Mean squared loss over a holdout set, with the sample size it was
/// computed from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub n_holdout: usize,
}

/// Per-row squared losses of `f` on `holdout`, in row order.
pub fn pointwise_losses(f: &dyn Predictor, holdout: &Dataset) -> Result<Vec<f64>> {
    if holdout.n_rows() == 0 {
        return Err(Error::invalid("holdout dataset is empty"));
    }
    Ok((0..holdout.n_rows())
        .map(|i| squared_loss(holdout.label(i), f.predict(holdout.row(i))))
        .collect())
}

/// Empirical risk: the mean of the pointwise losses.
pub fn empirical_risk(f: &dyn Predictor, holdout: &Dataset) -> Result<RiskEstimate> {
    let losses = pointwise_losses(f, holdout)?;
    let value = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(RiskEstimate {
        value,
        n_holdout: losses.len(),
    })
}
