//! Per-feature p-value matrix for a single dataset.
//!
//! For every feature column, every configured (learner, method) pair tests
//! S = {that column} against the remaining columns on one shared
//! train/holdout split. Learner failures mark their cell and the run
//! continues; the matrix always comes back fully shaped.

use std::io::Write;
use std::path::Path;

use crate::cit::{run_method, Method, TestConfig};
use crate::data::{split, Dataset, FeatureSet};
use crate::error::{Error, Result};
use crate::learners::{Learner, LearnerSpec};
use crate::seed;

#[derive(Clone, Debug)]
pub struct AnalyzeConfig {
    pub methods: Vec<Method>,
    pub learners: Vec<LearnerSpec>,
    /// Permutations per rank test.
    pub b: usize,
    pub alpha: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub smoothed_pvalue: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            // the refit-free variants plus the full permutation test; the
            // network learner is opt-in, it is the slowest and least stable
            methods: vec![Method::Coinp, Method::ApproxCoinp, Method::ApproxCpi],
            learners: vec![
                LearnerSpec::Ols,
                LearnerSpec::RandomForest(Default::default()),
            ],
            b: 100,
            alpha: 0.05,
            holdout_fraction: 0.5,
            seed: 42,
            smoothed_pvalue: false,
        }
    }
}

/// One matrix cell: a p-value or the reason that (learner, method, feature)
/// combination failed.
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyzeCell {
    P(f64),
    Fail(String),
}

#[derive(Clone, Debug)]
pub struct AnalyzeRow {
    pub learner: String,
    pub method: Method,
    pub cells: Vec<AnalyzeCell>,
}

/// Rows are (learner x method) in configuration order; columns follow the
/// dataset's feature order.
#[derive(Clone, Debug)]
pub struct PvalueMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<AnalyzeRow>,
}

impl PvalueMatrix {
    /// Renders the matrix in the `learner,method,<feature names..>` schema.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("learner,method");
        for name in &self.feature_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.learner);
            out.push(',');
            out.push_str(row.method.as_str());
            for cell in &row.cells {
                out.push(',');
                match cell {
                    AnalyzeCell::P(p) => out.push_str(&p.to_string()),
                    AnalyzeCell::Fail(_) => out.push_str("FAIL"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }
}

/// Tests every feature with every configured (learner, method) pair.
/// `workers` bounds the permutation-refit parallelism (0 = default pool).
pub fn analyze_dataset_with_workers(
    dataset: &Dataset,
    cfg: &AnalyzeConfig,
    workers: usize,
) -> Result<PvalueMatrix> {
    crate::exec::with_workers(workers, || analyze_dataset(dataset, cfg))
}

/// Tests every feature with every configured (learner, method) pair.
pub fn analyze_dataset(dataset: &Dataset, cfg: &AnalyzeConfig) -> Result<PvalueMatrix> {
    if cfg.methods.is_empty() || cfg.learners.is_empty() {
        return Err(Error::invalid("analyze needs at least one method and one learner"));
    }
    if cfg.b == 0 {
        return Err(Error::invalid("b must be at least 1"));
    }
    let (train, holdout) = split(
        dataset,
        cfg.holdout_fraction,
        seed::derive(cfg.seed, &[seed::tag("split")]),
    )?;
    let mut rows = Vec::with_capacity(cfg.learners.len() * cfg.methods.len());
    for learner in &cfg.learners {
        for &method in &cfg.methods {
            let cells = (0..dataset.n_features())
                .map(|feature| {
                    let test_cfg = TestConfig {
                        s: FeatureSet::single(feature),
                        b: cfg.b,
                        alpha: cfg.alpha,
                        seed: seed::derive(
                            cfg.seed,
                            &[
                                seed::tag(learner.name()),
                                seed::tag(method.as_str()),
                                feature as u64,
                            ],
                        ),
                        smoothed_pvalue: cfg.smoothed_pvalue,
                    };
                    match run_method(method, learner, &train, &holdout, &test_cfg) {
                        Ok(result) => AnalyzeCell::P(result.p_value),
                        Err(e) => AnalyzeCell::Fail(e.to_string()),
                    }
                })
                .collect();
            rows.push(AnalyzeRow {
                learner: learner.name().to_string(),
                method,
                cells,
            });
        }
    }
    Ok(PvalueMatrix {
        feature_names: dataset.column_names().to_vec(),
        rows,
    })
}
