//! Replicated experiment execution over a scenario x method x learner grid.
//!
//! Each replication freshly generates a scenario dataset, splits it, runs
//! one test, and yields one [`ReplicationRecord`]. Every random stream is
//! derived from the master seed and the replication's grid coordinates, so
//! the record list is identical for any worker count. Failed replications
//! become failure records rather than disappearing; a grid cell with more
//! than 5% failures aborts the run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::cit::{run_method, Method, TestConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::learners::{Learner, LearnerSpec};
use crate::scenarios::{generate, ScenarioConfig, ScenarioId, ScenarioOverrides};
use crate::seed;

mod records;

pub use records::{read_records, write_records, RECORDS_HEADER};

/// The experiment grid: the cross-product of scenarios, effect sizes,
/// sample sizes, methods, and learners, replicated `replications` times.
#[derive(Clone, Debug)]
pub struct ExperimentGrid {
    pub scenarios: Vec<ScenarioId>,
    pub beta_s_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub learners: Vec<LearnerSpec>,
    pub replications: usize,
    /// Permutations per rank test.
    pub b: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub holdout_fraction: f64,
    pub smoothed_pvalue: bool,
    pub overrides: ScenarioOverrides,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            scenarios: ScenarioId::ALL.to_vec(),
            beta_s_values: vec![0.0, 0.01, 0.1, 0.6],
            n_values: vec![1000],
            methods: Method::ALL.to_vec(),
            learners: vec![LearnerSpec::Ols],
            replications: 200,
            b: 100,
            alpha: 0.05,
            master_seed: 42,
            holdout_fraction: 0.5,
            smoothed_pvalue: false,
            overrides: ScenarioOverrides::default(),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.b == 0 {
            return Err(Error::invalid("b must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must be in (0, 1)"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::invalid("holdout_fraction must be in (0, 1)"));
        }
        if self.scenarios.is_empty()
            || self.beta_s_values.is_empty()
            || self.n_values.is_empty()
            || self.methods.is_empty()
            || self.learners.is_empty()
        {
            return Err(Error::invalid("every grid dimension must be non-empty"));
        }
        if self.beta_s_values.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta_s values must be finite"));
        }
        if self.n_values.iter().any(|&n| n < 4) {
            return Err(Error::invalid("n values must be at least 4 to allow a split"));
        }
        Ok(())
    }

    /// Number of records a run will produce.
    pub fn total_records(&self) -> usize {
        self.scenarios.len()
            * self.beta_s_values.len()
            * self.n_values.len()
            * self.methods.len()
            * self.learners.len()
            * self.replications
    }
}

/// Identifies one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellKey {
    pub scenario: ScenarioId,
    pub beta_s: f64,
    pub n: usize,
    pub method: Method,
    pub learner: String,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/beta_s={}/n={}/{}/{}",
            self.scenario, self.beta_s, self.n, self.method, self.learner
        )
    }
}

/// Outcome marker of one replication.
#[derive(Clone, Debug, PartialEq)]
pub enum RecordStatus {
    Ok,
    Failed(String),
}

impl RecordStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RecordStatus::Ok)
    }

    pub(crate) fn render(&self) -> String {
        match self {
            RecordStatus::Ok => "ok".into(),
            RecordStatus::Failed(msg) => format!("fail:{msg}"),
        }
    }

    pub(crate) fn parse(s: &str) -> Result<RecordStatus> {
        if s == "ok" {
            Ok(RecordStatus::Ok)
        } else if let Some(msg) = s.strip_prefix("fail:") {
            Ok(RecordStatus::Failed(msg.to_string()))
        } else {
            Err(Error::invalid(format!("unknown status `{s}`")))
        }
    }
}

/// One replication's outcome. `p_value` is present exactly when the status
/// is ok.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRecord {
    pub scenario: ScenarioId,
    pub beta_s: f64,
    pub n: usize,
    pub method: Method,
    pub learner: String,
    pub replication: usize,
    pub p_value: Option<f64>,
    /// Physical duration of the replication. Not covered by the determinism
    /// contract: two runs agree on everything except this field.
    pub wall_time_ms: f64,
    pub fit_count: usize,
    pub status: RecordStatus,
}

impl ReplicationRecord {
    pub fn cell(&self) -> CellKey {
        CellKey {
            scenario: self.scenario,
            beta_s: self.beta_s,
            n: self.n,
            method: self.method,
            learner: self.learner.clone(),
        }
    }

    /// The record with wall time zeroed; the value the determinism
    /// guarantees apply to.
    pub fn without_wall_time(&self) -> ReplicationRecord {
        ReplicationRecord {
            wall_time_ms: 0.0,
            ..self.clone()
        }
    }

    fn sort_key(&self) -> (ScenarioId, u64, usize, Method, String, usize) {
        // total order on beta_s via the monotone bit trick; values are
        // validated finite
        let bits = {
            let b = self.beta_s.to_bits() as i64;
            (b ^ (((b >> 63) as u64) >> 1) as i64) as u64 ^ (1u64 << 63)
        };
        (
            self.scenario,
            bits,
            self.n,
            self.method,
            self.learner.clone(),
            self.replication,
        )
    }
}

struct Task {
    scenario: ScenarioId,
    beta_s: f64,
    n: usize,
    method: Method,
    learner: LearnerSpec,
    replication: usize,
    seed: u64,
}

/// Runs every replication of the grid on `workers` threads (0 = default
/// pool; ignored without the `parallel` feature). Records come back sorted
/// by grid coordinates then replication index, identically for any worker
/// count.
pub fn run_grid(grid: &ExperimentGrid, workers: usize) -> Result<Vec<ReplicationRecord>> {
    grid.validate()?;
    let mut tasks = Vec::with_capacity(grid.total_records());
    for &scenario in &grid.scenarios {
        for &beta_s in &grid.beta_s_values {
            for &n in &grid.n_values {
                for &method in &grid.methods {
                    for learner in &grid.learners {
                        for replication in 0..grid.replications {
                            let seed = seed::derive(
                                grid.master_seed,
                                &[
                                    seed::tag(scenario.as_str()),
                                    beta_s.to_bits(),
                                    n as u64,
                                    seed::tag(method.as_str()),
                                    seed::tag(learner.name()),
                                    replication as u64,
                                ],
                            );
                            tasks.push(Task {
                                scenario,
                                beta_s,
                                n,
                                method,
                                learner: learner.clone(),
                                replication,
                                seed,
                            });
                        }
                    }
                }
            }
        }
    }

    let grid_ref = &grid;
    let mut records: Vec<ReplicationRecord> = exec::with_workers(workers, move || {
        exec::map_collect(tasks, |task| run_replication(grid_ref, &task))
    });
    records.sort_by_key(|r| r.sort_key());

    // abort when any cell fails too often: silent attrition would bias the
    // aggregate statistics
    let mut i = 0;
    while i < records.len() {
        let cell = records[i].cell();
        let mut failed = 0;
        let mut total = 0;
        while i < records.len() && records[i].cell() == cell {
            total += 1;
            if !records[i].status.is_ok() {
                failed += 1;
            }
            i += 1;
        }
        if failed as f64 > 0.05 * total as f64 {
            return Err(Error::CellFailures {
                cell: cell.to_string(),
                failed,
                total,
            });
        }
    }
    Ok(records)
}

fn run_replication(grid: &ExperimentGrid, task: &Task) -> ReplicationRecord {
    let start = Instant::now();
    let outcome = (|| -> Result<(f64, usize)> {
        let scenario_cfg = ScenarioConfig {
            id: task.scenario,
            beta_s: task.beta_s,
            n: task.n,
            seed: seed::derive(task.seed, &[seed::tag("generate")]),
            overrides: grid.overrides.clone(),
        };
        let (dataset, s) = generate(&scenario_cfg)?;
        let (train, holdout) = crate::data::split(
            &dataset,
            grid.holdout_fraction,
            seed::derive(task.seed, &[seed::tag("split")]),
        )?;
        let cfg = TestConfig {
            s,
            b: grid.b,
            alpha: grid.alpha,
            seed: seed::derive(task.seed, &[seed::tag("test")]),
            smoothed_pvalue: grid.smoothed_pvalue,
        };
        let result = run_method(task.method, &task.learner, &train, &holdout, &cfg)?;
        Ok((result.p_value, result.fit_count))
    })();
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let (p_value, fit_count, status) = match outcome {
        Ok((p, fits)) => (Some(p), fits, RecordStatus::Ok),
        Err(e) => {
            let msg: String = e
                .to_string()
                .chars()
                .map(|c| if c == ',' || c == '\n' { ';' } else { c })
                .collect();
            (None, 0, RecordStatus::Failed(msg))
        }
    };
    ReplicationRecord {
        scenario: task.scenario,
        beta_s: task.beta_s,
        n: task.n,
        method: task.method,
        learner: task.learner.name().to_string(),
        replication: task.replication,
        p_value,
        wall_time_ms,
        fit_count,
        status,
    }
}

/// Right-continuous empirical CDF evaluated at the sorted unique values:
/// `F(x) = #{p_i <= x} / m`.
pub fn empirical_cdf(pvalues: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_pvalues(pvalues)?;
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / m;
        match steps.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => steps.push((x, f)),
        }
    }
    Ok(steps)
}

/// Kolmogorov-Smirnov statistic against Uniform(0, 1): the sup-norm
/// distance between the empirical CDF and the identity.
pub fn ks_uniformity(pvalues: &[f64]) -> Result<f64> {
    check_pvalues(pvalues)?;
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        sup = sup.max((i + 1) as f64 / m - x).max(x - i as f64 / m);
    }
    Ok(sup)
}

/// Fraction of p-values at or below `alpha`.
pub fn power_estimate(pvalues: &[f64], alpha: f64) -> Result<f64> {
    check_pvalues(pvalues)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(pvalues.iter().filter(|&&p| p <= alpha).count() as f64 / pvalues.len() as f64)
}

fn check_pvalues(pvalues: &[f64]) -> Result<()> {
    if pvalues.is_empty() {
        return Err(Error::invalid("p-value vector is empty"));
    }
    if let Some(&bad) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("p-value {bad} outside [0, 1]")));
    }
    Ok(())
}

/// Per-cell summary row of [`emit_report`].
#[derive(Clone, Debug)]
pub struct CellSummary {
    pub cell: CellKey,
    pub power: f64,
    pub ks_stat: f64,
    pub mean_wall_time_ms: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Writes, per grid cell, a CDF step-point file
/// (`cdf_<scenario>_<beta_s>_<n>_<method>_<learner>.csv` with `x,F` rows)
/// plus one `summary.csv` with power at `alpha`, the KS uniformity
/// statistic, mean wall time, and ok/failed counts. Returns the written
/// paths, summary first.
pub fn emit_report(
    records: &[ReplicationRecord],
    alpha: f64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    use std::io::Write;
    if records.is_empty() {
        return Err(Error::invalid("no records to report on"));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut sorted: Vec<&ReplicationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());

    let summary_path = out_dir.join("summary.csv");
    let mut summary = std::io::BufWriter::new(std::fs::File::create(&summary_path)?);
    writeln!(
        summary,
        "scenario,beta_s,n,method,learner,power,ks_stat,mean_wall_time_ms,n_ok,n_failed"
    )?;
    let mut paths = vec![summary_path.clone()];

    let mut i = 0;
    while i < sorted.len() {
        let cell = sorted[i].cell();
        let mut cell_records = Vec::new();
        while i < sorted.len() && sorted[i].cell() == cell {
            cell_records.push(sorted[i]);
            i += 1;
        }
        let pvalues: Vec<f64> = cell_records.iter().filter_map(|r| r.p_value).collect();
        let n_ok = pvalues.len();
        let n_failed = cell_records.len() - n_ok;
        let mean_wall = cell_records.iter().map(|r| r.wall_time_ms).sum::<f64>()
            / cell_records.len() as f64;
        let (power, ks) = if pvalues.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (power_estimate(&pvalues, alpha)?, ks_uniformity(&pvalues)?)
        };
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{},{}",
            cell.scenario,
            cell.beta_s,
            cell.n,
            cell.method,
            cell.learner,
            power,
            ks,
            mean_wall,
            n_ok,
            n_failed
        )?;

        if !pvalues.is_empty() {
            let cdf_path = out_dir.join(format!(
                "cdf_{}_{}_{}_{}_{}.csv",
                cell.scenario, cell.beta_s, cell.n, cell.method, cell.learner
            ));
            let mut cdf = std::io::BufWriter::new(std::fs::File::create(&cdf_path)?);
            writeln!(cdf, "x,F")?;
            for (x, f) in empirical_cdf(&pvalues)? {
                writeln!(cdf, "{x},{f}")?;
            }
            paths.push(cdf_path);
        }
    }
    Ok(paths)
}

/// Recomputes the per-cell summaries from records (the same numbers
/// `emit_report` writes).
pub fn summarize(records: &[ReplicationRecord], alpha: f64) -> Result<Vec<CellSummary>> {
    if records.is_empty() {
        return Err(Error::invalid("no records to summarize"));
    }
    let mut sorted: Vec<&ReplicationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let cell = sorted[i].cell();
        let mut cell_records = Vec::new();
        while i < sorted.len() && sorted[i].cell() == cell {
            cell_records.push(sorted[i]);
            i += 1;
        }
        let pvalues: Vec<f64> = cell_records.iter().filter_map(|r| r.p_value).collect();
        let n_ok = pvalues.len();
        let n_failed = cell_records.len() - n_ok;
        let mean_wall = cell_records.iter().map(|r| r.wall_time_ms).sum::<f64>()
            / cell_records.len() as f64;
        let (power, ks_stat) = if pvalues.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (power_estimate(&pvalues, alpha)?, ks_uniformity(&pvalues)?)
        };
        out.push(CellSummary {
            cell,
            power,
            ks_stat,
            mean_wall_time_ms: mean_wall,
            n_ok,
            n_failed,
        });
    }
    Ok(out)
}
