//! Conditional independence testing from a predictive angle.
//!
//! The core question: does a feature subset S carry information about the
//! label beyond what the remaining features already provide? The tests here
//! answer it by comparing holdout risk on the original data against holdout
//! risk after permuting the rows of the S columns:
//!
//! - `coinp` ranks the observed risk among B permuted-and-refit risks and
//!   returns the rank as a permutation p-value.
//! - `approx_coinp` does the same with a single fit, permuting only the
//!   holdout.
//! - `cpi` compares per-row holdout losses of an original fit and a
//!   once-permuted fit with a one-sided paired t-test.
//! - `approx_cpi` is the t-test variant with a single fit.
//!
//! Around the tests: three built-in regression learners (least squares,
//! random forest, feedforward network), scenario generators for calibration
//! and power studies, and a seeded, replication-parallel experiment harness
//! whose output is independent of worker count.

pub mod analyze;
pub mod cit;
pub mod data;
mod error;
mod exec;
pub mod harness;
pub mod learners;
pub mod scenarios;
pub mod seed;

pub use error::{Error, Result};
