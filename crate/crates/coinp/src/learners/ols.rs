//! Linear regression by singular value decomposition.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{Learner, Predictor};

/// Ordinary least squares with an intercept. The system is solved through
/// an SVD of the design matrix, which returns the minimum-norm solution
/// when columns are collinear (the correlated-feature scenarios can get
/// close to that).
#[derive(Clone, Copy, Debug, Default)]
pub struct Ols;

pub struct OlsModel {
    /// `[intercept, beta_1, .., beta_p]`
    coefficients: Vec<f64>,
}

impl OlsModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

impl Predictor for OlsModel {
    fn predict(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len() + 1, self.coefficients.len());
        self.coefficients[0]
            + row
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>()
    }
}

impl Learner for Ols {
    fn name(&self) -> &str {
        "ols"
    }

    fn fit(&self, train: &Dataset, _seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit_ols(train)?))
    }
}

/// Least-squares fit of `label ~ 1 + features`.
pub fn fit_ols(train: &Dataset) -> Result<OlsModel> {
    let n = train.n_rows();
    let p = train.n_features();
    if n == 0 {
        return Err(Error::Fit {
            context: "ols".into(),
            message: "training dataset is empty".into(),
        });
    }
    let design = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            train.row(i)[j - 1]
        }
    });
    let y = DVector::from_fn(n, |i, _| train.label(i));
    let svd = design.svd(true, true);
    // Singular values below this tolerance are treated as zero, which makes
    // the solve a pseudo-inverse: minimum-norm coefficients on rank
    // deficiency.
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = max_sv * (n.max(p + 1) as f64) * f64::EPSILON;
    let solution = svd
        .solve(&y, tol)
        .map_err(|e| Error::Fit {
            context: "ols".into(),
            message: e.to_string(),
        })?;
    let coefficients: Vec<f64> = solution.iter().copied().collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Fit {
            context: "ols".into(),
            message: "non-finite coefficients".into(),
        });
    }
    Ok(OlsModel { coefficients })
}
