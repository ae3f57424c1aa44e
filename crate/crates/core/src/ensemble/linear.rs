use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least squares with an intercept, solved by SVD so collinear
/// base-model columns still yield the minimum-norm solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LeastSquares {
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::usage("least squares needs at least 2 rows"));
        }
        let m = x[0].len();
        let design = DMatrix::from_fn(x.len(), m + 1, |r, c| if c == 0 { 1.0 } else { x[r][c - 1] });
        let rhs = DVector::from_column_slice(y);
        let beta = design
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Data(format!("least squares solve failed: {e}")))?;
        Ok(Self {
            intercept: beta[0],
            coefficients: beta.iter().skip(1).copied().collect(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}
