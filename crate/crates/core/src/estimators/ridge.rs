use serde::{Deserialize, Serialize};

use super::linalg::{dot, Cholesky};
use super::EstimatorError;
use crate::par::{self, Execution};

/// Centered closed-form ridge regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    /// Solves `(XcᵀXc + αI) w = Xcᵀyc`. When `α > 0` and there are fewer
    /// rows than features, the equivalent dual system
    /// `w = Xcᵀ (XcXcᵀ + αI)⁻¹ yc` is solved instead.
    pub fn fit(x: &[&[f64]], y: &[f64], alpha: f64, exec: Execution) -> Result<Self, EstimatorError> {
        let n = x.len();
        let d = x[0].len();
        let x_mean: Vec<f64> =
            (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let xc: Vec<Vec<f64>> =
            x.iter().map(|r| r.iter().zip(&x_mean).map(|(v, m)| v - m).collect()).collect();
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

        let weights = if alpha > 0.0 && n < d {
            let gram: Vec<Vec<f64>> = par::map_range(exec, n, |i| {
                (0..n).map(|k| dot(&xc[i], &xc[k]) + if i == k { alpha } else { 0.0 }).collect()
            });
            let chol = Cholesky::factor(&gram).ok_or(EstimatorError::NumericalFailure)?;
            let dual = chol.solve(&yc);
            (0..d).map(|j| xc.iter().zip(&dual).map(|(r, a)| r[j] * a).sum()).collect()
        } else {
            let gram: Vec<Vec<f64>> = par::map_range(exec, d, |j| {
                (0..d)
                    .map(|k| {
                        xc.iter().map(|r| r[j] * r[k]).sum::<f64>() + if j == k { alpha } else { 0.0 }
                    })
                    .collect()
            });
            let rhs: Vec<f64> = (0..d).map(|j| xc.iter().zip(&yc).map(|(r, t)| r[j] * t).sum()).collect();
            let chol = Cholesky::factor(&gram).ok_or(EstimatorError::NumericalFailure)?;
            chol.solve(&rhs)
        };
        let intercept = y_mean - dot(&weights, &x_mean);
        Ok(RidgeModel { weights, intercept })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}
