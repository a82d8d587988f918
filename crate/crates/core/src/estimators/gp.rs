use serde::{Deserialize, Serialize};

use super::linalg::{dot, Cholesky};
use super::EstimatorError;

/// Diagonal jitter added to every kernel matrix.
pub const JITTER: f64 = 1e-10;

/// Gaussian-process regression with kernel `σ0² + x·x'` plus white noise
/// `σn²` on the training diagonal. Only the posterior mean is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub sigma0_sq: f64,
    pub noise_sq: f64,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    chol: Cholesky,
    dual: Vec<f64>,
}

impl GpModel {
    pub fn new(sigma0_sq: f64, noise_sq: f64) -> Self {
        GpModel {
            sigma0_sq,
            noise_sq,
            train_x: Vec::new(),
            train_y: Vec::new(),
            chol: Cholesky::empty(),
            dual: Vec::new(),
        }
    }

    pub fn fit(x: &[&[f64]], y: &[f64], sigma0_sq: f64, noise_sq: f64) -> Result<Self, EstimatorError> {
        let mut gp = GpModel::new(sigma0_sq, noise_sq);
        gp.extend(x.iter().copied().zip(y.iter().copied()))?;
        Ok(gp)
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.sigma0_sq + dot(a, b)
    }

    /// Appends training points by growing the Cholesky factor one row at a
    /// time. The result is identical to fitting on all points at once.
    pub fn extend<'a>(&mut self, points: impl IntoIterator<Item = (&'a [f64], f64)>) -> Result<(), EstimatorError> {
        let start = self.train_x.len();
        let result = self.push_all(points);
        if result.is_err() {
            // leave the model as it was before the call
            self.train_x.truncate(start);
            self.train_y.truncate(start);
            self.chol.truncate(start);
        } else if self.train_x.len() > start {
            self.dual = self.chol.solve(&self.train_y);
        }
        result
    }

    fn push_all<'a>(&mut self, points: impl IntoIterator<Item = (&'a [f64], f64)>) -> Result<(), EstimatorError> {
        for (x, y) in points {
            if let Some(first) = self.train_x.first() {
                if first.len() != x.len() {
                    return Err(EstimatorError::DimMismatch { expected: first.len(), got: x.len() });
                }
            }
            let mut row: Vec<f64> = self.train_x.iter().map(|xi| self.kernel(xi, x)).collect();
            row.push(self.kernel(x, x) + self.noise_sq + JITTER);
            self.chol.push_row(&row).ok_or(EstimatorError::NumericalFailure)?;
            self.train_x.push(x.to_vec());
            self.train_y.push(y);
        }
        Ok(())
    }

    /// Posterior mean `k(x, X) · K⁻¹ y`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.train_x.iter().zip(&self.dual).map(|(xi, a)| self.kernel(xi, x) * a).sum()
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.train_x.first().map_or(0, Vec::len)
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn dual_weights(&self) -> &[f64] {
        &self.dual
    }
}
