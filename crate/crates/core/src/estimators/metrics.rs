use serde::{Deserialize, Serialize};

use crate::stats::{self, StatsError};

/// Regression and ranking quality of predicted annotation times.
///
/// `r2` is `None` when the true values are constant; `rho` is `None` when
/// either side has no rank variation (or fewer than two points).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub rho: Option<f64>,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics, StatsError> {
    if y_true.len() != y_pred.len() {
        return Err(StatsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = y_true.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let d = t - p;
        abs += d.abs();
        sq += d * d;
    }
    let m = stats::mean(y_true);
    let sst: f64 = y_true.iter().map(|t| (t - m) * (t - m)).sum();
    let r2 = (sst > 0.0).then(|| 1.0 - sq / sst);
    let rho = if y_true.len() >= 2 { stats::spearman(y_true, y_pred)? } else { None };
    Ok(Metrics { mae: abs / n, rmse: (sq / n).sqrt(), r2, rho })
}
