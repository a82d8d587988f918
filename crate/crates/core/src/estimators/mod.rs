//! Adaptive annotation-time regressors and their evaluation metrics.
//!
//! Three model families share one interface: closed-form ridge regression,
//! Gaussian-process regression with a dot-product plus white-noise kernel,
//! and least-squares gradient-boosted trees. Predictions are unclamped; the
//! curricula only consume their order.

pub mod gbm;
pub mod gp;
pub mod linalg;
mod metrics;
pub mod ridge;

pub use gbm::GbmModel;
pub use gp::GpModel;
pub use metrics::{regression_metrics, Metrics};
pub use ridge::RidgeModel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};
use crate::stats::StatsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{0} feature rows but {1} targets")]
    LengthMismatch(usize, usize),
    #[error("kernel or normal matrix is not positive definite")]
    NumericalFailure,
    #[error("non-finite training value")]
    NonFinite,
    #[error("invalid regressor spec: {0}")]
    BadSpec(String),
    #[error("unsupported model blob version {0}")]
    BadVersion(u32),
    #[error("model blob: {0}")]
    Decode(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Ridge,
    Gp,
    Gbm,
}

impl std::str::FromStr for RegressorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ridge" | "rr" => Ok(RegressorKind::Ridge),
            "gp" => Ok(RegressorKind::Gp),
            "gbm" => Ok(RegressorKind::Gbm),
            other => Err(format!("unknown regressor '{other}'")),
        }
    }
}

impl std::fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegressorKind::Ridge => "ridge",
            RegressorKind::Gp => "gp",
            RegressorKind::Gbm => "gbm",
        })
    }
}

/// Model family and hyperparameters. Kernel hyperparameters are fixed, not
/// optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub ridge_alpha: f64,
    pub gp_sigma0_sq: f64,
    pub gp_noise_sq: f64,
    pub gbm_n_trees: usize,
    pub gbm_learning_rate: f64,
    pub gbm_max_depth: usize,
    pub gbm_min_leaf: usize,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind) -> Self {
        RegressorSpec {
            kind,
            ridge_alpha: 1.0,
            gp_sigma0_sq: 1.0,
            gp_noise_sq: 1.0,
            gbm_n_trees: 100,
            gbm_learning_rate: 0.1,
            gbm_max_depth: 3,
            gbm_min_leaf: 1,
        }
    }

    pub fn ridge(alpha: f64) -> Self {
        RegressorSpec { ridge_alpha: alpha, ..Self::new(RegressorKind::Ridge) }
    }

    pub fn gp(sigma0_sq: f64, noise_sq: f64) -> Self {
        RegressorSpec { gp_sigma0_sq: sigma0_sq, gp_noise_sq: noise_sq, ..Self::new(RegressorKind::Gp) }
    }

    pub fn gbm(n_trees: usize, learning_rate: f64, max_depth: usize) -> Self {
        RegressorSpec {
            gbm_n_trees: n_trees,
            gbm_learning_rate: learning_rate,
            gbm_max_depth: max_depth,
            ..Self::new(RegressorKind::Gbm)
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |m: &str| Err(EstimatorError::BadSpec(m.to_string()));
        if !(self.ridge_alpha >= 0.0) {
            return bad("ridge_alpha must be >= 0");
        }
        if !(self.gp_sigma0_sq >= 0.0) || !(self.gp_noise_sq >= 0.0) {
            return bad("gp variances must be >= 0");
        }
        if !(self.gbm_learning_rate > 0.0 && self.gbm_learning_rate <= 1.0) {
            return bad("gbm_learning_rate must be in (0, 1]");
        }
        if self.gbm_min_leaf < 1 {
            return bad("gbm_min_leaf must be >= 1");
        }
        Ok(())
    }

    /// Short label, e.g. `ridge(alpha=1)`.
    pub fn label(&self) -> String {
        match self.kind {
            RegressorKind::Ridge => format!("ridge(alpha={})", self.ridge_alpha),
            RegressorKind::Gp => {
                format!("gp(dot+white, sigma0^2={}, noise^2={})", self.gp_sigma0_sq, self.gp_noise_sq)
            }
            RegressorKind::Gbm => format!(
                "gbm(trees={}, lr={}, depth={})",
                self.gbm_n_trees, self.gbm_learning_rate, self.gbm_max_depth
            ),
        }
    }
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self::new(RegressorKind::Gp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Ridge(RidgeModel),
    Gp(GpModel),
    Gbm(GbmModel),
}

const BLOB_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Blob<M> {
    version: u32,
    n_train: usize,
    model: M,
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Ridge(m) => m.dim(),
            TrainedModel::Gp(m) => m.dim(),
            TrainedModel::Gbm(m) => m.dim,
        }
    }

    pub fn kind(&self) -> RegressorKind {
        match self {
            TrainedModel::Ridge(_) => RegressorKind::Ridge,
            TrainedModel::Gp(_) => RegressorKind::Gp,
            TrainedModel::Gbm(_) => RegressorKind::Gbm,
        }
    }

    /// Versioned json blob.
    pub fn to_json(&self, n_train: usize) -> String {
        serde_json::to_string(&Blob { version: BLOB_VERSION, n_train, model: self })
            .expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<(Self, usize), EstimatorError> {
        let blob: Blob<TrainedModel> =
            serde_json::from_str(s).map_err(|e| EstimatorError::Decode(e.to_string()))?;
        if blob.version != BLOB_VERSION {
            return Err(EstimatorError::BadVersion(blob.version));
        }
        Ok((blob.model, blob.n_train))
    }
}

fn check_inputs<R: AsRef<[f64]>>(x: &[R], y: &[f64]) -> Result<usize, EstimatorError> {
    if x.is_empty() {
        return Err(EstimatorError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(EstimatorError::LengthMismatch(x.len(), y.len()));
    }
    let d = x[0].as_ref().len();
    if d == 0 {
        return Err(EstimatorError::DimMismatch { expected: 1, got: 0 });
    }
    for row in x {
        let row = row.as_ref();
        if row.len() != d {
            return Err(EstimatorError::DimMismatch { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite);
    }
    Ok(d)
}

/// Trains a model on feature rows `x` and targets `y`.
pub fn fit<R: AsRef<[f64]>>(spec: &RegressorSpec, x: &[R], y: &[f64]) -> Result<TrainedModel, EstimatorError> {
    fit_with(spec, x, y, Execution::default())
}

pub fn fit_with<R: AsRef<[f64]>>(
    spec: &RegressorSpec,
    x: &[R],
    y: &[f64],
    exec: Execution,
) -> Result<TrainedModel, EstimatorError> {
    spec.validate()?;
    check_inputs(x, y)?;
    let rows: Vec<&[f64]> = x.iter().map(AsRef::as_ref).collect();
    Ok(match spec.kind {
        RegressorKind::Ridge => TrainedModel::Ridge(RidgeModel::fit(&rows, y, spec.ridge_alpha, exec)?),
        RegressorKind::Gp => TrainedModel::Gp(GpModel::fit(&rows, y, spec.gp_sigma0_sq, spec.gp_noise_sq)?),
        RegressorKind::Gbm => TrainedModel::Gbm(GbmModel::fit(
            &rows,
            y,
            spec.gbm_n_trees,
            spec.gbm_learning_rate,
            gbm::TreeParams { max_depth: spec.gbm_max_depth, min_leaf: spec.gbm_min_leaf },
            exec,
        )),
    })
}

/// Predicted annotation time for one feature vector.
pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<f64, EstimatorError> {
    if x.len() != model.dim() {
        return Err(EstimatorError::DimMismatch { expected: model.dim(), got: x.len() });
    }
    Ok(match model {
        TrainedModel::Ridge(m) => m.predict(x),
        TrainedModel::Gp(m) => m.predict(x),
        TrainedModel::Gbm(m) => m.predict(x),
    })
}

/// Predictions for many rows.
pub fn predict_batch<R: AsRef<[f64]> + Sync>(
    model: &TrainedModel,
    xs: &[R],
    exec: Execution,
) -> Result<Vec<f64>, EstimatorError> {
    par::map(exec, xs, |x| predict(model, x.as_ref())).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn rows(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn ridge_anchors() {
        let x = rows(&[&[1.0], &[2.0]]);
        let TrainedModel::Ridge(m) = fit(&RegressorSpec::ridge(0.0), &x, &[1.0, 2.0]).unwrap() else {
            panic!()
        };
        assert!((m.weights[0] - 1.0).abs() < 1e-12 && m.intercept.abs() < 1e-12);

        let model = fit(&RegressorSpec::ridge(1.0), &x, &[1.0, 2.0]).unwrap();
        let TrainedModel::Ridge(m) = &model else { panic!() };
        // centered: Xc = [-.5, .5], yc = [-.5, .5]; w = 0.5 / (0.5 + 1)
        assert!((m.weights[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.intercept - 1.0).abs() < 1e-12);
        assert!((predict(&model, &[3.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_dual_matches_primal() {
        let mut r = rng::seeded(11);
        let x: Vec<Vec<f64>> = (0..5).map(|_| (0..12).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..5).map(|_| r.random_range(0.0..5.0)).collect();
        let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let dual = RidgeModel::fit(&refs, &y, 0.7, Execution::Sequential).unwrap();
        // primal path forced by solving the d x d system directly
        let n = x.len();
        let d = 12;
        let xm: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let ym = y.iter().sum::<f64>() / n as f64;
        let gram: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                (0..d)
                    .map(|k| {
                        x.iter().map(|r| (r[j] - xm[j]) * (r[k] - xm[k])).sum::<f64>()
                            + if j == k { 0.7 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> =
            (0..d).map(|j| x.iter().zip(&y).map(|(r, t)| (r[j] - xm[j]) * (t - ym)).sum()).collect();
        let w = linalg::Cholesky::factor(&gram).unwrap().solve(&rhs);
        for (a, b) in w.iter().zip(&dual.weights) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gp_anchors() {
        let x = rows(&[&[0.0]]);
        let m = fit(&RegressorSpec::gp(1.0, 1.0), &x, &[2.0]).unwrap();
        assert!((predict(&m, &[0.0]).unwrap() - 1.0).abs() < 1e-9);
        let m = fit(&RegressorSpec::gp(1.0, 0.0), &x, &[2.0]).unwrap();
        assert!((predict(&m, &[0.0]).unwrap() - 2.0).abs() < 1e-6);
        if let TrainedModel::Gp(g) = &m {
            for (i, row) in g.cholesky().rows().iter().enumerate() {
                assert!(row[i] > 0.0);
            }
        }
    }

    #[test]
    fn gp_incremental_equals_batch() {
        let mut r = rng::seeded(5);
        let x: Vec<Vec<f64>> = (0..15).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..15).map(|_| r.random_range(1.0..9.0)).collect();
        let refs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let batch = GpModel::fit(&refs, &y, 1.0, 1.0).unwrap();
        let mut online = GpModel::new(1.0, 1.0);
        for chunk in refs.iter().zip(&y).collect::<Vec<_>>().chunks(4) {
            online.extend(chunk.iter().map(|(x, y)| (**x, **y))).unwrap();
        }
        assert_eq!(batch, online);
    }

    #[test]
    fn gp_extend_failure_is_atomic() {
        let mut gp = GpModel::fit(&[&[1.0][..]], &[1.0], 0.0, 0.0).unwrap();
        let before = gp.clone();
        // second copy of the same point with no noise: K singular up to jitter,
        // then a mismatched dimension fails the call
        let err = gp.extend([(&[1.0][..], 1.0), (&[1.0, 2.0][..], 1.0)]).unwrap_err();
        assert!(matches!(err, EstimatorError::DimMismatch { .. }));
        assert_eq!(gp, before);
    }

    #[test]
    fn gbm_anchors() {
        let x = rows(&[&[0.0], &[1.0]]);
        let spec = RegressorSpec { gbm_max_depth: 1, ..RegressorSpec::gbm(1, 1.0, 1) };
        let m = fit(&spec, &x, &[0.0, 10.0]).unwrap();
        assert!((predict(&m, &[0.0]).unwrap() - 0.0).abs() < 1e-12);
        assert!((predict(&m, &[1.0]).unwrap() - 10.0).abs() < 1e-12);

        let m = fit(&RegressorSpec::gbm(0, 0.1, 3), &x, &[3.0, 5.0]).unwrap();
        assert_eq!(predict(&m, &[123.0]).unwrap(), 4.0);
    }

    #[test]
    fn gbm_tie_breaks_to_lowest_feature() {
        // both features separate the targets identically
        let x = rows(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let TrainedModel::Gbm(m) = fit(&RegressorSpec::gbm(1, 1.0, 1), &x, &[0.0, 1.0]).unwrap() else {
            panic!()
        };
        assert!(matches!(m.trees[0].nodes[0], gbm::Node::Split { feature: 0, threshold, .. } if threshold == 0.5));
    }

    #[test]
    fn gbm_respects_depth_and_min_leaf() {
        let mut r = rng::seeded(3);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0] * 3.0 + (v[1] * 6.0).sin()).collect();
        let spec = RegressorSpec { gbm_min_leaf: 5, ..RegressorSpec::gbm(10, 0.3, 2) };
        let TrainedModel::Gbm(m) = fit(&spec, &x, &y).unwrap() else { panic!() };
        for t in &m.trees {
            assert!(t.depth() <= 2);
            let mut counts = vec![0usize; t.nodes.len()];
            for row in &x {
                let mut i = 0;
                while let gbm::Node::Split { feature, threshold, left, right } = t.nodes[i] {
                    i = if row[feature] <= threshold { left } else { right };
                }
                counts[i] += 1;
            }
            for (i, n) in t.nodes.iter().enumerate() {
                if matches!(n, gbm::Node::Leaf(_)) {
                    assert!(counts[i] >= 5);
                }
            }
        }
    }

    #[test]
    fn input_errors() {
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(fit(&RegressorSpec::ridge(1.0), &empty, &[]), Err(EstimatorError::EmptyTrainingSet));
        let ragged = rows(&[&[1.0], &[1.0, 2.0]]);
        assert!(matches!(
            fit(&RegressorSpec::ridge(1.0), &ragged, &[1.0, 2.0]),
            Err(EstimatorError::DimMismatch { .. })
        ));
        let m = fit(&RegressorSpec::ridge(1.0), &rows(&[&[1.0]]), &[1.0]).unwrap();
        assert!(matches!(predict(&m, &[1.0, 2.0]), Err(EstimatorError::DimMismatch { .. })));
        assert!(fit(&RegressorSpec::ridge(-1.0), &rows(&[&[1.0]]), &[1.0]).is_err());
    }

    #[test]
    fn blob_round_trip_predicts_identically() {
        let mut r = rng::seeded(9);
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..20).map(|_| r.random_range(1.0..3.0)).collect();
        for spec in [RegressorSpec::ridge(0.5), RegressorSpec::gp(1.0, 1.0), RegressorSpec::gbm(20, 0.1, 3)] {
            let m = fit(&spec, &x, &y).unwrap();
            let (back, n) = TrainedModel::from_json(&m.to_json(x.len())).unwrap();
            assert_eq!(n, 20);
            for row in &x {
                assert_eq!(predict(&m, row).unwrap(), predict(&back, row).unwrap());
            }
        }
        assert!(matches!(
            TrainedModel::from_json(r#"{"version":99,"n_train":0,"model":{"kind":"ridge","weights":[],"intercept":0}}"#),
            Err(EstimatorError::BadVersion(99))
        ));
    }

    #[test]
    fn batch_modes_agree() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * i) as f64 / 50.0]).collect();
        let y: Vec<f64> = (0..50).map(|i| 1.0 + i as f64 * 0.3).collect();
        let m = fit(&RegressorSpec::gbm(15, 0.2, 3), &x, &y).unwrap();
        assert_eq!(
            predict_batch(&m, &x, Execution::Sequential).unwrap(),
            predict_batch(&m, &x, Execution::Parallel).unwrap()
        );
        let seq = fit_with(&RegressorSpec::gbm(15, 0.2, 3), &x, &y, Execution::Sequential).unwrap();
        assert_eq!(seq, m);
    }
}
