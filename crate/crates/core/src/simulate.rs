//! Offline evaluation with simulated annotators.
//!
//! A simulated annotator answers with the recorded gold time of each
//! instance. [`run_static`] trains once on the full training split;
//! [`run_interactive`] replays the adaptive select/observe/retrain loop and
//! scores the model on the held-out split after every iteration.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Instance, SplitAssignment, TimedRecord};
use crate::curriculum::{AdaptiveStrategy, CurriculumError, CurriculumState};
use crate::estimators::{self, regression_metrics, EstimatorError, Metrics, RegressorSpec};
use crate::par::{self, Execution};
use crate::rng;
use crate::stats::{self, StatsError};
use crate::textfeat::{heuristic_score, FeatureError, FeatureTable, HeuristicKind, ScoreTable};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("split part '{0}' has no timed instances")]
    EmptySplit(&'static str),
    #[error("need at least two annotators, got {0}")]
    TooFewUsers(usize),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("instance {0} has no recorded time")]
    MissingTime(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// What produces the difficulty estimate being evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Heuristic(HeuristicKind),
    Regressor(RegressorSpec),
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(h) = s.parse::<HeuristicKind>() {
            return Ok(Estimator::Heuristic(h));
        }
        s.parse::<estimators::RegressorKind>()
            .map(|k| Estimator::Regressor(RegressorSpec::new(k)))
            .map_err(|_| format!("unknown estimator '{s}' (expected sen, fk, external, ridge, gp, gbm)"))
    }
}

/// Which split serves as the held-out evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalSplit {
    Dev,
    #[default]
    Test,
}

/// Feature and score sources for an evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inputs<'a> {
    pub features: Option<&'a FeatureTable>,
    pub scores: Option<&'a ScoreTable>,
}

/// Gold times of the instances in `ids` that have records, in `ids` order.
fn timed(ids: &[String], times: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    ids.iter().filter_map(|id| times.get(id).map(|t| (id.clone(), *t))).collect()
}

fn feature_rows<'a>(
    features: Option<&'a FeatureTable>,
    ids: impl Iterator<Item = &'a String>,
) -> Result<Vec<&'a [f64]>, SimError> {
    let table = features.ok_or_else(|| FeatureError::MissingFeatures("<no feature table>".into()))?;
    Ok(ids.map(|id| table.get(id).map(|v| v.as_slice())).collect::<Result<_, _>>()?)
}

/// Estimates for the `eval` instances, trained on `train` when the
/// estimator is a regressor.
pub fn estimate(
    estimator: &Estimator,
    dataset: &Dataset,
    train: &[(String, f64)],
    eval: &[(String, f64)],
    inputs: Inputs<'_>,
) -> Result<Vec<f64>, SimError> {
    match estimator {
        Estimator::Heuristic(kind) => {
            let by_id = dataset.instance_map();
            eval.iter()
                .map(|(id, _)| {
                    let inst: &Instance = by_id.get(id.as_str()).ok_or_else(|| SimError::MissingTime(id.clone()))?;
                    Ok(heuristic_score(*kind, inst, inputs.scores)?)
                })
                .collect()
        }
        Estimator::Regressor(spec) => {
            let x = feature_rows(inputs.features, train.iter().map(|p| &p.0))?;
            let y: Vec<f64> = train.iter().map(|p| p.1).collect();
            let model = estimators::fit(spec, &x, &y)?;
            let xe = feature_rows(inputs.features, eval.iter().map(|p| &p.0))?;
            Ok(estimators::predict_batch(&model, &xe, Execution::default())?)
        }
    }
}

/// Result of a static evaluation. Regression metrics are only meaningful
/// for regressors; heuristics report `rho` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticResult {
    pub rho: Option<f64>,
    pub regression: Option<Metrics>,
    pub n_train: usize,
    pub n_eval: usize,
}

/// Trains on the full training split and correlates estimates with the
/// held-out gold times.
pub fn run_static(
    dataset: &Dataset,
    split: &SplitAssignment,
    eval_on: EvalSplit,
    estimator: &Estimator,
    inputs: Inputs<'_>,
) -> Result<StaticResult, SimError> {
    let times = dataset.instance_times();
    let train = timed(&split.train, &times);
    let (eval_ids, name) = match eval_on {
        EvalSplit::Dev => (&split.dev, "dev"),
        EvalSplit::Test => (&split.test, "test"),
    };
    let eval = timed(eval_ids, &times);
    if eval.is_empty() {
        return Err(SimError::EmptySplit(name));
    }
    if matches!(estimator, Estimator::Regressor(_)) && train.is_empty() {
        return Err(SimError::EmptySplit("train"));
    }
    let pred = estimate(estimator, dataset, &train, &eval, inputs)?;
    let truth: Vec<f64> = eval.iter().map(|p| p.1).collect();
    let rho = if truth.len() >= 2 { stats::spearman(&truth, &pred)? } else { None };
    let regression = match estimator {
        Estimator::Regressor(_) => Some(regression_metrics(&truth, &pred)?),
        Estimator::Heuristic(_) => None,
    };
    Ok(StaticResult { rho, regression, n_train: train.len(), n_eval: eval.len() })
}

/// One iteration of an interactive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub id: String,
    pub time: f64,
    pub rho: Option<f64>,
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub seed: u64,
    pub spec: RegressorSpec,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// One json object per iteration.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&serde_json::to_string(p).expect("curve point serializes"));
            out.push('\n');
        }
        out
    }

    pub fn final_rho(&self) -> Option<f64> {
        self.points.iter().rev().find_map(|p| p.rho)
    }

    /// First step (0-based) whose held-out rho exceeds `threshold`.
    pub fn first_step_above(&self, threshold: f64) -> Option<usize> {
        self.points.iter().find(|p| p.rho.is_some_and(|r| r > threshold)).map(|p| p.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractiveConfig {
    pub spec: RegressorSpec,
    pub seed: u64,
    pub retrain_every: usize,
    /// Evaluate on the held-out set every this many iterations (and always
    /// on the last one).
    pub eval_every: usize,
    pub eval_on: EvalSplit,
}

impl InteractiveConfig {
    pub fn new(spec: RegressorSpec, seed: u64) -> Self {
        InteractiveConfig { spec, seed, retrain_every: 1, eval_every: 1, eval_on: EvalSplit::Test }
    }
}

/// Replays the adaptive loop over the training split with the recorded
/// times acting as the annotator.
pub fn run_interactive(
    dataset: &Dataset,
    split: &SplitAssignment,
    features: Arc<FeatureTable>,
    config: &InteractiveConfig,
) -> Result<LearningCurve, SimError> {
    if config.eval_every == 0 {
        return Err(SimError::BadParams("eval_every must be >= 1".into()));
    }
    let times = dataset.instance_times();
    let pool = timed(&split.train, &times);
    if pool.is_empty() {
        return Err(SimError::EmptySplit("train"));
    }
    let eval = timed(
        match config.eval_on {
            EvalSplit::Dev => &split.dev,
            EvalSplit::Test => &split.test,
        },
        &times,
    );
    let eval_x = feature_rows(Some(&features), eval.iter().map(|p| &p.0))?;
    let eval_y: Vec<f64> = eval.iter().map(|p| p.1).collect();
    let gold: BTreeMap<&str, f64> = pool.iter().map(|(id, t)| (id.as_str(), *t)).collect();

    let strategy = AdaptiveStrategy {
        spec: config.spec,
        features: features.clone(),
        retrain_every: config.retrain_every,
        seed: config.seed,
    };
    let mut state = CurriculumState::new(pool.iter().map(|p| p.0.clone()), config.seed);
    let mut points = Vec::with_capacity(pool.len());
    for step in 0..pool.len() {
        let id = state.adaptive_next(&strategy)?;
        let time = gold[id.as_str()];
        state.adaptive_observe(&strategy, &id, time)?;
        let last = step + 1 == pool.len();
        let (mut rho, mut mae) = (None, None);
        if (step % config.eval_every == 0 || last) && !eval.is_empty() {
            if let Some(model) = state.model() {
                let pred = estimators::predict_batch(model, &eval_x, Execution::Sequential)?;
                let m = regression_metrics(&eval_y, &pred)?;
                rho = m.rho;
                mae = Some(m.mae);
            }
        }
        points.push(CurvePoint { step, id, time, rho, mae });
    }
    Ok(LearningCurve { seed: config.seed, spec: config.spec, points })
}

/// Interactive runs for several seeds; independent runs execute in parallel.
pub fn run_interactive_seeds(
    dataset: &Dataset,
    split: &SplitAssignment,
    features: Arc<FeatureTable>,
    config: &InteractiveConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<LearningCurve>, SimError> {
    par::map(exec, seeds, |&seed| {
        run_interactive(dataset, split, features.clone(), &InteractiveConfig { seed, ..*config })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserFold {
    pub user: String,
    pub n_train: usize,
    pub n_eval: usize,
    pub metrics: Metrics,
}

/// Mean over folds; optional metrics average over the folds defining them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub folds: Vec<UserFold>,
    pub mean: MeanMetrics,
}

fn mean_defined(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| stats::mean(&v))
}

/// Leave-one-annotator-out: for each annotator, train on everyone else's
/// records and evaluate on theirs.
pub fn run_loo_users(
    dataset: &Dataset,
    spec: &RegressorSpec,
    features: &FeatureTable,
    exec: Execution,
) -> Result<LooReport, SimError> {
    let users = dataset.annotators();
    if users.len() < 2 {
        return Err(SimError::TooFewUsers(users.len()));
    }
    let fold = |user: &String| -> Result<UserFold, SimError> {
        let (eval, train): (Vec<&TimedRecord>, Vec<&TimedRecord>) =
            dataset.records.iter().partition(|r| &r.annotator_id == user);
        let x = train
            .iter()
            .map(|r| features.get(&r.instance_id).map(|v| v.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        let y: Vec<f64> = train.iter().map(|r| r.time_seconds).collect();
        let model = estimators::fit(spec, &x, &y)?;
        let xe = eval
            .iter()
            .map(|r| features.get(&r.instance_id).map(|v| v.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        let ye: Vec<f64> = eval.iter().map(|r| r.time_seconds).collect();
        let pred = estimators::predict_batch(&model, &xe, Execution::Sequential)?;
        Ok(UserFold {
            user: user.clone(),
            n_train: train.len(),
            n_eval: eval.len(),
            metrics: regression_metrics(&ye, &pred)?,
        })
    };
    let folds = par::map(exec, &users, fold).into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean = MeanMetrics {
        mae: stats::mean(&folds.iter().map(|f| f.metrics.mae).collect::<Vec<_>>()),
        rmse: stats::mean(&folds.iter().map(|f| f.metrics.rmse).collect::<Vec<_>>()),
        r2: mean_defined(folds.iter().map(|f| f.metrics.r2)),
        rho: mean_defined(folds.iter().map(|f| f.metrics.rho)),
    };
    Ok(LooReport { folds, mean })
}

/// Generator settings for synthetic timed corpora. Instances are runs of
/// sentences over a random vocabulary; the annotation time is linear in
/// the token count plus Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n: usize,
    pub seed: u64,
    pub beta0: f64,
    pub beta1: f64,
    pub noise_sigma: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub vocab_size: usize,
    pub min_sentence: usize,
    pub max_sentence: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n: 500,
            seed: 0,
            beta0: 2.0,
            beta1: 0.1,
            noise_sigma: 0.0,
            min_tokens: 5,
            max_tokens: 300,
            vocab_size: 400,
            min_sentence: 4,
            max_sentence: 30,
        }
    }
}

/// Annotator id used for synthetic records.
pub const SYNTHETIC_ANNOTATOR: &str = "sim";
/// Floor applied to synthetic times.
pub const SYNTHETIC_MIN_SECONDS: f64 = 0.01;

const ONSETS: [&str; 16] = ["b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "st"];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ea"];

pub fn gen_synthetic(p: &SyntheticParams) -> Result<Dataset, SimError> {
    let bad = |m: &str| Err(SimError::BadParams(m.into()));
    if p.n == 0 {
        return bad("n must be >= 1");
    }
    if !(p.noise_sigma >= 0.0) {
        return bad("noise_sigma must be >= 0");
    }
    if p.min_tokens == 0 || p.min_tokens > p.max_tokens {
        return bad("need 1 <= min_tokens <= max_tokens");
    }
    if p.min_sentence == 0 || p.min_sentence > p.max_sentence {
        return bad("need 1 <= min_sentence <= max_sentence");
    }
    if p.vocab_size == 0 {
        return bad("vocab_size must be >= 1");
    }
    let mut r = rng::seeded(p.seed);
    let vocab: Vec<String> = (0..p.vocab_size)
        .map(|_| {
            let syllables = r.random_range(1..=4);
            (0..syllables)
                .map(|_| {
                    format!("{}{}", ONSETS[r.random_range(0..ONSETS.len())], NUCLEI[r.random_range(0..NUCLEI.len())])
                })
                .collect::<String>()
        })
        .collect();
    let noise = Normal::new(0.0, p.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| SimError::BadParams(e.to_string()))?;

    let width = (p.n - 1).to_string().len();
    let mut d = Dataset { name: format!("synthetic-{}", p.seed), ..Default::default() };
    for i in 0..p.n {
        let tokens = r.random_range(p.min_tokens..=p.max_tokens);
        let mut text = String::new();
        let mut left = tokens;
        while left > 0 {
            let len = r.random_range(p.min_sentence..=p.max_sentence).min(left);
            let words: Vec<&str> = (0..len).map(|_| vocab[r.random_range(0..vocab.len())].as_str()).collect();
            if !text.is_empty() {
                text.push(' ');
            }
            let mut sentence = words.join(" ");
            if let Some(first) = sentence.get(0..1) {
                sentence.replace_range(0..1, &first.to_uppercase());
            }
            text.push_str(&sentence);
            text.push('.');
            left -= len;
        }
        let eps = if p.noise_sigma > 0.0 { noise.sample(&mut r) } else { 0.0 };
        let time = (p.beta0 + p.beta1 * tokens as f64 + eps).max(SYNTHETIC_MIN_SECONDS);
        let id = format!("s{i:0width$}");
        d.instances.push(Instance::new(id.clone(), text));
        d.records.push(TimedRecord {
            instance_id: id,
            annotator_id: SYNTHETIC_ANNOTATOR.into(),
            label: String::new(),
            time_seconds: time,
        });
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::make_splits;
    use crate::textfeat::{tokenize, FeatureVector};

    fn token_features(d: &Dataset) -> FeatureTable {
        let mut t = FeatureTable::new();
        for i in &d.instances {
            t.insert(i.id.clone(), FeatureVector(vec![tokenize(&i.text).len() as f64])).unwrap();
        }
        t
    }

    fn small(noise: f64, seed: u64) -> Dataset {
        gen_synthetic(&SyntheticParams { n: 60, seed, noise_sigma: noise, ..Default::default() }).unwrap()
    }

    #[test]
    fn synthetic_generator_rules() {
        let d = small(0.0, 1);
        for (inst, rec) in d.instances.iter().zip(&d.records) {
            let tokens = tokenize(&inst.text).len() as f64;
            assert_eq!(rec.time_seconds, 2.0 + 0.1 * tokens);
        }
        assert_eq!(small(0.0, 4), small(0.0, 4));
        assert_eq!(small(2.0, 4), small(2.0, 4));
        assert!(gen_synthetic(&SyntheticParams { n: 0, ..Default::default() }).is_err());
        assert!(d.records.iter().all(|r| r.time_seconds >= SYNTHETIC_MIN_SECONDS));
    }

    #[test]
    fn static_sen_and_ridge_are_exact_on_noiseless_data() {
        let d = small(0.0, 2);
        let split = make_splits(&d, &[0.8, 0.2], 2).unwrap();
        let r = run_static(&d, &split, EvalSplit::Test, &Estimator::Heuristic(HeuristicKind::Sen), Inputs::default())
            .unwrap();
        assert_eq!(r.rho, Some(1.0));
        let f = token_features(&d);
        let r = run_static(
            &d,
            &split,
            EvalSplit::Test,
            &Estimator::Regressor(RegressorSpec::ridge(0.0)),
            Inputs { features: Some(&f), scores: None },
        )
        .unwrap();
        assert!((r.rho.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.regression.unwrap().mae < 1e-8);
    }

    #[test]
    fn constant_times_have_undefined_rho() {
        let mut d = small(0.0, 3);
        d.records.iter_mut().for_each(|r| r.time_seconds = 5.0);
        let split = make_splits(&d, &[0.8, 0.2], 3).unwrap();
        let r = run_static(&d, &split, EvalSplit::Test, &Estimator::Heuristic(HeuristicKind::Sen), Inputs::default())
            .unwrap();
        assert_eq!(r.rho, None);
    }

    #[test]
    fn interactive_curve_contract() {
        let d = small(0.0, 5);
        let split = make_splits(&d, &[0.8, 0.2], 5).unwrap();
        let f = Arc::new(token_features(&d));
        let cfg = InteractiveConfig::new(RegressorSpec::ridge(1.0), 7);
        let a = run_interactive(&d, &split, f.clone(), &cfg).unwrap();
        let b = run_interactive(&d, &split, f.clone(), &cfg).unwrap();
        assert_eq!(a.points.len(), split.train.len());
        assert_eq!(a, b);
        assert!((a.final_rho().unwrap() - 1.0).abs() < 1e-9);
        let mut ids: Vec<&String> = a.points.iter().map(|p| &p.id).collect();
        ids.sort();
        let mut want: Vec<&String> = split.train.iter().collect();
        want.sort();
        assert_eq!(ids, want);

        let strided = run_interactive(&d, &split, f, &InteractiveConfig { eval_every: 10, ..cfg }).unwrap();
        assert_eq!(strided.points.len(), a.points.len());
        assert!(strided.points[1].rho.is_none());
        assert_eq!(strided.points.last().unwrap().rho, a.points.last().unwrap().rho);
    }

    fn two_users(times: impl Fn(&str, f64) -> f64) -> (Dataset, FeatureTable) {
        let mut d = Dataset::default();
        let mut f = FeatureTable::new();
        for i in 0..12 {
            let id = format!("i{i}");
            d.instances.push(Instance::new(id.clone(), ""));
            f.insert(id.clone(), FeatureVector(vec![i as f64])).unwrap();
            for u in ["u1", "u2"] {
                d.records.push(TimedRecord {
                    instance_id: id.clone(),
                    annotator_id: u.into(),
                    label: String::new(),
                    time_seconds: times(u, i as f64),
                });
            }
        }
        (d, f)
    }

    #[test]
    fn loo_recovers_shared_linear_generator() {
        let (d, f) = two_users(|_, x| 1.0 + 0.5 * x);
        let rep = run_loo_users(&d, &RegressorSpec::ridge(0.0), &f, Execution::default()).unwrap();
        assert_eq!(rep.folds.len(), 2);
        for fold in &rep.folds {
            assert!((fold.metrics.rho.unwrap() - 1.0).abs() < 1e-12);
            assert!(fold.metrics.mae < 1e-9);
        }
    }

    #[test]
    fn loo_constant_users_and_errors() {
        let (d, f) = two_users(|u, _| if u == "u1" { 5.0 } else { 9.0 });
        let rep = run_loo_users(&d, &RegressorSpec::ridge(1.0), &f, Execution::Sequential).unwrap();
        assert!(rep.folds.iter().all(|fold| fold.metrics.rho.is_none()));
        assert_eq!(rep.mean.rho, None);

        let mut one = d.clone();
        one.records.retain(|r| r.annotator_id == "u1");
        assert!(matches!(
            run_loo_users(&one, &RegressorSpec::ridge(1.0), &f, Execution::Sequential),
            Err(SimError::TooFewUsers(1))
        ));
    }

    #[test]
    fn estimator_names() {
        assert_eq!("sen".parse::<Estimator>().unwrap(), Estimator::Heuristic(HeuristicKind::Sen));
        assert!(matches!("gp".parse::<Estimator>().unwrap(), Estimator::Regressor(s) if s.kind == estimators::RegressorKind::Gp));
        assert!("svm".parse::<Estimator>().is_err());
    }
}
