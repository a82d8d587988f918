//! Easy-first orderings of an instance pool.
//!
//! Non-adaptive strategies (random, heuristic, gold) produce the whole
//! order up front. The adaptive strategy is a select/observe loop: pick the
//! remaining instance with the lowest predicted annotation time, observe
//! its real time, and retrain.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Instance;
use crate::estimators::{self, EstimatorError, GpModel, RegressorKind, RegressorSpec, TrainedModel};
use crate::par::{self, Execution};
use crate::rng;
use crate::textfeat::{heuristic_score, FeatureError, FeatureTable, HeuristicKind, ScoreTable};

/// Observed times below this are rejected as clock errors.
pub const MIN_OBSERVED_SECONDS: f64 = 0.001;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("no instances left in the pool")]
    PoolExhausted,
    #[error("instance {0} is not in the remaining pool")]
    UnknownId(String),
    #[error("non-positive annotation time {0}")]
    NonPositiveTime(f64),
    #[error("annotation time {0} s is below the {MIN_OBSERVED_SECONDS} s floor")]
    TimeBelowFloor(f64),
    #[error("instance {0} has no difficulty level")]
    MissingDifficulty(String),
    #[error("retrain_every must be at least 1")]
    BadRetrainInterval,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// One entry of an exported ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedItem {
    /// 1-based position.
    pub rank: usize,
    pub id: String,
    pub score: f64,
}

/// Adaptive strategy parameters. Features must cover the whole pool.
#[derive(Debug, Clone)]
pub struct AdaptiveStrategy {
    pub spec: RegressorSpec,
    pub features: Arc<FeatureTable>,
    pub retrain_every: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum Strategy {
    Random { seed: u64 },
    Heuristic { kind: HeuristicKind, scores: Option<Arc<ScoreTable>> },
    Gold,
    Adaptive(AdaptiveStrategy),
}

impl Strategy {
    /// Full ordering for non-adaptive strategies; `None` for adaptive.
    pub fn precompute(&self, instances: &[Instance]) -> Option<Result<Vec<OrderedItem>, CurriculumError>> {
        match self {
            Strategy::Random { seed } => Some(Ok(random_order(instances, *seed))),
            Strategy::Heuristic { kind, scores } => {
                Some(precompute_order(instances, *kind, scores.as_deref()))
            }
            Strategy::Gold => Some(gold_order(instances)),
            Strategy::Adaptive(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random { .. } => "random",
            Strategy::Heuristic { .. } => "heuristic",
            Strategy::Gold => "gold",
            Strategy::Adaptive(_) => "adaptive",
        }
    }
}

/// Sorts `(id, score)` ascending by score, ties by id.
pub fn sort_by_score(mut scored: Vec<(String, f64)>) -> Vec<OrderedItem> {
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (id, score))| OrderedItem { rank: i + 1, id, score })
        .collect()
}

/// Easy-first ordering by a heuristic score.
pub fn precompute_order(
    instances: &[Instance],
    kind: HeuristicKind,
    scores: Option<&ScoreTable>,
) -> Result<Vec<OrderedItem>, CurriculumError> {
    let scored = instances
        .iter()
        .map(|inst| Ok((inst.id.clone(), heuristic_score(kind, inst, scores)?)))
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok(sort_by_score(scored))
}

/// Seeded uniform permutation. The score is the 1-based position.
pub fn random_order(instances: &[Instance], seed: u64) -> Vec<OrderedItem> {
    let mut ids: Vec<&str> = instances.iter().map(|i| i.id.as_str()).collect();
    ids.shuffle(&mut rng::seeded(seed));
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| OrderedItem { rank: i + 1, id: id.to_string(), score: (i + 1) as f64 })
        .collect()
}

/// Ascending configured difficulty, ties by id.
pub fn gold_order(instances: &[Instance]) -> Result<Vec<OrderedItem>, CurriculumError> {
    let scored = instances
        .iter()
        .map(|inst| {
            inst.difficulty_level
                .map(|l| (inst.id.clone(), l as f64))
                .ok_or_else(|| CurriculumError::MissingDifficulty(inst.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sort_by_score(scored))
}

/// Ordering as jsonl `{"rank", "id", "score"}` lines.
pub fn order_to_jsonl(order: &[OrderedItem]) -> String {
    let mut out = String::new();
    for item in order {
        out.push_str(&serde_json::to_string(item).expect("order item serializes"));
        out.push('\n');
    }
    out
}

/// Id with the lowest score; ties go to the smallest id. `ids` must be
/// sorted ascending.
pub fn argmin_id<'a>(ids: &[&'a str], scores: &[f64]) -> Option<&'a str> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s.total_cmp(&b).is_lt()) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| ids[i])
}

/// Progress of one adaptive run: the unlabeled pool, the observed
/// `(id, seconds)` pairs, and the model trained on them.
#[derive(Debug, Clone)]
pub struct CurriculumState {
    remaining: BTreeSet<String>,
    observed: Vec<(String, f64)>,
    model: Option<TrainedModel>,
    /// Number of observations the current model was trained on.
    model_n: usize,
    step: usize,
    seed: u64,
}

impl CurriculumState {
    pub fn new(pool: impl IntoIterator<Item = String>, seed: u64) -> Self {
        CurriculumState {
            remaining: pool.into_iter().collect(),
            observed: Vec::new(),
            model: None,
            model_n: 0,
            step: 0,
            seed,
        }
    }

    pub fn remaining(&self) -> &BTreeSet<String> {
        &self.remaining
    }

    pub fn observed(&self) -> &[(String, f64)] {
        &self.observed
    }

    pub fn model(&self) -> Option<&TrainedModel> {
        self.model.as_ref()
    }

    pub fn model_size(&self) -> usize {
        self.model_n
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next instance: argmin of predicted time over the pool, or a seeded
    /// uniform pick while no model has been trained.
    pub fn adaptive_next(&self, strategy: &AdaptiveStrategy) -> Result<String, CurriculumError> {
        self.adaptive_next_with(strategy, Execution::default())
    }

    pub fn adaptive_next_with(
        &self,
        strategy: &AdaptiveStrategy,
        exec: Execution,
    ) -> Result<String, CurriculumError> {
        if self.remaining.is_empty() {
            return Err(CurriculumError::PoolExhausted);
        }
        let ids: Vec<&str> = self.remaining.iter().map(String::as_str).collect();
        let Some(model) = &self.model else {
            let mut r = rng::seeded(rng::derive(self.seed, self.step as u64));
            let pick = r.random_range(0..ids.len());
            return Ok(ids[pick].to_string());
        };
        let rows = ids
            .iter()
            .map(|id| strategy.features.get(id).map(|v| v.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        let predictions = par::map(exec, &rows, |x| estimators::predict(model, x))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(argmin_id(&ids, &predictions).expect("pool is non-empty").to_string())
    }

    /// Records the observed time for `id` and retrains when the number of
    /// observations reaches a multiple of `retrain_every`.
    pub fn adaptive_observe(
        &mut self,
        strategy: &AdaptiveStrategy,
        id: &str,
        time_seconds: f64,
    ) -> Result<(), CurriculumError> {
        if strategy.retrain_every == 0 {
            return Err(CurriculumError::BadRetrainInterval);
        }
        if !(time_seconds > 0.0) || !time_seconds.is_finite() {
            return Err(CurriculumError::NonPositiveTime(time_seconds));
        }
        if time_seconds < MIN_OBSERVED_SECONDS {
            return Err(CurriculumError::TimeBelowFloor(time_seconds));
        }
        // features are checked before mutating so a failed call leaves the state intact
        strategy.features.get(id)?;
        if !self.remaining.remove(id) {
            return Err(CurriculumError::UnknownId(id.to_string()));
        }
        self.observed.push((id.to_string(), time_seconds));
        self.step += 1;
        if self.observed.len() % strategy.retrain_every == 0 {
            if let Err(e) = self.retrain(strategy) {
                self.observed.pop();
                self.remaining.insert(id.to_string());
                self.step -= 1;
                return Err(e);
            }
        }
        Ok(())
    }

    fn retrain(&mut self, strategy: &AdaptiveStrategy) -> Result<(), CurriculumError> {
        let spec = &strategy.spec;
        if spec.kind == RegressorKind::Gp {
            // the GP factor grows by the new rows only
            let mut gp = match self.model.take() {
                Some(TrainedModel::Gp(gp)) => gp,
                _ => {
                    self.model_n = 0;
                    GpModel::new(spec.gp_sigma0_sq, spec.gp_noise_sq)
                }
            };
            let mut rows = Vec::new();
            for (id, t) in &self.observed[self.model_n..] {
                rows.push((strategy.features.get(id)?.as_slice(), *t));
            }
            let before = gp.clone();
            match gp.extend(rows) {
                Ok(()) => {
                    self.model = Some(TrainedModel::Gp(gp));
                    self.model_n = self.observed.len();
                    Ok(())
                }
                Err(e) => {
                    self.model = if before.is_empty() { None } else { Some(TrainedModel::Gp(before)) };
                    Err(e.into())
                }
            }
        } else {
            let x = self
                .observed
                .iter()
                .map(|(id, _)| strategy.features.get(id).map(|v| v.as_slice()))
                .collect::<Result<Vec<_>, _>>()?;
            let y: Vec<f64> = self.observed.iter().map(|(_, t)| *t).collect();
            self.model = Some(estimators::fit(spec, &x, &y)?);
            self.model_n = self.observed.len();
            Ok(())
        }
    }
}
