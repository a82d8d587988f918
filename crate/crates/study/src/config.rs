use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use anncur_core::curriculum::{self, AdaptiveStrategy};
use anncur_core::rng;
use anncur_core::textfeat::{FeatureTable, FeatureVector, HeuristicKind, ScoreTable};
use anncur_core::{Instance, RegressorSpec};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::StudyError;

const SALT_LEVELS: u64 = 0x4c45_5645_4c53;
const SALT_RANDOM_GROUP: u64 = 0x5241_4e44;

/// Study definition as posted by the conductor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub id: String,
    #[serde(default)]
    pub seed: u64,
    pub instances: Vec<Instance>,
    /// Shown first, in this order, to every participant.
    pub control_ids: Vec<String>,
    pub evaluation_ids: Vec<String>,
    pub groups: Vec<GroupConfig>,
    #[serde(default)]
    pub consent_text: String,
    /// Require control and evaluation instances to share no choice strings.
    #[serde(default)]
    pub disjoint_choices: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    pub strategy: StrategyConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StrategyConfig {
    Random {},
    Heuristic {
        heuristic: HeuristicKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scores: Option<BTreeMap<String, f64>>,
    },
    Gold {},
    Adaptive {
        #[serde(default)]
        regressor: RegressorSpec,
        #[serde(default = "one")]
        retrain_every: usize,
        features: BTreeMap<String, Vec<f64>>,
    },
}

/// How a group orders the evaluation block.
#[derive(Debug, Clone)]
pub enum GroupPlan {
    Fixed(Vec<String>),
    Adaptive(AdaptiveStrategy),
}

/// A validated study with difficulty levels assigned and fixed orderings
/// materialized.
#[derive(Debug)]
pub struct Plan {
    pub config: StudyConfig,
    pub instances: HashMap<String, Instance>,
    pub group_names: Vec<String>,
    pub groups: Vec<GroupPlan>,
    pub levels: Vec<u8>,
}

fn invalid<T>(reason: impl Into<String>) -> Result<T, StudyError> {
    Err(StudyError::InvalidConfig(reason.into()))
}

pub fn valid_study_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn check_id_list(name: &str, ids: &[String], bank: &HashMap<String, Instance>) -> Result<(), StudyError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return invalid(format!("{name} lists '{id}' twice"));
        }
        let Some(inst) = bank.get(id) else {
            return invalid(format!("{name} references unknown instance '{id}'"));
        };
        if inst.choice_sets.as_ref().is_none_or(|s| s.is_empty()) {
            return invalid(format!("instance '{id}' has no choice sets"));
        }
    }
    Ok(())
}

/// Assigns difficulty levels to evaluation instances when none are set:
/// a seeded shuffle dealt round-robin over the levels every instance
/// offers a choice set for.
fn assign_levels(config: &mut StudyConfig) -> Result<(), StudyError> {
    let eval: HashSet<&String> = config.evaluation_ids.iter().collect();
    let targets: Vec<usize> =
        (0..config.instances.len()).filter(|&i| eval.contains(&config.instances[i].id)).collect();
    let with_level = targets.iter().filter(|&&i| config.instances[i].difficulty_level.is_some()).count();
    if with_level == targets.len() {
        return Ok(());
    }
    if with_level > 0 {
        return invalid("either all or none of the evaluation instances may carry a difficulty level");
    }
    let mut common: Option<BTreeSet<u8>> = None;
    for &i in &targets {
        let keys: BTreeSet<u8> = config.instances[i].choice_sets.iter().flat_map(|s| s.keys().copied()).collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).copied().collect(),
        });
    }
    let levels: Vec<u8> = common.unwrap_or_default().into_iter().collect();
    if levels.is_empty() {
        return invalid("evaluation instances share no difficulty level");
    }
    if targets.len() % levels.len() != 0 {
        return invalid(format!(
            "{} evaluation instances cannot be split evenly over {} levels",
            targets.len(),
            levels.len()
        ));
    }
    let mut ids: Vec<String> = config.evaluation_ids.clone();
    ids.sort();
    ids.shuffle(&mut rng::seeded(rng::derive(config.seed, SALT_LEVELS)));
    let level_of: HashMap<String, u8> =
        ids.into_iter().enumerate().map(|(k, id)| (id, levels[k % levels.len()])).collect();
    for &i in &targets {
        config.instances[i].difficulty_level = Some(level_of[&config.instances[i].id]);
    }
    Ok(())
}

fn choice_strings(inst: &Instance) -> impl Iterator<Item = &String> {
    inst.gold_label.iter().chain(inst.choice_sets.iter().flat_map(|s| s.values().flatten()))
}

impl Plan {
    /// Validates `config`, assigning levels where needed. The returned
    /// plan's `config` is what gets persisted.
    pub fn build(mut config: StudyConfig) -> Result<Plan, StudyError> {
        if !valid_study_id(&config.id) {
            return invalid("study id must be 1-64 characters of [A-Za-z0-9_-]");
        }
        let mut bank = HashMap::new();
        for inst in &config.instances {
            inst.validate().map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
            if bank.insert(inst.id.clone(), inst.clone()).is_some() {
                return invalid(format!("duplicate instance id '{}'", inst.id));
            }
        }
        if config.evaluation_ids.is_empty() {
            return invalid("no evaluation instances");
        }
        check_id_list("control_ids", &config.control_ids, &bank)?;
        check_id_list("evaluation_ids", &config.evaluation_ids, &bank)?;
        let control: HashSet<&String> = config.control_ids.iter().collect();
        if let Some(id) = config.evaluation_ids.iter().find(|id| control.contains(id)) {
            return invalid(format!("'{id}' is both a control and an evaluation instance"));
        }
        if config.disjoint_choices {
            let control_choices: HashSet<&String> =
                config.control_ids.iter().flat_map(|id| choice_strings(&bank[id])).collect();
            for id in &config.evaluation_ids {
                if let Some(c) = choice_strings(&bank[id]).find(|c| control_choices.contains(c)) {
                    return invalid(format!("evaluation instance '{id}' shares choice '{c}' with the control block"));
                }
            }
        }

        assign_levels(&mut config)?;
        let bank: HashMap<String, Instance> = config.instances.iter().map(|i| (i.id.clone(), i.clone())).collect();
        let mut per_level: BTreeMap<u8, usize> = BTreeMap::new();
        for id in &config.evaluation_ids {
            let inst = &bank[id];
            let level = inst.difficulty_level.expect("levels assigned");
            if !inst.choice_sets.as_ref().is_some_and(|s| s.contains_key(&level)) {
                return invalid(format!("instance '{id}' has no choice set for its level {level}"));
            }
            *per_level.entry(level).or_default() += 1;
        }
        if per_level.values().collect::<BTreeSet<_>>().len() > 1 {
            return invalid(format!("unequal evaluation instances per difficulty level: {per_level:?}"));
        }

        if config.groups.is_empty() {
            return invalid("no groups");
        }
        let mut names = HashSet::new();
        for g in &config.groups {
            if g.name.is_empty() || !names.insert(g.name.as_str()) {
                return invalid(format!("group names must be unique and non-empty ('{}')", g.name));
            }
        }
        let eval: Vec<Instance> = config.evaluation_ids.iter().map(|id| bank[id].clone()).collect();
        let groups = config
            .groups
            .iter()
            .enumerate()
            .map(|(k, g)| group_plan(&config, k, &g.strategy, &eval))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Plan {
            group_names: config.groups.iter().map(|g| g.name.clone()).collect(),
            levels: per_level.keys().copied().collect(),
            instances: bank,
            groups,
            config,
        })
    }

    pub fn session_length(&self) -> usize {
        self.config.control_ids.len() + self.config.evaluation_ids.len()
    }

    pub fn control_len(&self) -> usize {
        self.config.control_ids.len()
    }
}

fn group_plan(
    config: &StudyConfig,
    index: usize,
    strategy: &StrategyConfig,
    eval: &[Instance],
) -> Result<GroupPlan, StudyError> {
    let fixed = |order: Vec<curriculum::OrderedItem>| GroupPlan::Fixed(order.into_iter().map(|o| o.id).collect());
    let name = &config.groups[index].name;
    let fail = |e: &dyn std::fmt::Display| StudyError::InvalidConfig(format!("group '{name}': {e}"));
    Ok(match strategy {
        StrategyConfig::Random {} => {
            fixed(curriculum::random_order(eval, rng::derive(config.seed, SALT_RANDOM_GROUP + index as u64)))
        }
        StrategyConfig::Heuristic { heuristic, scores } => {
            let table: Option<ScoreTable> = scores.as_ref().map(|m| m.iter().map(|(k, v)| (k.clone(), *v)).collect());
            fixed(curriculum::precompute_order(eval, *heuristic, table.as_ref()).map_err(|e| fail(&e))?)
        }
        StrategyConfig::Gold {} => fixed(curriculum::gold_order(eval).map_err(|e| fail(&e))?),
        StrategyConfig::Adaptive { regressor, retrain_every, features } => {
            regressor.validate().map_err(|e| fail(&e))?;
            if *retrain_every == 0 {
                return Err(fail(&"retrain_every must be >= 1"));
            }
            let mut table = FeatureTable::new();
            for inst in eval {
                let v = features.get(&inst.id).ok_or_else(|| fail(&format!("no features for '{}'", inst.id)))?;
                table.insert(inst.id.clone(), FeatureVector(v.clone())).map_err(|e| fail(&e))?;
            }
            GroupPlan::Adaptive(AdaptiveStrategy {
                spec: *regressor,
                features: Arc::new(table),
                retrain_every: *retrain_every,
                seed: config.seed,
            })
        }
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub use crate::fixtures::four_arm;

    #[test]
    fn four_arm_design_builds_with_gold_ascending() {
        let plan = Plan::build(four_arm("s1", 10, 50)).unwrap();
        assert_eq!(plan.session_length(), 60);
        assert_eq!(plan.levels, vec![1, 2, 3, 4, 5]);
        let GroupPlan::Fixed(gold) = &plan.groups[3] else { panic!() };
        let levels: Vec<u8> = gold.iter().map(|id| plan.instances[id].difficulty_level.unwrap()).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        for l in 1..=5 {
            assert_eq!(levels.iter().filter(|&&x| x == l).count(), 10);
        }
        // the persisted config rebuilds to the same plan
        let again = Plan::build(plan.config.clone()).unwrap();
        assert_eq!(again.config, plan.config);
    }

    #[test]
    fn overlap_and_imbalance_are_rejected() {
        let mut c = four_arm("s1", 2, 10);
        c.evaluation_ids.push("c00".into());
        assert!(matches!(Plan::build(c), Err(StudyError::InvalidConfig(m)) if m.contains("both")));

        let c = four_arm("s1", 2, 11);
        assert!(matches!(Plan::build(c), Err(StudyError::InvalidConfig(m)) if m.contains("evenly")));

        let mut c = four_arm("s1", 2, 10);
        for (k, inst) in c.instances.iter_mut().skip(2).enumerate() {
            inst.difficulty_level = Some(if k < 6 { 1 } else { 2 });
        }
        assert!(matches!(Plan::build(c), Err(StudyError::InvalidConfig(m)) if m.contains("unequal")));
    }

    #[test]
    fn shared_choices_rejected_when_disjointness_required() {
        let mut c = four_arm("s1", 2, 10);
        let leaked = c.instances[0].gold_label.clone().unwrap();
        c.instances[5].choice_sets.as_mut().unwrap().get_mut(&3).unwrap()[5] = leaked;
        assert!(Plan::build(c.clone()).is_err());
        c.disjoint_choices = false;
        assert!(Plan::build(c).is_ok());
    }

    #[test]
    fn adaptive_needs_features_for_every_instance() {
        let mut c = four_arm("s1", 2, 10);
        if let StrategyConfig::Adaptive { features, .. } = &mut c.groups[2].strategy {
            features.remove("e03");
        }
        assert!(matches!(Plan::build(c), Err(StudyError::InvalidConfig(m)) if m.contains("e03")));
    }

    #[test]
    fn strategy_json_shapes() {
        let s: StrategyConfig = serde_json::from_str(r#"{"kind":"random"}"#).unwrap();
        assert_eq!(s, StrategyConfig::Random {});
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"random"}"#);
        let s: StrategyConfig =
            serde_json::from_str(r#"{"kind":"adaptive","regressor":{"kind":"ridge"},"features":{}}"#).unwrap();
        let StrategyConfig::Adaptive { regressor, retrain_every, .. } = s else { panic!() };
        assert_eq!((regressor.kind, regressor.ridge_alpha, retrain_every), (anncur_core::RegressorKind::Ridge, 1.0, 1));
        assert!(serde_json::from_str::<StrategyConfig>(r#"{"kind":"gold","extra":1}"#).is_err());
    }
}
