//! Synthetic study designs for tests and demos.

use anncur_core::{HeuristicKind, Instance, RegressorSpec};

use crate::config::{GroupConfig, StrategyConfig, StudyConfig};

/// `n_eval` evaluation and `n_control` control instances, each with a
/// choice set for every level 1..=5 and no assigned levels.
pub fn bank(n_control: usize, n_eval: usize) -> Vec<Instance> {
    (0..n_control)
        .map(|i| format!("c{i:02}"))
        .chain((0..n_eval).map(|i| format!("e{i:02}")))
        .map(|id| {
            let mut inst = Instance::new(id.clone(), format!("Text of {id} with a few words."));
            inst.gold_label = Some(format!("{id}-gold"));
            inst.choice_sets = Some(
                (1..=5u8)
                    .map(|l| {
                        let mut set = vec![format!("{id}-gold")];
                        set.extend((1..6).map(|d| format!("{id}-L{l}-d{d}")));
                        (l, set)
                    })
                    .collect(),
            );
            inst
        })
        .collect()
}

/// Four groups (random, external heuristic scores, adaptive GP, gold)
/// over [`bank`], with seed 5 and disjoint choices required.
pub fn four_arm(id: &str, n_control: usize, n_eval: usize) -> StudyConfig {
    let instances = bank(n_control, n_eval);
    let control_ids = instances[..n_control].iter().map(|i| i.id.clone()).collect();
    let evaluation_ids: Vec<String> = instances[n_control..].iter().map(|i| i.id.clone()).collect();
    let scores = evaluation_ids.iter().enumerate().map(|(k, id)| (id.clone(), (k * 7 % 11) as f64)).collect();
    let features =
        evaluation_ids.iter().enumerate().map(|(k, id)| (id.clone(), vec![(k % 9) as f64, 1.0])).collect();
    StudyConfig {
        id: id.into(),
        seed: 5,
        instances,
        control_ids,
        evaluation_ids,
        groups: vec![
            GroupConfig { name: "random".into(), strategy: StrategyConfig::Random {} },
            GroupConfig {
                name: "mlm".into(),
                strategy: StrategyConfig::Heuristic { heuristic: HeuristicKind::External, scores: Some(scores) },
            },
            GroupConfig {
                name: "gp".into(),
                strategy: StrategyConfig::Adaptive {
                    regressor: RegressorSpec::gp(1.0, 1.0),
                    retrain_every: 1,
                    features,
                },
            },
            GroupConfig { name: "gold".into(), strategy: StrategyConfig::Gold {} },
        ],
        consent_text: "I agree.".into(),
        disjoint_choices: true,
    }
}

