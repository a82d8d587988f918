//! Annotation curricula.
//!
//! Orders annotation instances easy-first using heuristic scores or
//! regressors trained on an annotator's own timings, and evaluates those
//! orderings against recorded annotation times.
//!
//! The crate is organised bottom-up:
//!
//! * [`stats`]: rank correlation, significance tests, outlier capping.
//! * [`textfeat`]: tokenization, readability heuristics, bag-of-words.
//! * [`corpus`]: timed datasets and train/dev/test splits.
//! * [`estimators`]: ridge, Gaussian-process, and boosted-tree regressors.
//! * [`curriculum`]: random, heuristic, gold, and adaptive orderings.
//! * [`simulate`]: static and interactive evaluation with simulated annotators.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod corpus;
pub mod curriculum;
pub mod estimators;
pub mod par;
pub mod simulate;
pub mod stats;
pub mod textfeat;

pub mod rng;

pub use corpus::{Dataset, Instance, SplitAssignment, TimedRecord};
pub use curriculum::{CurriculumState, Strategy};
pub use estimators::{fit, predict, Metrics, RegressorKind, RegressorSpec, TrainedModel};
pub use par::Execution;
pub use textfeat::{FeatureTable, FeatureVector, HeuristicKind, ScoreTable};
