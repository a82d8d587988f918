//! Live annotation studies: participant sessions with per-group curricula,
//! an append-only event log, anonymized export and the group comparison
//! report, plus the HTTP API in front of them.

pub mod analysis;
pub mod config;
pub mod error;
pub mod export;
pub mod fixtures;
pub mod http;
pub mod service;
pub mod store;
pub mod study;

pub use analysis::{analyze, analyze_export, AnalysisParams, Report};
pub use config::{GroupConfig, StrategyConfig, StudyConfig};
pub use error::StudyError;
pub use export::{parse_export, ExportHeader, ExportRow};
pub use service::Service;
pub use study::{Next, QuestionnaireResponse, Study};
