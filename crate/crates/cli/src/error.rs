use std::fmt;

use anncur_core::corpus::CorpusError;
use anncur_core::simulate::SimError;
use anncur_core::textfeat::FeatureError;
use anncur_study::StudyError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(m) => write!(f, "{m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::BadFractions(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BadParams(m) => CliError::Usage(m),
            SimError::EmptySplit(_) | SimError::TooFewUsers(_) | SimError::MissingTime(_) | SimError::Feature(_) => {
                CliError::Data(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Store(_) | StudyError::Curriculum(_) => CliError::Runtime(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
