use thiserror::Error;

use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error("study '{0}' already exists")]
    StudyExists(String),
    #[error("unknown study '{0}'")]
    UnknownStudy(String),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown participant key")]
    UnknownKey,
    #[error("participant key already registered")]
    DuplicateKey,
    #[error("consent is required before taking part")]
    ConsentRequired,
    #[error("session is complete")]
    SessionComplete,
    #[error("session is incomplete: {position} of {total} annotations")]
    SessionIncomplete { position: usize, total: usize },
    #[error("submitted instance '{got}' but the current instance is '{expected}'")]
    OutOfOrderSubmission { expected: String, got: String },
    #[error("elapsed_ms must be a positive integer")]
    BadElapsed,
    #[error("choice '{0}' was not presented")]
    UnknownChoice(String),
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("malformed export: {0}")]
    MalformedExport(String),
    #[error("curriculum failure: {0}")]
    Curriculum(#[from] anncur_core::curriculum::CurriculumError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl StudyError {
    /// Stable snake-case code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            StudyError::InvalidConfig(_) => "invalid_config",
            StudyError::StudyExists(_) => "study_exists",
            StudyError::UnknownStudy(_) => "unknown_study",
            StudyError::UnknownSession(_) => "unknown_session",
            StudyError::UnknownKey => "unknown_key",
            StudyError::DuplicateKey => "duplicate_key",
            StudyError::ConsentRequired => "consent_required",
            StudyError::SessionComplete => "session_complete",
            StudyError::SessionIncomplete { .. } => "session_incomplete",
            StudyError::OutOfOrderSubmission { .. } => "out_of_order_submission",
            StudyError::BadElapsed => "bad_elapsed",
            StudyError::UnknownChoice(_) => "unknown_choice",
            StudyError::BadRequest(_) => "bad_request",
            StudyError::MalformedExport(_) => "malformed_export",
            StudyError::Curriculum(_) => "curriculum_failure",
            StudyError::Store(_) => "store_failure",
        }
    }
}
