//! The review validator as a network service. Drafts are scored with the
//! market's model and unfair ones get the market's prompt messages back.
//! Attempts go to an append-only log, from which correction rates and
//! moderation flags are computed.

pub mod analytics;
pub mod attempts;
pub mod config;
mod error;
pub mod http;
pub mod validator;

use std::path::Path;

use thiserror::Error;

pub use analytics::{correction_stats, moderation_flags, CorrectionStats, ModerationFlag};
pub use attempts::{read_attempt_log, AttemptLog, AttemptRecord, LogError, NewAttempt};
pub use config::{load_runtime_config, ConfigError, MarketConfig, MarketDisplay, PromptMessage, RuntimeConfig};
pub use error::ServiceError;
pub use http::{router, serve};
pub use validator::{MarketInfo, ValidationResponse, Validator, MAX_TEXT_CHARS};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Loaded models plus the attempt log; shared by every request.
#[derive(Debug)]
pub struct Service {
    validator: Validator,
    log: AttemptLog,
}

impl Service {
    pub fn new(validator: Validator, log: AttemptLog) -> Self {
        Self { validator, log }
    }

    /// Loads every model and opens the attempt log named by `config`.
    pub fn from_config(config: &RuntimeConfig) -> Result<Self, StartupError> {
        Ok(Self::new(Validator::from_config(config)?, AttemptLog::open(&config.attempt_log)?))
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self, StartupError> {
        Self::from_config(&load_runtime_config(path)?)
    }

    pub fn validator(&self) -> &Validator {
        &self.validator
    }

    pub fn log(&self) -> &AttemptLog {
        &self.log
    }

    /// Scores `text` and durably appends it as the session's next attempt.
    pub fn record_attempt(
        &self,
        session_id: &str,
        market: &str,
        text: &str,
        submitted: bool,
    ) -> Result<AttemptRecord, ServiceError> {
        if session_id.trim().is_empty() {
            return Err(ServiceError::InvalidRequest("session_id is empty".into()));
        }
        let scored = self.validator.validate_review(market, text)?;
        self.log
            .append(NewAttempt {
                session_id,
                market,
                text,
                p_unfair: scored.p_unfair,
                verdict: scored.verdict,
                submitted,
            })
            .map_err(|e| match e {
                LogError::Conflict(message) => ServiceError::Conflict(message),
                other => ServiceError::internal(other),
            })
    }
}
