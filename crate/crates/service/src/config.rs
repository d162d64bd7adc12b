//! Runtime configuration: which markets are served, by which model, and what
//! the reviewer is told when a draft scores unfair.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("config lists no markets")]
    NoMarkets,
    #[error("market `{market}`: {message}")]
    Market { market: String, message: String },
}

impl ConfigError {
    fn market(market: &str, message: impl Into<String>) -> Self {
        ConfigError::Market { market: market.to_string(), message: message.into() }
    }
}

/// One prompt shown next to the review box: what is wrong and what to do.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptMessage {
    pub problem: String,
    pub solution: String,
}

impl PromptMessage {
    /// The text sent to clients: problem, then solution.
    pub fn render(&self) -> String {
        format!("{} {}", self.problem.trim(), self.solution.trim())
    }
}

/// How the demo page and clients label a market.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketDisplay {
    pub title: String,
    pub worker_noun: String,
    pub description: String,
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    /// Model file; relative paths are resolved against the config file.
    pub model: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub messages: Vec<PromptMessage>,
    #[serde(default)]
    pub display: MarketDisplay,
}

fn default_port() -> u16 {
    8080
}

fn default_attempt_log() -> PathBuf {
    PathBuf::from("attempts.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeConfig {
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_attempt_log")]
    pub attempt_log: PathBuf,
    pub markets: BTreeMap<String, MarketConfig>,
}

impl RuntimeConfig {
    /// Checks the invariants that do not need the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.markets.is_empty() {
            return Err(ConfigError::NoMarkets);
        }
        for (name, m) in &self.markets {
            if name.trim().is_empty() {
                return Err(ConfigError::market(name, "market name is empty"));
            }
            if !(m.threshold > 0.0 && m.threshold < 1.0) {
                return Err(ConfigError::market(name, format!("threshold {} outside (0, 1)", m.threshold)));
            }
            if m.messages.is_empty() {
                return Err(ConfigError::market(name, "at least one prompt message is required"));
            }
            if let Some(i) =
                m.messages.iter().position(|msg| msg.problem.trim().is_empty() || msg.solution.trim().is_empty())
            {
                return Err(ConfigError::market(name, format!("message {} has an empty problem or solution", i + 1)));
            }
        }
        Ok(())
    }

    /// Resolves relative model and log paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.attempt_log);
        for m in self.markets.values_mut() {
            resolve(&mut m.model);
        }
    }
}

/// Reads and validates a JSON config. Relative paths inside it are taken
/// relative to the file's directory. Model files must exist; they are
/// loaded later by [`crate::Validator::from_config`].
pub fn load_runtime_config(path: impl AsRef<Path>) -> Result<RuntimeConfig, ConfigError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let body = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
    let mut config: RuntimeConfig =
        serde_json::from_str(&body).map_err(|e| ConfigError::Parse { path: shown, message: e.to_string() })?;
    config.validate()?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    for (name, m) in &config.markets {
        if !m.model.is_file() {
            return Err(ConfigError::market(name, format!("model file {} not found", m.model.display())));
        }
    }
    Ok(config)
}
