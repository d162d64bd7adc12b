//! Scores review drafts with each market's model.

use std::collections::BTreeMap;
use std::fs;

use fairgate_core::models::{model_from_json, ModelKind};
use fairgate_core::{Classifier, Label};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, MarketDisplay, RuntimeConfig};
use crate::error::ServiceError;

/// Longest accepted review, in characters.
pub const MAX_TEXT_CHARS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResponse {
    pub p_unfair: f64,
    pub verdict: Label,
    pub threshold: f64,
    /// Prompt messages; empty for a fair verdict.
    pub messages: Vec<String>,
    pub model_version: String,
}

/// Public description of a served market (no messages).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInfo {
    pub market: String,
    pub threshold: f64,
    pub model_kind: ModelKind,
    pub model_version: String,
    pub display: MarketDisplay,
}

#[derive(Debug)]
struct MarketModel {
    model: Classifier,
    threshold: f64,
    messages: Vec<String>,
    display: MarketDisplay,
    version: String,
}

/// Immutable after construction; safe to share across request handlers.
#[derive(Debug)]
pub struct Validator {
    markets: BTreeMap<String, MarketModel>,
}

/// `<kind>-<first 12 hex digits of the file's SHA-256>`.
fn model_version(kind: ModelKind, bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{kind}-{hex}")
}

/// Trimmed-empty and oversized texts are rejected.
pub fn check_text(text: &str) -> Result<(), ServiceError> {
    if text.trim().is_empty() {
        return Err(ServiceError::InvalidRequest("text is empty".into()));
    }
    let chars = text.chars().count();
    if chars > MAX_TEXT_CHARS {
        return Err(ServiceError::InvalidRequest(format!("text has {chars} characters (limit {MAX_TEXT_CHARS})")));
    }
    Ok(())
}

impl Validator {
    /// Loads every market's model, failing on the first that does not load.
    pub fn from_config(config: &RuntimeConfig) -> Result<Self, ConfigError> {
        let mut markets = BTreeMap::new();
        for (name, m) in &config.markets {
            let fail = |message: String| ConfigError::Market { market: name.clone(), message };
            let bytes =
                fs::read(&m.model).map_err(|e| fail(format!("cannot read model {}: {e}", m.model.display())))?;
            let body = std::str::from_utf8(&bytes).map_err(|e| fail(format!("model file is not UTF-8: {e}")))?;
            let (model, meta) = model_from_json::<f64>(body).map_err(|e| fail(e.to_string()))?;
            markets.insert(
                name.clone(),
                MarketModel {
                    version: model_version(meta.kind, &bytes),
                    model,
                    threshold: m.threshold,
                    messages: m.messages.iter().map(|msg| msg.render()).collect(),
                    display: m.display.clone(),
                },
            );
        }
        Ok(Self { markets })
    }

    pub fn markets(&self) -> Vec<MarketInfo> {
        self.markets
            .iter()
            .map(|(name, m)| MarketInfo {
                market: name.clone(),
                threshold: m.threshold,
                model_kind: m.model.kind(),
                model_version: m.version.clone(),
                display: m.display.clone(),
            })
            .collect()
    }

    pub fn has_market(&self, market: &str) -> bool {
        self.markets.contains_key(market)
    }

    /// Scores `text` for `market`. No side effects.
    pub fn validate_review(&self, market: &str, text: &str) -> Result<ValidationResponse, ServiceError> {
        let m = self.markets.get(market).ok_or_else(|| ServiceError::UnknownMarket(market.to_string()))?;
        check_text(text)?;
        let score = m.model.predict_text(text).map_err(ServiceError::internal)?;
        if !score.p_unfair.is_finite() {
            return Err(ServiceError::internal(format!("model for `{market}` produced {}", score.p_unfair)));
        }
        let verdict = score.verdict(m.threshold);
        Ok(ValidationResponse {
            p_unfair: score.p_unfair,
            verdict,
            threshold: m.threshold,
            messages: if verdict.is_unfair() { m.messages.clone() } else { Vec::new() },
            model_version: m.version.clone(),
        })
    }
}
