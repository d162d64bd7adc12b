//! The classifier zoo: three ngram logistic regressions and a bidirectional
//! GRU, all scoring p(unfair).

mod gru;
mod io;
mod logistic;
mod matrix;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{encode_sequence, vectorize, FeatureError, VocabMode, Vocabulary, UNKNOWN_ID};
use crate::scalar::Scalar;

pub use gru::{GruCache, GruCell, GruClassifier, GruGradients};
pub use io::{load_model, model_from_json, model_to_json, save_model, ModelMetadata, FORMAT_VERSION};
pub use logistic::{LogisticRegressionModel, LrGradients};
pub use matrix::Matrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature index {index} out of range for {size} features")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("gradient requested for an empty batch")]
    EmptyBatch,
    #[error("sequence has no non-padding tokens")]
    EmptySequence,
    #[error("cache does not belong to this model: {0}")]
    CacheMismatch(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Probability that a review is unfair (label 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PredictionScore<T> {
    pub p_unfair: T,
}

impl<T: Scalar> PredictionScore<T> {
    pub fn new(p_unfair: T) -> Self {
        Self { p_unfair }
    }

    /// Unfair iff p ≥ threshold.
    pub fn verdict(&self, threshold: T) -> Label {
        if self.p_unfair >= threshold {
            Label::Unfair
        } else {
            Label::Fair
        }
    }
}

/// Floor applied to log arguments in [`bce_loss`].
pub const LOSS_EPSILON: f64 = 1e-12;

/// Binary cross-entropy −[y ln p + (1−y) ln(1−p)] with the log argument
/// floored at ε = 1e-12 (or the type's machine epsilon, if larger).
pub fn bce_loss<T: Scalar>(p: T, y: Label) -> T {
    let eps = T::lit(LOSS_EPSILON).max(T::epsilon());
    let q = if y.is_unfair() { p } else { T::one() - p };
    -(q.max(eps).min(T::one()).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "word-lr")]
    WordLr,
    #[serde(rename = "char-lr")]
    CharLr,
    #[serde(rename = "combined-lr")]
    CombinedLr,
    #[serde(rename = "bigru")]
    BiGru,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::WordLr, ModelKind::CharLr, ModelKind::CombinedLr, ModelKind::BiGru];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::WordLr => "word-lr",
            ModelKind::CharLr => "char-lr",
            ModelKind::CombinedLr => "combined-lr",
            ModelKind::BiGru => "bigru",
        }
    }

    pub fn vocab_mode(self) -> VocabMode {
        match self {
            ModelKind::WordLr => VocabMode::WordNgram,
            ModelKind::CharLr => VocabMode::CharNgram,
            ModelKind::CombinedLr => VocabMode::Combined,
            ModelKind::BiGru => VocabMode::Sequence,
        }
    }

    pub fn is_linear(self) -> bool {
        self != ModelKind::BiGru
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind `{s}` (expected word-lr, char-lr, combined-lr or bigru)"))
    }
}

/// The GRU network together with its token vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceClassifier<T> {
    pub network: GruClassifier<T>,
    pub vocab: Vocabulary,
    pub max_len: usize,
}

impl<T: Scalar> SequenceClassifier<T> {
    /// Token ids for `text`; a text without tokens is read as a single
    /// unknown token.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>, ModelError> {
        let ids = encode_sequence(text, &self.vocab, self.max_len)?;
        Ok(if ids.is_empty() { vec![UNKNOWN_ID] } else { ids })
    }
}

/// Any trained classifier, ready to score raw text.
// one model per market, loaded once; boxing would buy nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel<T> {
    Linear { kind: ModelKind, model: LogisticRegressionModel<T> },
    Recurrent(SequenceClassifier<T>),
}

impl<T: Scalar> ClassifierModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ClassifierModel::Linear { kind, .. } => *kind,
            ClassifierModel::Recurrent(_) => ModelKind::BiGru,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            ClassifierModel::Linear { model, .. } => &model.vocab,
            ClassifierModel::Recurrent(s) => &s.vocab,
        }
    }

    pub fn predict_text(&self, text: &str) -> Result<PredictionScore<T>, ModelError> {
        match self {
            ClassifierModel::Linear { model, .. } => model.predict(&vectorize(text, &model.vocab)?),
            ClassifierModel::Recurrent(s) => s.network.predict(&s.encode(text)?),
        }
    }

    pub fn param_slices(&self) -> Vec<&[T]> {
        match self {
            ClassifierModel::Linear { model, .. } => model.param_slices(),
            ClassifierModel::Recurrent(s) => s.network.param_slices(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        assert_eq!(bce_loss(1.0_f64, Label::Unfair), 0.0);
        assert_eq!(bce_loss(0.0_f64, Label::Fair), 0.0);
        for y in Label::ALL {
            assert!((bce_loss(0.5_f64, y) - std::f64::consts::LN_2).abs() < 1e-12);
        }
        assert!((bce_loss(0.9_f64, Label::Fair) - (-(0.1_f64).ln())).abs() < 1e-12);
        assert!((bce_loss(0.9_f64, Label::Fair) - std::f64::consts::LN_10).abs() < 1e-12);
        // clamped instead of infinite
        assert!((bce_loss(0.0_f64, Label::Unfair) - (-(1e-12_f64).ln())).abs() < 1e-9);
        assert!(bce_loss(1.0_f32, Label::Fair).is_finite());
    }

    #[test]
    fn loss_is_nonnegative_and_zero_only_at_target() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            for y in Label::ALL {
                let l = bce_loss(p, y);
                assert!(l >= 0.0);
                assert_eq!(l == 0.0, p == y.target::<f64>());
            }
        }
    }

    #[test]
    fn verdict_is_closed_at_threshold() {
        assert_eq!(PredictionScore::new(0.5).verdict(0.5), Label::Unfair);
        assert_eq!(PredictionScore::new(0.4999).verdict(0.5), Label::Fair);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("cnn".parse::<ModelKind>().is_err());
    }
}
