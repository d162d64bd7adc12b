//! Mini-batch ADAM training on the mean binary cross-entropy, with
//! validation-loss early stopping and best-epoch restoration.

mod adam;
mod early_stopping;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, LabeledReview, SplitCorpus};
use crate::features::{build_vocabulary, vectorize, FeatureError, SparseVector, VocabConfig};
use crate::models::{
    bce_loss, ClassifierModel, GruClassifier, LogisticRegressionModel, LrGradients, ModelError, ModelKind,
    SequenceClassifier,
};
use crate::scalar::Scalar;
use crate::seed;

pub use adam::{AdamConfig, AdamState};
pub use early_stopping::{EarlyStopping, Progress};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("training partition contains only `{0}` reviews")]
    SingleClass(Label),
    #[error("review `{0}` has no resolved label")]
    Unlabeled(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("optimizer shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient; update aborted")]
    NonFiniteGradient,
    #[error("cannot evaluate an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Global gradient-norm cap for the recurrent model.
    pub clip_norm: f64,
    pub d_emb: usize,
    pub d_hid: usize,
    pub max_len: usize,
    /// Verdict threshold used for validation accuracy.
    pub threshold: f64,
    pub vocab: VocabConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            model_kind: ModelKind::WordLr,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            seed: 42,
            clip_norm: 5.0,
            d_emb: 32,
            d_hid: 32,
            max_len: 200,
            threshold: 0.5,
            vocab: VocabConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn for_kind(model_kind: ModelKind) -> Self {
        Self { model_kind, ..Self::default() }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return fail("epsilon must be positive");
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return fail("batch_size, patience and max_epochs must be at least 1");
        }
        if self.d_emb == 0 || self.d_hid == 0 || self.max_len == 0 {
            return fail("d_emb, d_hid and max_len must be at least 1");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return fail("clip_norm must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// `epoch,train_loss,val_loss,val_acc`, one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_acc);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: ClassifierModel<T>,
    pub history: TrainHistory,
}

/// Mean loss and thresholded accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<T> {
    pub loss: T,
    pub accuracy: T,
}

/// Mean BCE and accuracy of `(p_unfair, label)` pairs, verdict p ≥ threshold.
pub fn score_predictions<T: Scalar>(
    scored: impl IntoIterator<Item = (T, Label)>,
    threshold: T,
) -> Result<Evaluation<T>, TrainError> {
    let (mut loss, mut correct, mut n) = (T::zero(), 0usize, 0usize);
    for (p, y) in scored {
        loss += bce_loss(p, y);
        let verdict = if p >= threshold { Label::Unfair } else { Label::Fair };
        correct += usize::from(verdict == y);
        n += 1;
    }
    if n == 0 {
        return Err(TrainError::EmptyDataset);
    }
    Ok(Evaluation { loss: loss / T::from_count(n), accuracy: T::from_count(correct) / T::from_count(n) })
}

/// Scores every review of `dataset` with `model`.
pub fn evaluate<T: Scalar>(
    model: &ClassifierModel<T>,
    dataset: &[LabeledReview],
    threshold: T,
) -> Result<Evaluation<T>, TrainError> {
    let scored = dataset
        .iter()
        .map(|r| Ok((model.predict_text(&r.text)?.p_unfair, label_of(r)?)))
        .collect::<Result<Vec<_>, TrainError>>()?;
    score_predictions(scored, threshold)
}

fn label_of(r: &LabeledReview) -> Result<Label, TrainError> {
    r.label.ok_or_else(|| TrainError::Unlabeled(r.id.clone()))
}

/// A model the epoch loop can optimize.
trait Learner<T: Scalar>: Clone {
    type Input;
    type Grad;

    fn zero_grad(&self) -> Self::Grad;
    fn accumulate(&self, x: &Self::Input, y: Label, scale: T, grad: &mut Self::Grad) -> Result<(), ModelError>;
    fn predict(&self, x: &Self::Input) -> Result<T, ModelError>;
    fn grad_slices(grad: &Self::Grad) -> Vec<&[T]>;
    fn grad_slices_mut(grad: &mut Self::Grad) -> Vec<&mut [T]>;
    fn params(&self) -> Vec<&[T]>;
    fn params_mut(&mut self) -> Vec<&mut [T]>;
}

impl<T: Scalar> Learner<T> for LogisticRegressionModel<T> {
    type Input = SparseVector<T>;
    type Grad = LrGradients<T>;

    fn zero_grad(&self) -> Self::Grad {
        LrGradients::zeros(self.dim())
    }

    fn accumulate(&self, x: &Self::Input, y: Label, scale: T, grad: &mut Self::Grad) -> Result<(), ModelError> {
        self.accumulate_gradient(x, y, scale, grad).map(|_| ())
    }

    fn predict(&self, x: &Self::Input) -> Result<T, ModelError> {
        Ok(LogisticRegressionModel::predict(self, x)?.p_unfair)
    }

    fn grad_slices(grad: &Self::Grad) -> Vec<&[T]> {
        grad.slices()
    }

    fn grad_slices_mut(grad: &mut Self::Grad) -> Vec<&mut [T]> {
        vec![&mut grad.weights, std::slice::from_mut(&mut grad.bias)]
    }

    fn params(&self) -> Vec<&[T]> {
        self.param_slices()
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.param_slices_mut()
    }
}

impl<T: Scalar> Learner<T> for GruClassifier<T> {
    type Input = Vec<usize>;
    // dense, model-shaped accumulator
    type Grad = GruClassifier<T>;

    fn zero_grad(&self) -> Self::Grad {
        self.zeros_like()
    }

    fn accumulate(&self, x: &Self::Input, y: Label, scale: T, grad: &mut Self::Grad) -> Result<(), ModelError> {
        let (_, cache) = self.forward(x)?;
        self.backward(&cache, y)?.add_scaled_to(grad, scale);
        Ok(())
    }

    fn predict(&self, x: &Self::Input) -> Result<T, ModelError> {
        Ok(GruClassifier::predict(self, x)?.p_unfair)
    }

    fn grad_slices(grad: &Self::Grad) -> Vec<&[T]> {
        grad.param_slices()
    }

    fn grad_slices_mut(grad: &mut Self::Grad) -> Vec<&mut [T]> {
        grad.param_slices_mut()
    }

    fn params(&self) -> Vec<&[T]> {
        self.param_slices()
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.param_slices_mut()
    }
}

/// Rescales the gradient so its global L2 norm is at most `max_norm`.
pub fn clip_global_norm<T: Scalar>(slices: &mut [&mut [T]], max_norm: T) -> T {
    let norm = slices.iter().flat_map(|s| s.iter()).map(|v| *v * *v).sum::<T>().sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for s in slices.iter_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }
    norm
}

fn fit<T: Scalar, L: Learner<T>>(
    mut model: L,
    train: &[(L::Input, Label)],
    validation: &[(L::Input, Label)],
    config: &TrainConfig,
    clip: Option<T>,
) -> Result<(L, TrainHistory), TrainError> {
    let adam_config = config.adam();
    let mut adam = AdamState::for_params(&model.params());
    let mut rng = seed::rng(seed::derive(config.seed, &["shuffle"]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(config.patience);
    let threshold = T::lit(config.threshold);
    let mut best = model.clone();
    let mut epochs = Vec::new();

    let measure = |m: &L, data: &[(L::Input, Label)]| -> Result<Evaluation<T>, TrainError> {
        let scored = data.iter().map(|(x, y)| Ok((m.predict(x)?, *y))).collect::<Result<Vec<_>, ModelError>>()?;
        score_predictions(scored, threshold)
    };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grad = model.zero_grad();
            let scale = T::one() / T::from_count(batch.len());
            for &i in batch {
                let (x, y) = &train[i];
                model.accumulate(x, *y, scale, &mut grad)?;
            }
            if let Some(max_norm) = clip {
                clip_global_norm(&mut L::grad_slices_mut(&mut grad), max_norm);
            }
            adam.step(&mut model.params_mut(), &L::grad_slices(&grad), &adam_config)?;
        }
        let train_eval = measure(&model, train)?;
        let val_eval = measure(&model, validation)?;
        let record = EpochRecord {
            epoch,
            train_loss: train_eval.loss.to_f64_lossless(),
            val_loss: val_eval.loss.to_f64_lossless(),
            val_acc: val_eval.accuracy.to_f64_lossless(),
        };
        epochs.push(record);
        match stopper.observe(epoch, record.val_loss) {
            Progress::Improved => best = model.clone(),
            Progress::Waiting => {}
            Progress::Stop => break,
        }
    }
    let history = TrainHistory { best_epoch: stopper.best_epoch().unwrap_or(1), stopped_epoch: epochs.len(), epochs };
    Ok((best, history))
}

fn labeled(reviews: &[LabeledReview]) -> Result<Vec<(&str, Label)>, TrainError> {
    reviews.iter().map(|r| Ok((r.text.as_str(), label_of(r)?))).collect()
}

/// Trains `config.model_kind` on `split.train`, early-stopping on
/// `split.validation`. The vocabulary is built from the training texts only.
pub fn train<T: Scalar>(split: &SplitCorpus, config: &TrainConfig) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(TrainError::EmptyPartition("train"));
    }
    if split.validation.is_empty() {
        return Err(TrainError::EmptyPartition("validation"));
    }
    let train_set = labeled(&split.train)?;
    let val_set = labeled(&split.validation)?;
    for class in Label::ALL {
        if train_set.iter().all(|(_, y)| *y != class) {
            let other = if class == Label::Fair { Label::Unfair } else { Label::Fair };
            return Err(TrainError::SingleClass(other));
        }
    }
    let kind = config.model_kind;
    let vocab = build_vocabulary(train_set.iter().map(|(t, _)| *t), kind.vocab_mode(), &config.vocab)?;

    if kind.is_linear() {
        let featurize = |set: &[(&str, Label)]| -> Result<Vec<(SparseVector<T>, Label)>, TrainError> {
            set.iter().map(|(t, y)| Ok((vectorize(t, &vocab)?, *y))).collect()
        };
        let (xs, vs) = (featurize(&train_set)?, featurize(&val_set)?);
        let init = LogisticRegressionModel::new(vocab.clone());
        let (model, history) = fit(init, &xs, &vs, config, None)?;
        Ok(TrainOutcome { model: ClassifierModel::Linear { kind, model }, history })
    } else {
        let mut rng = seed::rng(seed::derive(config.seed, &["init"]));
        let network = GruClassifier::init(vocab.size(), config.d_emb, config.d_hid, &mut rng);
        let shell = SequenceClassifier { network, vocab, max_len: config.max_len };
        let encode = |set: &[(&str, Label)]| -> Result<Vec<(Vec<usize>, Label)>, TrainError> {
            set.iter().map(|(t, y)| Ok((shell.encode(t)?, *y))).collect()
        };
        let (xs, vs) = (encode(&train_set)?, encode(&val_set)?);
        let (network, history) = fit(shell.network.clone(), &xs, &vs, config, Some(T::lit(config.clip_norm)))?;
        let model = ClassifierModel::Recurrent(SequenceClassifier { network, ..shell });
        Ok(TrainOutcome { model, history })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_evaluation() {
        let scored = [(0.9_f64, Label::Unfair), (0.2, Label::Fair), (0.6, Label::Fair)];
        let e = score_predictions(scored, 0.5).unwrap();
        let expected = (-(0.9_f64.ln()) - 0.8_f64.ln() - 0.4_f64.ln()) / 3.0;
        assert!((e.loss - expected).abs() < 1e-15);
        assert!((e.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(score_predictions::<f64>([], 0.5), Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn perfect_predictions() {
        let e = score_predictions([(1.0_f64, Label::Unfair), (1.0, Label::Unfair)], 0.5).unwrap();
        assert_eq!((e.loss, e.accuracy), (0.0, 1.0));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut a = vec![3.0_f64, 0.0];
        let mut b = vec![4.0_f64];
        let norm = clip_global_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(norm, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
        let mut c = vec![0.1_f64];
        clip_global_norm(&mut [&mut c], 1.0);
        assert_eq!(c, [0.1]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { beta1: 1.0, ..TrainConfig::default() },
            TrainConfig { patience: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(TrainError::Config(_))));
        }
        let parsed: TrainConfig = serde_json::from_str(r#"{"model_kind":"bigru","max_epochs":3}"#).unwrap();
        assert_eq!(parsed.model_kind, ModelKind::BiGru);
        assert_eq!(parsed.learning_rate, 0.001);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr":0.1}"#).is_err());
    }

    #[test]
    fn history_csv_header() {
        let h = TrainHistory {
            epochs: vec![EpochRecord { epoch: 1, train_loss: 0.5, val_loss: 0.25, val_acc: 1.0 }],
            best_epoch: 1,
            stopped_epoch: 1,
        };
        assert_eq!(h.to_csv(), "epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,1\n");
    }
}
