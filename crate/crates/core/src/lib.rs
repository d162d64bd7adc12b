//! Core of the fairgate toolkit: detect written reviews that blame a gig
//! worker for factors outside their control.
//!
//! The pipeline runs corpus loading and adjudication ([`corpus`]), ngram and
//! token featurization ([`features`]), the classifier zoo ([`models`]), ADAM
//! training with early stopping ([`trainer`]) and the model × market
//! benchmark grid ([`evalbench`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f64` instantiation used by the service and the CLI.

pub mod corpus;
pub mod evalbench;
pub mod features;
pub mod models;
mod scalar;
pub mod seed;
pub mod synthetic;
pub mod trainer;

pub use corpus::{Label, LabeledReview, SplitCorpus, SplitRatios};
pub use features::{SparseVector, Vocabulary};
pub use models::{ModelKind, PredictionScore};
pub use scalar::{sigmoid, Scalar};

pub type LogisticRegression = models::LogisticRegressionModel<f64>;
pub type BiGru = models::GruClassifier<f64>;
pub type Classifier = models::ClassifierModel<f64>;
pub type Prediction = models::PredictionScore<f64>;
pub type Agreement = corpus::AgreementStats<f64>;
pub type Metrics = evalbench::Metrics<f64>;
pub type Evaluation = trainer::Evaluation<f64>;
pub type Adam = trainer::AdamState<f64>;
