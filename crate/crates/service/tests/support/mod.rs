//! Trained fixture models, config files and a live server on an ephemeral
//! port.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fairgate_core::corpus::stratified_split;
use fairgate_core::features::{NgramRange, NgramTable, VocabMode, Vocabulary};
use fairgate_core::models::{save_model, ClassifierModel, LogisticRegressionModel, ModelMetadata};
use fairgate_core::trainer::{train, TrainConfig};
use fairgate_core::{synthetic, ModelKind, SplitRatios};
use fairgate_service::{serve, Service};
use serde_json::json;
use tempfile::TempDir;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

pub const MARKETS: [&str; 3] = ["grubhub", "uber", "upwork"];

/// Trains a word-ngram model for `market` on a small generated corpus.
pub fn train_word_model(market: &str, path: &Path) {
    let reviews = synthetic::generate(synthetic::profile(market).unwrap(), 200, 0.5, 7);
    let split = stratified_split(&reviews, SplitRatios::default(), 7).unwrap();
    let config = TrainConfig { max_epochs: 40, ..TrainConfig::for_kind(ModelKind::WordLr) };
    let outcome = train::<f64>(&split, &config).unwrap();
    let meta = ModelMetadata::new(ModelKind::WordLr, market, serde_json::to_value(&config).unwrap());
    save_model(path, &outcome.model, &meta).unwrap();
}

/// Logistic regression with every weight and the bias at zero.
pub fn write_zero_model(path: &Path) {
    let table = NgramTable::new(NgramRange::new(vec![1]).unwrap(), vec!["a".into(), "b".into()]).unwrap();
    let vocab = Vocabulary::from_tables(VocabMode::WordNgram, Some(table), None).unwrap();
    let model = LogisticRegressionModel::from_parts(vec![0.0, 0.0], 0.0, vocab).unwrap();
    let model = ClassifierModel::Linear { kind: ModelKind::WordLr, model };
    save_model(path, &model, &ModelMetadata::new(ModelKind::WordLr, "zero", json!({}))).unwrap();
}

pub fn messages(market: &str) -> serde_json::Value {
    json!([
        {"problem": format!("This {market} review blames things outside the worker's control."),
         "solution": "Please describe what the worker did."},
        {"problem": "Ratings affect the worker's income.", "solution": "Rate only their own conduct."}
    ])
}

/// A directory holding one trained model per market and a config naming
/// them by relative path.
pub struct Fixture {
    pub dir: TempDir,
    pub config_path: PathBuf,
}

impl Fixture {
    pub fn trained() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut markets = serde_json::Map::new();
        for m in MARKETS {
            train_word_model(m, &dir.path().join(format!("{m}.json")));
            markets.insert(
                m.into(),
                json!({"model": format!("{m}.json"), "messages": messages(m), "display": {"title": m}}),
            );
        }
        Self::with_markets(dir, serde_json::Value::Object(markets))
    }

    pub fn zero() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_zero_model(&dir.path().join("zero.json"));
        let markets = json!({"uber": {"model": "zero.json", "threshold": 0.5, "messages": messages("uber")}});
        Self::with_markets(dir, markets)
    }

    fn with_markets(dir: TempDir, markets: serde_json::Value) -> Self {
        let config_path = dir.path().join("config.json");
        let body = json!({"port": 0, "attempt_log": "logs/attempts.jsonl", "markets": markets});
        std::fs::write(&config_path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
        Self { dir, config_path }
    }

    pub fn service(&self) -> Arc<Service> {
        Arc::new(Service::from_config_file(&self.config_path).unwrap())
    }
}

/// A running server; dropping it shuts the server down.
pub struct Server {
    pub base: String,
    pub service: Arc<Service>,
    stop: Option<oneshot::Sender<()>>,
}

impl Server {
    pub async fn start(service: Arc<Service>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (stop, stopped) = oneshot::channel::<()>();
        tokio::spawn(serve(service.clone(), listener, async {
            let _ = stopped.await;
        }));
        Self { base, service, stop: Some(stop) }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}
