//! Classification metrics and the market × model benchmark grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{stratified_split, CorpusError, Label, LabeledReview, SplitCorpus, SplitRatios};
use crate::models::{ClassifierModel, ModelKind};
use crate::scalar::Scalar;
use crate::seed;
use crate::trainer::{train, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("benchmark report has no rows")]
    EmptyReport,
    #[error("market `{market}`: {source}")]
    Corpus {
        market: String,
        #[source]
        source: CorpusError,
    },
    #[error("market `{market}`, model {kind}: {source}")]
    Train {
        market: String,
        kind: ModelKind,
        #[source]
        source: TrainError,
    },
    #[error("report csv line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Counts with "unfair" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl ConfusionMatrix {
    pub fn new(true_pos: usize, false_pos: usize, false_neg: usize, true_neg: usize) -> Self {
        Self { true_pos, false_pos, false_neg, true_neg }
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Unfair, Label::Unfair) => self.true_pos += 1,
            (Label::Unfair, Label::Fair) => self.false_pos += 1,
            (Label::Fair, Label::Unfair) => self.false_neg += 1,
            (Label::Fair, Label::Fair) => self.true_neg += 1,
        }
    }

    /// Tally `(predicted, actual)` pairs.
    pub fn tally(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut cm = Self::default();
        for (p, a) in pairs {
            cm.record(p, a);
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub accuracy: T,
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

/// Accuracy, precision, recall and F1. Zero denominators give 0.
pub fn metrics<T: Scalar>(cm: &ConfusionMatrix) -> Result<Metrics<T>, EvalError> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let accuracy = ratio(cm.true_pos + cm.true_neg, cm.total());
    let precision: T = ratio(cm.true_pos, cm.true_pos + cm.false_pos);
    let recall: T = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
    let f1 = if precision + recall == T::zero() {
        T::zero()
    } else {
        T::lit(2.0) * precision * recall / (precision + recall)
    };
    Ok(Metrics { accuracy, precision, recall, f1 })
}

/// Confusion matrix of `model` on `dataset` at `threshold`.
pub fn confusion<T: Scalar>(
    model: &ClassifierModel<T>,
    dataset: &[LabeledReview],
    threshold: T,
) -> Result<ConfusionMatrix, TrainError> {
    let mut cm = ConfusionMatrix::default();
    for r in dataset {
        let actual = r.label.ok_or_else(|| TrainError::Unlabeled(r.id.clone()))?;
        cm.record(model.predict_text(&r.text)?.verdict(threshold), actual);
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub market: String,
    pub model: ModelKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    /// Leading hex digits of the SHA-256 of the base config JSON.
    pub config_digest: String,
    pub seed: u64,
}

pub fn config_digest(config: &TrainConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&json).iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// The split a benchmark cell for `market` trains and tests on. Every model
/// kind of a market sees the same partitions.
pub fn benchmark_split(reviews: &[LabeledReview], market: &str, seed_value: u64) -> Result<SplitCorpus, EvalError> {
    stratified_split(reviews, SplitRatios::default(), seed::derive(seed_value, &[market, "split"]))
        .map_err(|source| EvalError::Corpus { market: market.to_string(), source })
}

fn run_cell<T: Scalar>(
    market: &str,
    split: &SplitCorpus,
    kind: ModelKind,
    base: &TrainConfig,
    seed_value: u64,
) -> Result<ReportRow, EvalError> {
    let wrap = |source: TrainError| EvalError::Train { market: market.to_string(), kind, source };
    let config =
        TrainConfig { model_kind: kind, seed: seed::derive(seed_value, &[market, kind.as_str()]), ..base.clone() };
    let outcome = train::<T>(split, &config).map_err(wrap)?;
    let cm = confusion(&outcome.model, &split.test, T::lit(config.threshold)).map_err(wrap)?;
    let m = metrics::<T>(&cm).map_err(|_| wrap(TrainError::EmptyPartition("test")))?;
    Ok(ReportRow {
        market: market.to_string(),
        model: kind,
        accuracy: m.accuracy.to_f64_lossless(),
        precision: m.precision.to_f64_lossless(),
        recall: m.recall.to_f64_lossless(),
        f1: m.f1.to_f64_lossless(),
    })
}

/// Train and test every `(market, kind)` cell. Rows come out in market then
/// `kinds` order; cells run in parallel but each draws from its own seeded
/// stream, so the report matches a sequential run exactly.
pub fn run_benchmark<T: Scalar>(
    corpora: &BTreeMap<String, Vec<LabeledReview>>,
    kinds: &[ModelKind],
    base_config: &TrainConfig,
    seed_value: u64,
) -> Result<BenchmarkReport, EvalError> {
    let splits = corpora
        .iter()
        .map(|(market, reviews)| Ok((market.as_str(), benchmark_split(reviews, market, seed_value)?)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    let cells: Vec<(&str, &SplitCorpus, ModelKind)> =
        splits.iter().flat_map(|(m, s)| kinds.iter().map(move |&k| (*m, s, k))).collect();
    let rows = cells
        .into_par_iter()
        .map(|(market, split, kind)| run_cell::<T>(market, split, kind, base_config, seed_value))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchmarkReport { rows, config_digest: config_digest(base_config), seed: seed_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    Csv,
}

pub const REPORT_COLUMNS: [&str; 6] = ["market", "model", "accuracy", "precision", "recall", "f1"];

fn row_cells(r: &ReportRow) -> [String; 6] {
    [
        r.market.clone(),
        r.model.to_string(),
        format!("{:.4}", r.accuracy),
        format!("{:.4}", r.precision),
        format!("{:.4}", r.recall),
        format!("{:.4}", r.f1),
    ]
}

/// Header line plus one line per row, metrics to four decimals.
pub fn render_report(report: &BenchmarkReport, format: ReportFormat) -> Result<String, EvalError> {
    if report.rows.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let cells: Vec<[String; 6]> = report.rows.iter().map(row_cells).collect();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for c in &cells {
                out.push_str(&c.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Table => {
            let mut widths = REPORT_COLUMNS.map(str::len);
            for c in &cells {
                for (w, s) in widths.iter_mut().zip(c) {
                    *w = (*w).max(s.len());
                }
            }
            let line = |fields: [&str; 6]| {
                let mut l = String::new();
                for (i, (f, w)) in fields.iter().zip(widths).enumerate() {
                    if i > 0 {
                        l.push_str("  ");
                    }
                    // text columns left, numbers right
                    if i < 2 {
                        let _ = write!(l, "{f:<w$}");
                    } else {
                        let _ = write!(l, "{f:>w$}");
                    }
                }
                l.truncate(l.trim_end().len());
                l.push('\n');
                l
            };
            out.push_str(&line(REPORT_COLUMNS));
            for c in &cells {
                out.push_str(&line([&c[0], &c[1], &c[2], &c[3], &c[4], &c[5]].map(String::as_str)));
            }
        }
    }
    Ok(out)
}

/// Rows back from [`render_report`]'s CSV output.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, EvalError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or_default();
    if header != REPORT_COLUMNS.join(",") {
        return Err(EvalError::Parse { line: 1, message: format!("unexpected header `{header}`") });
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: line_no, message };
        let fields: Vec<&str> = line.trim().split(',').collect();
        let [market, model, acc, prec, rec, f1] = fields[..] else {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
        rows.push(ReportRow {
            market: market.to_string(),
            model: model.parse().map_err(err)?,
            accuracy: num(acc)?,
            precision: num(prec)?,
            recall: num(rec)?,
            f1: num(f1)?,
        });
    }
    Ok(rows)
}
