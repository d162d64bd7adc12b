//! The `fairgate` command line. Subcommands touch only the files their flags
//! name. Results go to stdout as JSON or a report; diagnostics go to stderr.
//!
//! Exit codes: 0 on success, 1 when the work itself fails, 2 on a usage
//! error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fairgate_core::corpus::{adjudicate, cohen_kappa, load_corpus, stratified_split, write_corpus, AgreementStats};
use fairgate_core::evalbench::{confusion, metrics, render_report, run_benchmark, ReportFormat};
use fairgate_core::models::{save_model, ModelMetadata};
use fairgate_core::trainer::{train, TrainConfig};
use fairgate_core::{LabeledReview, Metrics, ModelKind, SplitRatios};
use fairgate_service::{correction_stats, load_runtime_config, moderation_flags, read_attempt_log, Service};
use serde::Serialize;

pub const CONFIG_ENV: &str = "FAIRGATE_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "fairgate", version, about = "Detect reviews that blame gig workers for things outside their control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

fn model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a coded corpus and resolve each review's label.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// Where to write the resolved reviews as JSON Lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement between the first two coders.
    Kappa {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        market: Option<String>,
    },
    /// Stratified 80/10/10 split into train, test and validation files.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        market: Option<String>,
    },
    /// Train one model for one market.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        market: String,
        #[arg(long, value_parser = model_kind)]
        model: ModelKind,
        /// Training config JSON; unset fields take their defaults.
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        /// Model file. The epoch history goes beside it as `<stem>.history.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Seeds the split and the training run; overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and score every model on every market in the corpus.
    Benchmark {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        /// Models to run (repeat or comma-separate); all four by default.
        #[arg(long, value_parser = model_kind, value_delimiter = ',')]
        model: Vec<ModelKind>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the validator over HTTP until interrupted.
    Serve {
        #[arg(long, env = CONFIG_ENV)]
        config: PathBuf,
        /// Overrides the config's port.
        #[arg(long)]
        port: Option<u16>,
        /// Overrides the config's attempt log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Correction statistics and moderation flags from an attempt log.
    Stats {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        market: Option<String>,
    },
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too, with exit code 0
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return e.exit_code();
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn for_market(reviews: Vec<LabeledReview>, market: Option<&str>) -> Result<Vec<LabeledReview>> {
    let Some(m) = market else { return Ok(reviews) };
    let kept: Vec<_> = reviews.into_iter().filter(|r| r.market == m).collect();
    if kept.is_empty() {
        bail!("corpus has no reviews for market `{m}`");
    }
    Ok(kept)
}

/// Loads a corpus and resolves every label, failing if any review still
/// awaits a third coder.
fn labeled_corpus(path: &Path, market: Option<&str>) -> Result<Vec<LabeledReview>> {
    let reviews = load_corpus(path).with_context(|| format!("loading {}", path.display()))?;
    let adj = adjudicate(for_market(reviews, market)?)?;
    if let Some(first) = adj.needs_tiebreak.first() {
        bail!(
            "{} review(s) need a third coder (first: `{}`); run `fairgate ingest` to list them",
            adj.needs_tiebreak.len(),
            first.id
        );
    }
    Ok(adj.resolved)
}

fn train_config(path: Option<&Path>) -> Result<TrainConfig> {
    let Some(path) = path else { return Ok(TrainConfig::default()) };
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: TrainConfig =
        serde_json::from_str(&body).with_context(|| format!("parsing training config {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// `m.json` → `m.history.csv`.
pub fn history_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("history.csv")
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    reviews: usize,
    resolved: usize,
    needs_tiebreak: Vec<&'a str>,
}

#[derive(Serialize)]
struct SplitSummary {
    train: usize,
    test: usize,
    validation: usize,
}

#[derive(Serialize)]
struct TrainSummary {
    market: String,
    model: ModelKind,
    best_epoch: usize,
    stopped_epoch: usize,
    validation_loss: f64,
    validation_accuracy: f64,
    test: Metrics,
}

#[derive(Serialize)]
struct StatsReport {
    corrections: fairgate_service::CorrectionStats,
    flags: Vec<fairgate_service::ModerationFlag>,
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest { corpus, out: dest } => {
            let reviews = load_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
            let total = reviews.len();
            let adj = adjudicate(reviews)?;
            if let Some(dest) = dest {
                write_corpus(&dest, &adj.resolved).with_context(|| format!("writing {}", dest.display()))?;
            }
            print_json(
                out,
                &IngestSummary {
                    reviews: total,
                    resolved: adj.resolved.len(),
                    needs_tiebreak: adj.needs_tiebreak.iter().map(|r| r.id.as_str()).collect(),
                },
            )
        }
        Command::Kappa { corpus, market } => {
            let reviews = load_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
            let (a, b): (Vec<_>, Vec<_>) = for_market(reviews, market.as_deref())?
                .iter()
                .filter(|r| r.coders.len() >= 2)
                .map(|r| (r.coders[0], r.coders[1]))
                .unzip();
            if a.is_empty() {
                bail!("no review carries two coder labels");
            }
            let stats: AgreementStats<f64> = cohen_kappa(&a, &b)?;
            print_json(out, &stats)
        }
        Command::Split { corpus, out: dir, seed, market } => {
            let reviews = labeled_corpus(&corpus, market.as_deref())?;
            let split = stratified_split(&reviews, SplitRatios::default(), seed)?;
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, part) in [("train", &split.train), ("test", &split.test), ("validation", &split.validation)] {
                let path = dir.join(format!("{name}.jsonl"));
                write_corpus(&path, part).with_context(|| format!("writing {}", path.display()))?;
            }
            print_json(
                out,
                &SplitSummary { train: split.train.len(), test: split.test.len(), validation: split.validation.len() },
            )
        }
        Command::Train { corpus, market, model, config, out: dest, seed } => {
            let mut config = train_config(config.as_deref())?;
            config.model_kind = model;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let reviews = labeled_corpus(&corpus, Some(&market))?;
            let split = stratified_split(&reviews, SplitRatios::default(), config.seed)?;
            let _ = writeln!(
                err,
                "training {model} on {market}: {} train, {} validation, {} test",
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
            let outcome = train::<f64>(&split, &config)?;
            let meta = ModelMetadata::new(model, &market, serde_json::to_value(&config)?);
            save_model(&dest, &outcome.model, &meta).with_context(|| format!("writing {}", dest.display()))?;
            write_file(&history_path(&dest), &outcome.history.to_csv())?;
            let best = outcome.history.best();
            let test = metrics(&confusion(&outcome.model, &split.test, config.threshold)?)?;
            print_json(
                out,
                &TrainSummary {
                    market,
                    model,
                    best_epoch: best.epoch,
                    stopped_epoch: outcome.history.stopped_epoch,
                    validation_loss: best.val_loss,
                    validation_accuracy: best.val_acc,
                    test,
                },
            )
        }
        Command::Benchmark { corpus, config, model, seed, format, out: dest } => {
            let config = train_config(config.as_deref())?;
            let kinds = if model.is_empty() { ModelKind::ALL.to_vec() } else { model };
            let mut corpora: BTreeMap<String, Vec<LabeledReview>> = BTreeMap::new();
            for r in labeled_corpus(&corpus, None)? {
                corpora.entry(r.market.clone()).or_default().push(r);
            }
            let _ = writeln!(err, "benchmarking {} model(s) on {} market(s)", kinds.len(), corpora.len());
            let report = run_benchmark::<f64>(&corpora, &kinds, &config, seed)?;
            let rendered = render_report(&report, format.into())?;
            match dest {
                Some(dest) => write_file(&dest, &rendered),
                None => Ok(out.write_all(rendered.as_bytes())?),
            }
        }
        Command::Serve { config, port, log } => serve(&config, port, log, err),
        Command::Stats { log, market } => {
            let records = read_attempt_log(&log)?;
            print_json(
                out,
                &StatsReport {
                    corrections: correction_stats(&records, market.as_deref()),
                    flags: moderation_flags(&records, market.as_deref()),
                },
            )
        }
    }
}

fn serve(config_path: &Path, port: Option<u16>, log: Option<PathBuf>, err: &mut dyn Write) -> Result<()> {
    let mut config = load_runtime_config(config_path)?;
    if let Some(port) = port {
        config.port = port;
    }
    if let Some(log) = log {
        config.attempt_log = log;
    }
    let service = Arc::new(Service::from_config(&config)?);
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
            .await
            .with_context(|| format!("binding port {}", config.port))?;
        let markets: Vec<String> = service.validator().markets().into_iter().map(|m| m.market).collect();
        let _ = writeln!(err, "serving {} on http://{}", markets.join(", "), listener.local_addr()?);
        fairgate_service::serve(service, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("serving HTTP")
    })
}
