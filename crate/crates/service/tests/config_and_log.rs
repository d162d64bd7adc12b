mod support;

use fairgate_core::Label;
use fairgate_service::{
    correction_stats, load_runtime_config, moderation_flags, read_attempt_log, AttemptLog, ConfigError, NewAttempt,
    Service, StartupError,
};
use proptest::prelude::*;
use serde_json::json;
use support::{messages, write_zero_model, Fixture};

fn write_config(dir: &std::path::Path, markets: serde_json::Value) -> std::path::PathBuf {
    write_zero_model(&dir.join("zero.json"));
    let path = dir.join("config.json");
    std::fs::write(&path, json!({"markets": markets}).to_string()).unwrap();
    path
}

fn market_error(err: ConfigError) -> (String, String) {
    match err {
        ConfigError::Market { market, message } => (market, message),
        other => panic!("expected a market error, got {other}"),
    }
}

#[test]
fn threshold_out_of_range_names_the_market() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        json!({
            "uber": {"model": "zero.json", "messages": messages("uber")},
            "upwork": {"model": "zero.json", "threshold": 1.5, "messages": messages("upwork")}
        }),
    );
    let (market, message) = market_error(load_runtime_config(&path).unwrap_err());
    assert_eq!(market, "upwork");
    assert!(message.contains("1.5"), "{message}");
    // the service refuses to start on the same file
    assert!(matches!(Service::from_config_file(&path), Err(StartupError::Config(_))));
}

#[test]
fn empty_message_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), json!({"grubhub": {"model": "zero.json", "messages": []}}));
    assert_eq!(market_error(load_runtime_config(&path).unwrap_err()).0, "grubhub");
}

#[test]
fn missing_or_broken_model_file_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), json!({"uber": {"model": "absent.json", "messages": messages("uber")}}));
    assert_eq!(market_error(load_runtime_config(&path).unwrap_err()).0, "uber");

    std::fs::write(dir.path().join("broken.json"), "{\"format_version\": 1}").unwrap();
    let path = write_config(dir.path(), json!({"uber": {"model": "broken.json", "messages": messages("uber")}}));
    let config = load_runtime_config(&path).unwrap();
    assert!(matches!(Service::from_config(&config), Err(StartupError::Config(ConfigError::Market { .. }))));
}

#[test]
fn unknown_keys_and_empty_market_sets_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), json!({}));
    assert!(matches!(load_runtime_config(&path), Err(ConfigError::NoMarkets)));
    let path = dir.path().join("typo.json");
    std::fs::write(&path, json!({"markets": {}, "prot": 1}).to_string()).unwrap();
    assert!(matches!(load_runtime_config(&path), Err(ConfigError::Parse { .. })));
}

#[test]
fn three_market_config_serves_exactly_those_markets() {
    let fixture = Fixture::trained();
    let config = load_runtime_config(&fixture.config_path).unwrap();
    assert_eq!(config.port, 0);
    assert!(config.attempt_log.starts_with(fixture.dir.path()));
    let service = Service::from_config(&config).unwrap();
    let names: Vec<String> = service.validator().markets().into_iter().map(|m| m.market).collect();
    assert_eq!(names, support::MARKETS);
    assert!(!service.validator().has_market("lyft"));
}

#[test]
fn validation_is_deterministic_and_monotone_in_the_threshold() {
    let fixture = Fixture::trained();
    let service = fixture.service();
    let v = service.validator();
    let texts = [
        "the courier was careless and then the spill",
        "the courier was polite but due to the kitchen",
        "frankly the freelancer was sloppy and thanks to the outage zero stars",
        "chauffeur",
    ];
    for market in support::MARKETS {
        let mut scored: Vec<_> = texts.iter().map(|t| v.validate_review(market, t).unwrap()).collect();
        for (t, r) in texts.iter().zip(&scored) {
            assert_eq!(&v.validate_review(market, t).unwrap(), r);
        }
        scored.sort_by(|a, b| a.p_unfair.total_cmp(&b.p_unfair));
        // once a score is unfair every higher score is too
        let first_unfair = scored.iter().position(|r| r.verdict == Label::Unfair).unwrap_or(scored.len());
        assert!(scored[first_unfair..].iter().all(|r| r.verdict == Label::Unfair));
    }
}

#[derive(Debug, Clone)]
struct Step {
    session: u8,
    unfair: bool,
    submitted: bool,
}

fn step() -> impl Strategy<Value = Step> {
    (0u8..6, any::<bool>(), prop::bool::weighted(0.3)).prop_map(|(session, unfair, submitted)| Step {
        session,
        unfair,
        submitted,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_is_append_only_and_analytics_agree(steps in prop::collection::vec(step(), 0..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let log = AttemptLog::open(&path).unwrap();
        let mut accepted = Vec::new();
        for s in &steps {
            let session = format!("s{}", s.session);
            let verdict = if s.unfair { Label::Unfair } else { Label::Fair };
            let attempt = NewAttempt {
                session_id: &session,
                market: "uber",
                text: "t",
                p_unfair: if s.unfair { 0.75 } else { 0.25 },
                verdict,
                submitted: s.submitted,
            };
            if let Ok(r) = log.append(attempt) {
                accepted.push(r);
            }
            let reread = read_attempt_log(&path).unwrap();
            prop_assert_eq!(&reread, &accepted);
        }
        prop_assert_eq!(AttemptLog::open(&path).unwrap().records(), accepted.clone());

        let stats = correction_stats(&accepted, None);
        prop_assert!(stats.sessions_corrected <= stats.sessions_initially_unfair);
        prop_assert!(stats.sessions_initially_unfair <= stats.sessions_total);
        let flags = moderation_flags(&accepted, Some("uber"));
        // flags = initially unfair minus corrected, among submitted sessions
        let submitted_unfair_start = accepted
            .iter()
            .filter(|r| r.submitted)
            .filter(|r| accepted.iter().any(|f| f.session_id == r.session_id && f.sequence_no == 1 && f.verdict == Label::Unfair))
            .count();
        prop_assert_eq!(flags.len(), submitted_unfair_start - stats.sessions_corrected);
        prop_assert!(flags.windows(2).all(|w| w[0].submitted_at <= w[1].submitted_at));
    }
}
