//! Correction statistics and moderation flags derived from the attempt log.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use fairgate_core::Label;
use serde::{Deserialize, Serialize};

use crate::attempts::AttemptRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionStats {
    pub sessions_total: usize,
    /// Sessions whose first attempt scored unfair.
    pub sessions_initially_unfair: usize,
    /// Of those, sessions whose submitted attempt scored fair.
    pub sessions_corrected: usize,
    /// corrected / initially unfair; 0 when nobody was prompted.
    pub correction_rate: f64,
}

pub const KEPT_UNFAIR: &str = "kept-unfair-after-prompt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerationFlag {
    pub session_id: String,
    pub market: String,
    pub final_text: String,
    pub p_unfair: f64,
    pub reason: String,
    pub submitted_at: DateTime<Utc>,
}

struct Session<'a> {
    first: &'a AttemptRecord,
    submitted: Option<&'a AttemptRecord>,
}

/// Groups records by session, keyed in session-id order.
fn sessions<'a>(records: &'a [AttemptRecord], market: Option<&str>) -> BTreeMap<&'a str, Session<'a>> {
    let mut out: BTreeMap<&str, Session> = BTreeMap::new();
    for r in records.iter().filter(|r| market.is_none_or(|m| r.market == m)) {
        let s = out.entry(r.session_id.as_str()).or_insert(Session { first: r, submitted: None });
        if r.sequence_no < s.first.sequence_no {
            s.first = r;
        }
        if r.submitted {
            s.submitted = Some(r);
        }
    }
    out
}

pub fn correction_stats(records: &[AttemptRecord], market: Option<&str>) -> CorrectionStats {
    let all = sessions(records, market);
    let prompted: Vec<&Session> = all.values().filter(|s| s.first.verdict == Label::Unfair).collect();
    let corrected = prompted.iter().filter(|s| s.submitted.is_some_and(|r| r.verdict == Label::Fair)).count();
    CorrectionStats {
        sessions_total: all.len(),
        sessions_initially_unfair: prompted.len(),
        sessions_corrected: corrected,
        correction_rate: if prompted.is_empty() { 0.0 } else { corrected as f64 / prompted.len() as f64 },
    }
}

/// Sessions that started unfair and were submitted still unfair, oldest
/// submission first.
pub fn moderation_flags(records: &[AttemptRecord], market: Option<&str>) -> Vec<ModerationFlag> {
    let mut flags: Vec<ModerationFlag> = sessions(records, market)
        .into_values()
        .filter(|s| s.first.verdict == Label::Unfair)
        .filter_map(|s| s.submitted.filter(|r| r.verdict == Label::Unfair))
        .map(|r| ModerationFlag {
            session_id: r.session_id.clone(),
            market: r.market.clone(),
            final_text: r.text.clone(),
            p_unfair: r.p_unfair,
            reason: KEPT_UNFAIR.to_string(),
            submitted_at: r.timestamp,
        })
        .collect();
    flags.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then_with(|| a.session_id.cmp(&b.session_id)));
    flags
}
