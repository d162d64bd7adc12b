//! Append-only JSONL store of review attempts.
//!
//! One writer at a time holds the lock, assigns the next per-session
//! sequence number, writes a line and syncs it to disk before returning.
//! Opening an existing log replays it, so numbering continues across
//! restarts.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use fairgate_core::Label;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub session_id: String,
    pub market: String,
    /// 1 for a session's first attempt, then strictly increasing.
    pub sequence_no: u64,
    pub text: String,
    pub p_unfair: f64,
    pub verdict: Label,
    /// Final submission; at most one per session.
    pub submitted: bool,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("attempt log {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("attempt log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("{0}")]
    Conflict(String),
}

/// An attempt before the log numbers and stamps it.
#[derive(Debug, Clone)]
pub struct NewAttempt<'a> {
    pub session_id: &'a str,
    pub market: &'a str,
    pub text: &'a str,
    pub p_unfair: f64,
    pub verdict: Label,
    pub submitted: bool,
}

#[derive(Debug)]
struct SessionState {
    market: String,
    last_seq: u64,
    submitted: bool,
}

#[derive(Debug)]
struct LogState {
    file: File,
    records: Vec<AttemptRecord>,
    sessions: HashMap<String, SessionState>,
}

/// Why `record` may not follow `session`, if it may not.
fn conflict(session: Option<&SessionState>, record: &AttemptRecord) -> Option<String> {
    let s = session?;
    if s.market != record.market {
        Some(format!("session `{}` belongs to market `{}`, not `{}`", record.session_id, s.market, record.market))
    } else if record.sequence_no <= s.last_seq {
        Some(format!("session `{}`: sequence {} after {}", record.session_id, record.sequence_no, s.last_seq))
    } else if record.submitted && s.submitted {
        Some(format!("session `{}` was already submitted", record.session_id))
    } else {
        None
    }
}

impl LogState {
    /// Checks `record` against the session invariants and folds it in.
    fn admit(&mut self, record: &AttemptRecord) -> Result<(), String> {
        if let Some(message) = conflict(self.sessions.get(&record.session_id), record) {
            return Err(message);
        }
        let s = self.sessions.entry(record.session_id.clone()).or_insert_with(|| SessionState {
            market: record.market.clone(),
            last_seq: 0,
            submitted: false,
        });
        s.last_seq = record.sequence_no;
        s.submitted |= record.submitted;
        Ok(())
    }
}

#[derive(Debug)]
pub struct AttemptLog {
    path: PathBuf,
    state: Mutex<LogState>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.display().to_string(), source }
}

/// Parses a log body. A final line without its newline that fails to parse
/// is a torn write and is dropped; the returned length is how many bytes
/// are valid.
fn parse_log(body: &str) -> Result<(Vec<AttemptRecord>, usize), LogError> {
    let mut records = Vec::new();
    let mut valid = 0;
    for (i, chunk) in body.split_inclusive('\n').enumerate() {
        let line = chunk.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            valid += chunk.len();
            continue;
        }
        match serde_json::from_str::<AttemptRecord>(line) {
            Ok(r) => {
                records.push(r);
                valid += chunk.len();
            }
            Err(_) if !chunk.ends_with('\n') => {
                tracing::warn!(line = i + 1, "dropping torn final attempt record");
                break;
            }
            Err(e) => return Err(LogError::Corrupt { line: i + 1, message: e.to_string() }),
        }
    }
    Ok((records, valid))
}

/// Every record in a log file, in append order.
pub fn read_attempt_log(path: impl AsRef<Path>) -> Result<Vec<AttemptRecord>, LogError> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_log(&body)?.0)
}

impl AttemptLog {
    /// Opens (creating if needed) and replays the log at `path`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LogError> {
        let path = path.into();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(&path))?;
        }
        let body = match fs::read_to_string(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let (records, valid) = parse_log(&body)?;
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        if valid < body.len() {
            file.set_len(valid as u64).map_err(io_err(&path))?;
        }
        if valid > 0 && !body[..valid].ends_with('\n') {
            file.write_all(b"\n").map_err(io_err(&path))?;
        }
        let mut state = LogState { file, records: Vec::with_capacity(records.len()), sessions: HashMap::new() };
        for (i, r) in records.into_iter().enumerate() {
            state.admit(&r).map_err(|message| LogError::Corrupt { line: i + 1, message })?;
            state.records.push(r);
        }
        Ok(Self { path, state: Mutex::new(state) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> MutexGuard<'_, LogState> {
        // a panic mid-append leaves at worst an unsynced line; keep serving
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Numbers, stamps and durably appends one attempt.
    pub fn append(&self, attempt: NewAttempt<'_>) -> Result<AttemptRecord, LogError> {
        let mut state = self.lock();
        let next = state.sessions.get(attempt.session_id).map_or(1, |s| s.last_seq + 1);
        let record = AttemptRecord {
            session_id: attempt.session_id.to_string(),
            market: attempt.market.to_string(),
            sequence_no: next,
            text: attempt.text.to_string(),
            p_unfair: attempt.p_unfair,
            verdict: attempt.verdict,
            submitted: attempt.submitted,
            timestamp: Utc::now(),
        };
        // check before touching the file so a rejected attempt leaves no trace
        if let Some(message) = conflict(state.sessions.get(attempt.session_id), &record) {
            return Err(LogError::Conflict(message));
        }
        let mut line = serde_json::to_string(&record).expect("attempt record serializes");
        line.push('\n');
        state.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        state.file.sync_data().map_err(io_err(&self.path))?;
        state.admit(&record).map_err(LogError::Conflict)?;
        state.records.push(record.clone());
        Ok(record)
    }

    /// Snapshot of every record so far, in append order.
    pub fn records(&self) -> Vec<AttemptRecord> {
        self.lock().records.clone()
    }

    pub fn len(&self) -> usize {
        self.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
