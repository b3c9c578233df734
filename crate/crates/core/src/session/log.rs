//! Append-only JSON-lines session log.
//!
//! Every line is `{"schema": 1, "kind": "plan" | "trial" | "ios", ...}`. A
//! torn final line (no trailing newline) from a crash is ignored on replay.

use super::{IosRecord, SessionError, SessionPlan, TrialRecord};
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogEntry {
    Plan(SessionPlan),
    Trial(TrialRecord),
    Ios(IosRecord),
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    schema: u32,
    #[serde(flatten)]
    entry: LogEntry,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

impl From<LogError> for SessionError {
    fn from(e: LogError) -> Self {
        SessionError::Log(e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogContents {
    pub plans: Vec<SessionPlan>,
    pub trials: Vec<TrialRecord>,
    pub ios: Vec<IosRecord>,
}

/// Appends are serialized; each record is written with a single
/// `write_all` and flushed to disk.
#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl SessionLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| LogError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(SessionLog {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &LogEntry) -> Result<(), LogError> {
        let line = LogLine {
            schema: LOG_SCHEMA_VERSION,
            entry: entry.clone(),
        };
        let mut text = serde_json::to_string(&line).expect("log entries serialize");
        text.push('\n');
        let io = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        let mut file = self.file.lock().unwrap();
        file.write_all(text.as_bytes()).map_err(io)?;
        file.sync_data().map_err(io)
    }

    pub fn append_plan(&self, plan: &SessionPlan) -> Result<(), SessionError> {
        Ok(self.append(&LogEntry::Plan(plan.clone()))?)
    }

    pub fn append_trial(&self, record: &TrialRecord) -> Result<(), SessionError> {
        Ok(self.append(&LogEntry::Trial(record.clone()))?)
    }

    pub fn append_ios(&self, record: &IosRecord) -> Result<(), SessionError> {
        Ok(self.append(&LogEntry::Ios(record.clone()))?)
    }

    pub fn replay(path: impl AsRef<Path>) -> Result<LogContents, LogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::replay_str(&text).map_err(|(line, message)| LogError::Corrupt {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    fn replay_str(text: &str) -> Result<LogContents, (usize, String)> {
        let mut out = LogContents::default();
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = match serde_json::from_str(line) {
                Ok(l) => l,
                Err(_) if i + 1 == lines.len() && !complete => break,
                Err(e) => return Err((i + 1, e.to_string())),
            };
            if parsed.schema != LOG_SCHEMA_VERSION {
                return Err((i + 1, format!("unsupported schema {}", parsed.schema)));
            }
            match parsed.entry {
                LogEntry::Plan(p) => out.plans.push(p),
                LogEntry::Trial(t) => out.trials.push(t),
                LogEntry::Ios(r) => out.ios.push(r),
            }
        }
        Ok(out)
    }
}
