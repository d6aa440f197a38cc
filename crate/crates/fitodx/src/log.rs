//! Append-only JSONL session log and its replay.
//!
//! Every session transition is one line. A line records the input that
//! caused the transition (nothing for `created`, the question and answer for
//! `answered`) and the trace events the engine emitted in response, so replay
//! can both rebuild the state and check it reproduces the same events.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use fitodx_core::engine::{Engine, EngineState, TraceEvent};
use fitodx_core::{Answer, KnowledgeBase, QuestionId};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("session log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing log line: {0}")]
    Encode(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Created,
    Answered,
}

/// Identifies the knowledge base a session ran against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbStamp {
    pub title: String,
    pub version: u64,
}

impl KbStamp {
    pub fn of(kb: &KnowledgeBase) -> KbStamp {
        KbStamp {
            title: kb.title.clone(),
            version: kb.version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogLine {
    pub ts: DateTime<Utc>,
    pub session_id: String,
    pub kind: LineKind,
    pub kb: KbStamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<QuestionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    pub events: Vec<TraceEvent>,
}

/// Writer half. Each line goes out in a single `write_all` on a file opened
/// in append mode, so concurrent appends never interleave.
#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl SessionLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<SessionLog, LogError> {
        let path = path.into();
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

    pub fn append(&self, line: &LogLine) -> Result<(), LogError> {
        let mut bytes = serde_json::to_vec(line)?;
        bytes.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&bytes)
            .and_then(|()| file.flush())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// A session rebuilt from its log lines.
#[derive(Debug, Clone)]
pub struct ReplayedSession {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub client_note: Option<String>,
    pub state: EngineState,
}

/// A log line replay could not apply. The session it belongs to is dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub line: usize,
    pub session_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct Replay {
    pub sessions: Vec<ReplayedSession>,
    pub skipped: Vec<Skipped>,
}

/// Rebuilds every session in the log at `path` (or only `only`, if given)
/// against `engine`. A missing file is an empty log.
///
/// Lines that fail to decode are skipped: a torn final line is the expected
/// result of a crash mid-append. A session whose lines do not reproduce the
/// logged events, or that was recorded against another knowledge base, is
/// dropped as a whole.
pub fn replay(path: &Path, engine: &Engine, only: Option<&str>) -> Result<Replay, LogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Replay::default()),
        Err(source) => {
            return Err(LogError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let stamp = KbStamp::of(engine.kb());
    let mut order: Vec<String> = Vec::new();
    let mut live: HashMap<String, ReplayedSession> = HashMap::new();
    let mut dead: HashSet<String> = HashSet::new();
    let mut skipped = Vec::new();

    for (idx, raw) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let raw = raw.map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(id) = only {
            if !raw.contains(id) {
                continue;
            }
        }
        let line: LogLine = match serde_json::from_str(&raw) {
            Ok(l) => l,
            Err(e) => {
                skipped.push(Skipped {
                    line: lineno,
                    session_id: None,
                    reason: format!("undecodable line: {e}"),
                });
                continue;
            }
        };
        if only.is_some_and(|id| id != line.session_id) || dead.contains(&line.session_id) {
            continue;
        }
        let mut fail = |reason: String, live: &mut HashMap<String, ReplayedSession>| {
            live.remove(&line.session_id);
            dead.insert(line.session_id.clone());
            skipped.push(Skipped {
                line: lineno,
                session_id: Some(line.session_id.clone()),
                reason,
            });
        };
        if line.kb != stamp {
            fail(format!("recorded against {:?}", line.kb), &mut live);
            continue;
        }
        match line.kind {
            LineKind::Created => {
                if live.contains_key(&line.session_id) {
                    fail("session created twice".into(), &mut live);
                    continue;
                }
                let state = engine.start();
                if state.trace() != line.events.as_slice() {
                    fail("start events differ from the log".into(), &mut live);
                    continue;
                }
                order.push(line.session_id.clone());
                live.insert(
                    line.session_id.clone(),
                    ReplayedSession {
                        session_id: line.session_id.clone(),
                        created_at: line.ts,
                        updated_at: line.ts,
                        client_note: line.client_note.clone(),
                        state,
                    },
                );
            }
            LineKind::Answered => {
                let Some(session) = live.get_mut(&line.session_id) else {
                    fail("answer before creation".into(), &mut live);
                    continue;
                };
                let (Some(q), Some(a)) = (&line.question_id, line.answer) else {
                    fail("answered line without question or answer".into(), &mut live);
                    continue;
                };
                let before = session.state.trace().len();
                if let Err(e) = session.state.submit_answer(q, a) {
                    fail(format!("engine rejected logged answer: {e}"), &mut live);
                    continue;
                }
                if session.state.trace()[before..] != line.events[..] {
                    fail("answer events differ from the log".into(), &mut live);
                    continue;
                }
                session.updated_at = session.updated_at.max(line.ts);
            }
        }
    }

    let sessions = order.into_iter().filter_map(|id| live.remove(&id)).collect();
    Ok(Replay { sessions, skipped })
}
