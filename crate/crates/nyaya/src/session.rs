//! Append-only session logs, one file per session.
//!
//! Each line of `<dir>/<session_id>.log` is
//! `<len:8 hex> <crc32:8 hex> <json>\n`, where `len` is the byte length of
//! the JSON payload and `crc32` its IEEE checksum. The first record is the
//! session header; every later record is one turn. A record only counts once
//! its trailing newline is on disk, so a crash mid-append leaves at most one
//! torn line at the end. Loading truncates such a tail and reports a single
//! warning. Damage anywhere before the last line is reported as corrupt
//! and left on disk untouched.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use nyaya_core::agents::Citation;
use nyaya_core::{AgentKind, Classification, Complexity, Decision};
use serde::{Deserialize, Serialize};

/// Turns handed to agents as conversation context.
pub const CONTEXT_TURNS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSummary {
    pub complexity: Complexity,
    pub agents: Vec<AgentKind>,
    pub rationale_tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub decision: Decision,
    pub fired_rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub ordinal: u64,
    pub user_text: String,
    /// Post-compliance text only.
    pub final_text: String,
    pub classification: Classification,
    pub routing: RoutingSummary,
    pub verdict: VerdictSummary,
    pub citations: Vec<Citation>,
    pub started_at: DateTime<Utc>,
    pub completed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Header { session_id: String, created_at: DateTime<Utc> },
    Turn(Turn),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session storage error: {0}")]
    Storage(String),
    #[error("session log `{session_id}` is corrupt at byte {offset}: {reason}")]
    Corrupt { session_id: String, offset: u64, reason: String },
    #[error("turn ordinal {got} does not follow {expected}")]
    OrdinalGap { expected: u64, got: u64 },
}

fn storage(e: std::io::Error) -> SessionError {
    SessionError::Storage(e.to_string())
}

pub fn encode_record(payload: &str) -> String {
    format!("{:08x} {:08x} {}\n", payload.len(), crc32fast::hash(payload.as_bytes()), payload)
}

/// Why a line failed to decode.
fn decode_line(line: &[u8]) -> Result<&str, String> {
    if line.len() < 18 || line[8] != b' ' || line[17] != b' ' {
        return Err("bad record header".into());
    }
    let hex = |b: &[u8]| std::str::from_utf8(b).ok().and_then(|s| u32::from_str_radix(s, 16).ok());
    let len = hex(&line[..8]).ok_or("bad length field")?;
    let crc = hex(&line[9..17]).ok_or("bad checksum field")?;
    let payload = &line[18..];
    if payload.len() != len as usize {
        return Err(format!("length {} does not match header {len}", payload.len()));
    }
    if crc32fast::hash(payload) != crc {
        return Err("checksum mismatch".into());
    }
    std::str::from_utf8(payload).map_err(|e| e.to_string())
}

#[derive(Debug)]
struct Parsed {
    records: Vec<Record>,
    /// Bytes covered by complete, valid records.
    valid_len: u64,
    /// Offset and reason of a torn final record.
    torn: Option<(u64, String)>,
}

fn parse_log(session_id: &str, bytes: &[u8]) -> Result<Parsed, SessionError> {
    let corrupt = |offset: usize, reason: String| SessionError::Corrupt {
        session_id: session_id.to_string(),
        offset: offset as u64,
        reason,
    };
    let mut records = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n').map(|i| pos + i) else {
            return Ok(Parsed { records, valid_len: pos as u64, torn: Some((pos as u64, "incomplete record".into())) });
        };
        match decode_line(&bytes[pos..nl]) {
            Ok(json) => {
                let rec: Record = serde_json::from_str(json).map_err(|e| corrupt(pos, e.to_string()))?;
                records.push(rec);
            }
            Err(reason) if nl + 1 == bytes.len() => {
                return Ok(Parsed { records, valid_len: pos as u64, torn: Some((pos as u64, reason)) });
            }
            Err(reason) => return Err(corrupt(pos, reason)),
        }
        pos = nl + 1;
    }
    Ok(Parsed { records, valid_len: pos as u64, torn: None })
}

/// An open session: its turns in memory plus the append handle.
#[derive(Debug)]
pub struct SessionLog {
    session_id: String,
    created_at: DateTime<Utc>,
    turns: Vec<Turn>,
    file: File,
    len: u64,
}

impl SessionLog {
    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn next_ordinal(&self) -> u64 {
        self.turns.len() as u64
    }

    /// The last `n` turns, oldest first.
    pub fn history(&self, n: usize) -> &[Turn] {
        &self.turns[self.turns.len().saturating_sub(n)..]
    }

    /// Durably append a turn. On failure the file is cut back to its previous
    /// length so later appends do not follow a partial record.
    pub fn append(&mut self, turn: Turn) -> Result<(), SessionError> {
        let expected = self.next_ordinal();
        if turn.ordinal != expected {
            return Err(SessionError::OrdinalGap { expected, got: turn.ordinal });
        }
        let payload = serde_json::to_string(&Record::Turn(turn.clone())).map_err(|e| SessionError::Storage(e.to_string()))?;
        let line = encode_record(&payload);
        let written = self.file.write_all(line.as_bytes()).and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            let _ = self.file.set_len(self.len);
            let _ = self.file.seek(SeekFrom::End(0));
            return Err(storage(e));
        }
        self.len += line.len() as u64;
        self.turns.push(turn);
        Ok(())
    }
}

pub type SessionHandle = Arc<tokio::sync::Mutex<SessionLog>>;

/// Session ids are 32 lowercase hex digits (a simple-format UUID v4).
pub fn is_valid_session_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Directory of session logs with an in-memory cache of open sessions.
/// Holding a session's handle lock serializes work on that session.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    open: Mutex<HashMap<String, SessionHandle>>,
    warnings: Mutex<Vec<String>>,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(storage)?;
        Ok(Self { dir, open: Mutex::new(HashMap::new()), warnings: Mutex::new(Vec::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.log"))
    }

    /// Recovery warnings issued by this store so far.
    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().unwrap().clone()
    }

    pub fn create(&self) -> Result<(String, SessionHandle), SessionError> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = Utc::now();
        let path = self.path(&session_id);
        let payload = serde_json::to_string(&Record::Header { session_id: session_id.clone(), created_at })
            .map_err(|e| SessionError::Storage(e.to_string()))?;
        let line = encode_record(&payload);
        let mut file = OpenOptions::new().create_new(true).append(true).open(&path).map_err(storage)?;
        if let Err(e) = file.write_all(line.as_bytes()).and_then(|_| file.sync_all()) {
            let _ = fs::remove_file(&path);
            return Err(storage(e));
        }
        let log = SessionLog { session_id: session_id.clone(), created_at, turns: Vec::new(), file, len: line.len() as u64 };
        let handle = Arc::new(tokio::sync::Mutex::new(log));
        self.open.lock().unwrap().insert(session_id.clone(), handle.clone());
        Ok((session_id, handle))
    }

    /// Handle for an existing session, loading (and if needed repairing) its
    /// log on first access.
    pub fn get(&self, session_id: &str) -> Result<SessionHandle, SessionError> {
        if !is_valid_session_id(session_id) {
            return Err(SessionError::NotFound(session_id.to_string()));
        }
        let mut open = self.open.lock().unwrap();
        if let Some(h) = open.get(session_id) {
            return Ok(h.clone());
        }
        let log = self.load(session_id)?;
        let handle = Arc::new(tokio::sync::Mutex::new(log));
        open.insert(session_id.to_string(), handle.clone());
        Ok(handle)
    }

    fn load(&self, session_id: &str) -> Result<SessionLog, SessionError> {
        let path = self.path(session_id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SessionError::NotFound(session_id.to_string()))
            }
            Err(e) => return Err(storage(e)),
        };
        let parsed = parse_log(session_id, &bytes)?;
        let mut file = OpenOptions::new().read(true).write(true).open(&path).map_err(storage)?;
        if let Some((offset, reason)) = &parsed.torn {
            file.set_len(parsed.valid_len).and_then(|_| file.sync_all()).map_err(storage)?;
            let msg = format!(
                "session {session_id}: dropped torn record at byte {offset} ({reason}); {} complete records kept",
                parsed.records.len()
            );
            tracing::warn!("{msg}");
            self.warnings.lock().unwrap().push(msg);
        }
        file.seek(SeekFrom::End(0)).map_err(storage)?;

        let mut records = parsed.records.into_iter();
        let corrupt = |reason: &str| SessionError::Corrupt {
            session_id: session_id.to_string(),
            offset: 0,
            reason: reason.to_string(),
        };
        let created_at = match records.next() {
            Some(Record::Header { session_id: sid, created_at }) if sid == session_id => created_at,
            Some(Record::Header { .. }) => return Err(corrupt("header names another session")),
            _ => return Err(corrupt("missing session header")),
        };
        let mut turns = Vec::new();
        for r in records {
            match r {
                Record::Turn(t) if t.ordinal == turns.len() as u64 => turns.push(t),
                Record::Turn(_) => return Err(corrupt("turn ordinals are not contiguous")),
                Record::Header { .. } => return Err(corrupt("duplicate session header")),
            }
        }
        Ok(SessionLog { session_id: session_id.to_string(), created_at, turns, file, len: parsed.valid_len })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nyaya_core::classifier::decide;
    use nyaya_core::DomainLabel;
    use std::collections::BTreeMap;

    pub(crate) fn turn(ordinal: u64, text: &str) -> Turn {
        let now = Utc::now();
        Turn {
            ordinal,
            user_text: text.into(),
            final_text: format!("answer to {text}"),
            classification: decide(BTreeMap::from([(DomainLabel::Criminal, 0.5)]), 0.15),
            routing: RoutingSummary { complexity: Complexity::Simple, agents: vec![], rationale_tags: vec![] },
            verdict: VerdictSummary { decision: Decision::Pass, fired_rules: vec![] },
            citations: vec![],
            started_at: now,
            completed_at: now,
        }
    }

    #[test]
    fn record_framing() {
        let line = encode_record("{}");
        assert_eq!(line, format!("00000002 {:08x} {{}}\n", crc32fast::hash(b"{}")));
        assert_eq!(decode_line(line.trim_end().as_bytes()), Ok("{}"));
        assert!(decode_line(b"00000003 00000000 {}").is_err());
    }

    #[tokio::test]
    async fn create_append_history() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let (id, h) = store.create().unwrap();
        assert!(is_valid_session_id(&id));
        {
            let mut log = h.lock().await;
            assert!(log.turns().is_empty());
            for i in 0..3 {
                log.append(turn(i, &format!("q{i}"))).unwrap();
            }
            let last2: Vec<u64> = log.history(2).iter().map(|t| t.ordinal).collect();
            assert_eq!(last2, [1, 2]);
            assert!(matches!(log.append(turn(7, "x")), Err(SessionError::OrdinalGap { expected: 3, got: 7 })));
        }
        let (id2, _) = store.create().unwrap();
        assert_ne!(id, id2);

        let reopened = SessionStore::open(dir.path()).unwrap();
        let log = reopened.get(&id).unwrap();
        assert_eq!(log.lock().await.turns().len(), 3);
        assert!(reopened.warnings().is_empty());
    }

    #[test]
    fn unknown_and_malformed_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.get("../etc/passwd"), Err(SessionError::NotFound(_))));
        assert!(matches!(store.get(&"a".repeat(32)), Err(SessionError::NotFound(_))));
    }

    #[tokio::test]
    async fn mid_file_damage_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let (id, h) = store.create().unwrap();
        h.lock().await.append(turn(0, "a")).unwrap();
        h.lock().await.append(turn(1, "b")).unwrap();
        let path = dir.path().join(format!("{id}.log"));
        let mut bytes = fs::read(&path).unwrap();
        let second_line = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        bytes[second_line + 30] ^= 0x20;
        fs::write(&path, bytes).unwrap();
        let fresh = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(fresh.get(&id), Err(SessionError::Corrupt { .. })));
    }
}
