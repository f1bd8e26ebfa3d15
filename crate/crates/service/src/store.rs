//! Append-only JSON-lines persistence, one file per session.
//!
//! The first line of `<data>/sessions/<id>.jsonl` is a [`SessionHeader`];
//! every following line is one [`StoredTurn`].

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use langgame_core::dialogue::DialogueTurn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub id: String,
    pub reservoir_id: String,
    /// Pins the session to the checkpoint trained with this seed; otherwise
    /// the best-scoring checkpoint per environment answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_seed: Option<u64>,
    pub created_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTurn {
    pub index: usize,
    #[serde(flatten)]
    pub turn: DialogueTurn,
}

/// Wire form of a whole session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub reservoir_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent_seed: Option<u64>,
    pub created_at: DateTime<Utc>,
    pub turns: Vec<StoredTurn>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Seed for turn `index` of session `id`: the first eight bytes of
/// SHA-256(`id:index`), little-endian.
pub fn round_seed(session_id: &str, index: usize) -> u64 {
    let digest = Sha256::digest(format!("{session_id}:{index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

pub struct Session {
    pub header: SessionHeader,
    path: PathBuf,
    /// Held for the whole of a post so turn indices within a session never
    /// interleave.
    pub writer: tokio::sync::Mutex<()>,
    turns: RwLock<Arc<Vec<StoredTurn>>>,
}

impl Session {
    pub fn snapshot(&self) -> Arc<Vec<StoredTurn>> {
        self.turns.read().expect("turn list lock").clone()
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.header.id.clone(),
            reservoir_id: self.header.reservoir_id.clone(),
            agent_seed: self.header.agent_seed,
            created_at: self.header.created_at,
            turns: self.snapshot().as_ref().clone(),
        }
    }

    /// Writes the turn to disk, then publishes a new snapshot. Callers must
    /// hold `writer`.
    pub fn append(&self, turn: StoredTurn) -> Result<(), StoreError> {
        let line = serde_json::to_string(&turn).map_err(|e| io_err(&self.path, e))?;
        let mut f = std::fs::OpenOptions::new().append(true).open(&self.path).map_err(|e| io_err(&self.path, e))?;
        writeln!(f, "{line}").map_err(|e| io_err(&self.path, e))?;
        f.sync_data().map_err(|e| io_err(&self.path, e))?;
        let mut guard = self.turns.write().expect("turn list lock");
        let mut next = guard.as_ref().clone();
        next.push(turn);
        *guard = Arc::new(next);
        Ok(())
    }
}

pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl SessionStore {
    /// Opens `<data_dir>/sessions`, creating it if needed, and reloads every
    /// session found there.
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let dir = data_dir.join("sessions");
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let path = entry.map_err(|e| io_err(&dir, e))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                let session = load_session(&path)?;
                sessions.insert(session.header.id.clone(), Arc::new(session));
            }
        }
        Ok(SessionStore { dir, sessions: RwLock::new(sessions) })
    }

    pub fn create(&self, reservoir_id: &str, agent_seed: Option<u64>) -> Result<Arc<Session>, StoreError> {
        let header = SessionHeader {
            id: uuid::Uuid::new_v4().simple().to_string(),
            reservoir_id: reservoir_id.to_string(),
            agent_seed,
            created_at: Utc::now(),
        };
        let path = self.dir.join(format!("{}.jsonl", header.id));
        let line = serde_json::to_string(&header).map_err(|e| io_err(&path, e))?;
        let mut f = std::fs::OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| io_err(&path, e))?;
        writeln!(f, "{line}").map_err(|e| io_err(&path, e))?;
        f.sync_data().map_err(|e| io_err(&path, e))?;
        let session = Arc::new(Session { header, path, writer: tokio::sync::Mutex::new(()), turns: RwLock::new(Arc::new(Vec::new())) });
        self.sessions.write().expect("session map lock").insert(session.header.id.clone(), session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("session map lock").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn load_session(path: &Path) -> Result<Session, StoreError> {
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut header: Option<SessionHeader> = None;
    let mut turns = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| StoreError::Parse { path: path.to_path_buf(), line: i + 1, message };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?);
        } else {
            let turn: StoredTurn = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
            if turn.index != turns.len() {
                return Err(parse(format!("turn index {} out of sequence", turn.index)));
            }
            turns.push(turn);
        }
    }
    let header = header.ok_or_else(|| StoreError::Parse { path: path.to_path_buf(), line: 1, message: "missing header".into() })?;
    Ok(Session { header, path: path.to_path_buf(), writer: tokio::sync::Mutex::new(()), turns: RwLock::new(Arc::new(turns)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_seed_is_stable_and_index_sensitive() {
        assert_eq!(round_seed("abc", 0), round_seed("abc", 0));
        assert_ne!(round_seed("abc", 0), round_seed("abc", 1));
        assert_ne!(round_seed("abc", 0), round_seed("abd", 0));
        assert_eq!(round_seed("abc", 0), 8613405346203907679);
    }

    #[test]
    fn empty_session_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = store.create("mlp", None).unwrap();
        let again = SessionStore::open(dir.path()).unwrap();
        assert_eq!(again.get(&s.header.id).unwrap().view(), s.view());
    }
}
