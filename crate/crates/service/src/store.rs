//! Directory-backed persistence.
//!
//! ```text
//! <root>/schemas/<id>.json     canonical schema documents
//! <root>/participants.json     id -> ParticipantRecord
//! <root>/sessions/<id>.json    StoredSession
//! <root>/sessions/<id>.pending next state, written before its response record
//! <root>/attempts.jsonl        AttemptRecord per prompt (append-only)
//! <root>/responses.jsonl       ResponseRecord per input (append-only)
//! ```
//!
//! Whole-file writes go through a temp file and a rename. Appends are
//! fsynced before returning.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ema_core::flow::{ResponseRecord, Session};
use ema_core::scheduler::AttemptRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

const ATTEMPTS: &str = "attempts.jsonl";
const RESPONSES: &str = "responses.jsonl";
const PARTICIPANTS: &str = "participants.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub utc_offset_minutes: i32,
}

/// A session plus the id of the schema it was started against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSession {
    pub schema_id: String,
    pub session: Session,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    append_lock: Mutex<()>,
}

/// Ids minted by the service are 32 lowercase hex digits; anything else
/// never names a file.
pub(crate) fn is_store_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn invalid(e: impl std::fmt::Display, path: &Path) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
}

impl Store {
    /// Opens a store, creating the directory layout if missing.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        fs::create_dir_all(root.join("schemas"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Store {
            root,
            append_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        let dir = path.parent().expect("store paths have a parent");
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        sync_dir(dir)
    }

    fn read_optional(path: &Path) -> io::Result<Option<Vec<u8>>> {
        match fs::read(path) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn schema_path(&self, id: &str) -> PathBuf {
        self.root.join("schemas").join(format!("{id}.json"))
    }

    pub fn write_schema(&self, id: &str, document: &[u8]) -> io::Result<()> {
        self.write_atomic(&self.schema_path(id), document)
    }

    pub fn read_schema(&self, id: &str) -> io::Result<Option<Vec<u8>>> {
        if !is_store_id(id) {
            return Ok(None);
        }
        Self::read_optional(&self.schema_path(id))
    }

    pub fn read_participants(&self) -> io::Result<BTreeMap<String, ParticipantRecord>> {
        let path = self.root.join(PARTICIPANTS);
        match Self::read_optional(&path)? {
            None => Ok(BTreeMap::new()),
            Some(bytes) => serde_json::from_slice(&bytes).map_err(|e| invalid(e, &path)),
        }
    }

    pub fn write_participants(&self, all: &BTreeMap<String, ParticipantRecord>) -> io::Result<()> {
        let bytes = serde_json::to_vec_pretty(all).expect("participants serialize");
        self.write_atomic(&self.root.join(PARTICIPANTS), &bytes)
    }

    fn session_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.{ext}"))
    }

    fn read_session_file(&self, id: &str, ext: &str) -> io::Result<Option<StoredSession>> {
        if !is_store_id(id) {
            return Ok(None);
        }
        let path = self.session_path(id, ext);
        match Self::read_optional(&path)? {
            None => Ok(None),
            Some(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| invalid(e, &path)),
        }
    }

    pub fn read_session(&self, id: &str) -> io::Result<Option<StoredSession>> {
        self.read_session_file(id, "json")
    }

    pub fn write_session(&self, stored: &StoredSession) -> io::Result<()> {
        let bytes = serde_json::to_vec(stored).expect("session serializes");
        self.write_atomic(&self.session_path(&stored.session.id, "json"), &bytes)
    }

    /// Stages the state a session will have once its newest response record
    /// is on disk.
    pub fn write_pending(&self, stored: &StoredSession) -> io::Result<()> {
        let bytes = serde_json::to_vec(stored).expect("session serializes");
        self.write_atomic(&self.session_path(&stored.session.id, "pending"), &bytes)
    }

    pub fn read_pending(&self, id: &str) -> io::Result<Option<StoredSession>> {
        self.read_session_file(id, "pending")
    }

    pub fn promote_pending(&self, id: &str) -> io::Result<()> {
        fs::rename(self.session_path(id, "pending"), self.session_path(id, "json"))?;
        sync_dir(&self.root.join("sessions"))
    }

    pub fn discard_pending(&self, id: &str) -> io::Result<()> {
        fs::remove_file(self.session_path(id, "pending"))
    }

    /// Session ids with a staged state left behind by an interrupted write.
    pub fn pending_ids(&self) -> io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".pending")) {
                if is_store_id(id) {
                    ids.push(id.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn append_line<T: Serialize>(&self, file: &str, value: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(value).expect("record serializes");
        line.push(b'\n');
        let _guard = self.append_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join(file))?;
        f.write_all(&line)?;
        f.sync_data()
    }

    /// Parses a JSON Lines file. A final line without its newline is a torn
    /// append from a crash and is skipped.
    fn read_lines<T: DeserializeOwned>(&self, file: &str) -> io::Result<Vec<T>> {
        let path = self.root.join(file);
        let Some(bytes) = Self::read_optional(&path)? else {
            return Ok(Vec::new());
        };
        let text = String::from_utf8_lossy(&bytes);
        let mut lines: Vec<&str> = text.split('\n').collect();
        if let Some(tail) = lines.pop() {
            if !tail.is_empty() {
                log::warn!("{}: ignoring torn final line", path.display());
            }
        }
        lines
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| invalid(format!("line {}: {e}", i + 1), &path)))
            .collect()
    }

    pub fn append_attempt(&self, record: &AttemptRecord) -> io::Result<()> {
        self.append_line(ATTEMPTS, record)
    }

    pub fn read_attempts(&self) -> io::Result<Vec<AttemptRecord>> {
        self.read_lines(ATTEMPTS)
    }

    pub fn append_response(&self, record: &ResponseRecord) -> io::Result<()> {
        self.append_line(RESPONSES, record)
    }

    pub fn read_responses(&self) -> io::Result<Vec<ResponseRecord>> {
        self.read_lines(RESPONSES)
    }
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    // directory fsync makes the rename itself durable; not supported everywhere
    if let Err(e) = File::open(dir).and_then(|d| d.sync_all()) {
        log::debug!("directory sync of {} failed: {e}", dir.display());
    }
    Ok(())
}
