//! Append-only progress journal.
//!
//! Each line is `<json>\t<digest>\n` where `digest` is the first 16 hex digits of
//! the SHA-256 of the JSON text. A line is committed once it is fully written and
//! synced; lines that fail to parse or verify are skipped with a warning, and the
//! file is compacted on open so later appends never follow a torn line.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::fault;
use crate::error::{Error, IoContext, Result};
use crate::fsutil::{sha256_hex, write_atomic};

/// Marks every earlier entry of the same task as void.
pub const RESET: &str = "reset";
/// Final checkpoint of a task.
pub const DONE: &str = "done";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    pub task: String,
    pub checkpoint: String,
    pub payload_hash: String,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn line_digest(json: &str) -> String {
    sha256_hex(json.as_bytes())[..16].to_string()
}

fn encode_line(entry: &JournalEntry) -> String {
    let json = serde_json::to_string(entry).expect("journal entry serializes");
    format!("{json}\t{}\n", line_digest(&json))
}

fn decode_line(line: &str) -> Option<JournalEntry> {
    let (json, digest) = line.rsplit_once('\t')?;
    if line_digest(json) != digest {
        return None;
    }
    serde_json::from_str(json).ok()
}

struct State {
    file: File,
    entries: Vec<JournalEntry>,
    // (task, checkpoint) -> index into entries, cleared per task on reset
    live: HashMap<(String, String), usize>,
}

pub struct Journal {
    path: PathBuf,
    state: Mutex<State>,
}

impl Journal {
    /// Open or create a journal, discarding torn or corrupt lines.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).at(parent)?;
        }
        let raw = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(path, e)),
        };
        let (entries, dirty) = parse_lines(path, &raw);
        if dirty {
            let clean: String = entries.iter().map(encode_line).collect();
            write_atomic(path, clean.as_bytes())?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .at(path)?;
        let mut live = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            apply(&mut live, e, i);
        }
        Ok(Journal {
            path: path.to_path_buf(),
            state: Mutex::new(State {
                file,
                entries,
                live,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Durably append one entry. On error nothing is recorded in memory.
    pub fn commit(
        &self,
        task: &str,
        checkpoint: &str,
        payload_hash: &str,
        note: Option<String>,
    ) -> Result<JournalEntry> {
        let mut st = self.state.lock().expect("journal poisoned");
        let entry = JournalEntry {
            seq: st.entries.last().map_or(0, |e| e.seq + 1),
            task: task.to_string(),
            checkpoint: checkpoint.to_string(),
            payload_hash: payload_hash.to_string(),
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            note,
        };
        let line = encode_line(&entry);
        if fault::torn("journal.commit") {
            let half = &line.as_bytes()[..line.len() / 2];
            let _ = st.file.write_all(half);
            let _ = st.file.sync_data();
            fault::abort();
        }
        st.file.write_all(line.as_bytes()).at(&self.path)?;
        st.file.sync_data().at(&self.path)?;
        let idx = st.entries.len();
        st.entries.push(entry.clone());
        apply(&mut st.live, &entry, idx);
        Ok(entry)
    }

    /// Live entry for a checkpoint, ignoring anything before the task's last reset.
    pub fn lookup(&self, task: &str, checkpoint: &str) -> Option<JournalEntry> {
        let st = self.state.lock().expect("journal poisoned");
        st.live
            .get(&(task.to_string(), checkpoint.to_string()))
            .map(|&i| st.entries[i].clone())
    }

    pub fn is_done(&self, task: &str) -> bool {
        self.lookup(task, DONE).is_some()
    }

    pub fn reset(&self, task: &str) -> Result<()> {
        self.commit(task, RESET, "", None).map(|_| ())
    }

    pub fn entries(&self) -> Vec<JournalEntry> {
        self.state.lock().expect("journal poisoned").entries.clone()
    }

    pub fn scope<'a>(&'a self, task: &'a str) -> JournalScope<'a> {
        JournalScope { journal: self, task }
    }
}

fn parse_lines(path: &Path, raw: &[u8]) -> (Vec<JournalEntry>, bool) {
    let text = String::from_utf8_lossy(raw);
    let mut entries = Vec::new();
    let mut dirty = !raw.is_empty() && !raw.ends_with(b"\n");
    for (n, line) in text.split_terminator('\n').enumerate() {
        match decode_line(line) {
            Some(e) => entries.push(e),
            None => {
                log::warn!("{}: ignoring corrupt journal line {}", path.display(), n + 1);
                dirty = true;
            }
        }
    }
    (entries, dirty)
}

/// Live entries of a journal file, read without repairing or locking it.
pub fn snapshot(path: &Path) -> Result<Vec<JournalEntry>> {
    let raw = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let (entries, _) = parse_lines(path, &raw);
    let mut live = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        apply(&mut live, e, i);
    }
    let mut idx: Vec<usize> = live.into_values().collect();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| entries[i].clone()).collect())
}

fn apply(live: &mut HashMap<(String, String), usize>, e: &JournalEntry, idx: usize) {
    if e.checkpoint == RESET {
        live.retain(|(t, _), _| t != &e.task);
    } else {
        live.insert((e.task.clone(), e.checkpoint.clone()), idx);
    }
}

/// Checkpoint storage as seen by a long-running operation.
pub trait Checkpoints: Sync {
    /// The committed entry for `id`, if any.
    fn get(&self, id: &str) -> Option<JournalEntry>;
    fn commit(&self, id: &str, payload_hash: &str, note: Option<String>) -> Result<()>;
}

/// Checkpoints that remember nothing; every run starts from scratch.
pub struct NoCheckpoints;

impl Checkpoints for NoCheckpoints {
    fn get(&self, _id: &str) -> Option<JournalEntry> {
        None
    }

    fn commit(&self, _id: &str, _payload_hash: &str, _note: Option<String>) -> Result<()> {
        Ok(())
    }
}

pub struct JournalScope<'a> {
    journal: &'a Journal,
    task: &'a str,
}

impl Checkpoints for JournalScope<'_> {
    fn get(&self, id: &str) -> Option<JournalEntry> {
        self.journal.lookup(self.task, id)
    }

    fn commit(&self, id: &str, payload_hash: &str, note: Option<String>) -> Result<()> {
        fault::point("checkpoint.before_commit");
        self.journal
            .commit(self.task, id, payload_hash, note)
            .map(|_| ())
    }
}
