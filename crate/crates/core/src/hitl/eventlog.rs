//! Append-only JSONL event log plus atomic state snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::state::{Event, RoundState};
use crate::error::{Error, Result};

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    pub event: Event,
}

#[derive(Debug)]
pub struct EventStore {
    dir: PathBuf,
    log: File,
    fsync: bool,
}

/// What [`EventStore::open`] found on disk.
#[derive(Debug)]
pub struct Recovered {
    pub store: EventStore,
    pub events: Vec<EventRecord>,
    pub snapshot: Option<RoundState>,
}

impl EventStore {
    /// Starts a new log in `dir`; refuses to overwrite an existing one.
    pub fn create(dir: &Path, fsync: bool) -> Result<EventStore> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOG_FILE);
        let log = OpenOptions::new()
            .append(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(EventStore { dir: dir.to_path_buf(), log, fsync })
    }

    /// Reads the log and snapshot without modifying anything. A truncated
    /// final line, left by a crash mid-append, is dropped; any other
    /// unreadable line is an error.
    pub fn read(dir: &Path) -> Result<(Vec<EventRecord>, Option<RoundState>)> {
        let scan = scan(dir)?;
        Ok((scan.events, read_snapshot(dir)?))
    }

    /// Opens an existing log for appending, cutting off a truncated tail.
    pub fn open(dir: &Path, fsync: bool) -> Result<Recovered> {
        let scan = scan(dir)?;
        let path = dir.join(LOG_FILE);
        let mut log = OpenOptions::new().write(true).open(&path).map_err(|e| Error::io(&path, e))?;
        log.set_len(scan.good_len as u64).map_err(|e| Error::io(&path, e))?;
        drop(log);
        log = OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        if scan.needs_newline {
            log.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(Recovered {
            store: EventStore { dir: dir.to_path_buf(), log, fsync },
            events: scan.events,
            snapshot: read_snapshot(dir)?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&mut self, rec: &EventRecord) -> Result<()> {
        let path = self.dir.join(LOG_FILE);
        let mut line = serde_json::to_vec(rec)?;
        line.push(b'\n');
        self.log.write_all(&line).map_err(|e| Error::io(&path, e))?;
        if self.fsync {
            self.log.sync_data().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Writes the snapshot to a temporary file and renames it into place.
    pub fn write_snapshot(&self, state: &RoundState) -> Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let dst = self.dir.join(SNAPSHOT_FILE);
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        serde_json::to_writer(&mut f, state)?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))
    }
}

struct Scan {
    events: Vec<EventRecord>,
    good_len: usize,
    needs_newline: bool,
}

fn scan(dir: &Path) -> Result<Scan> {
    let path = dir.join(LOG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut scan = Scan { events: Vec::with_capacity(lines.len()), good_len: 0, needs_newline: false };
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            scan.good_len += raw.len();
            continue;
        }
        match serde_json::from_str::<EventRecord>(line) {
            Ok(rec) => {
                if scan.events.last().is_some_and(|p: &EventRecord| p.seq >= rec.seq) {
                    return Err(Error::Invariant(format!(
                        "{}: sequence numbers not increasing at line {}",
                        path.display(),
                        i + 1
                    )));
                }
                scan.events.push(rec);
                scan.good_len += raw.len();
                scan.needs_newline = !raw.ends_with('\n');
            }
            Err(e) if i + 1 == lines.len() => {
                log::warn!("{}: dropping truncated last line: {e}", path.display());
            }
            Err(e) => {
                return Err(Error::Invariant(format!("{}: line {}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(scan)
}

fn read_snapshot(dir: &Path) -> Result<Option<RoundState>> {
    let path = dir.join(SNAPSHOT_FILE);
    match fs::read(&path) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&path, e)),
    }
}
