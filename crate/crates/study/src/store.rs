//! Append-only jsonl event log, one file per study.
//!
//! Each line is `{"seq", "kind", "at", "payload"}`. Sequence numbers start
//! at 1 and are gap-free. Every append is written with a single
//! `write_all` and synced before it is acknowledged.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    StudyCreated,
    Registered,
    Annotation,
    Questionnaire,
    DeletionTombstone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub kind: EventKind,
    /// rfc3339 UTC write time.
    pub at: String,
    pub payload: serde_json::Value,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("corrupt record at sequence {seq} (line {line}): {reason}")]
    CorruptRecord { seq: u64, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Parsed log contents. `torn_tail` is set when the final line could not
/// be parsed; `records` then holds everything before it.
#[derive(Debug)]
pub struct Scan {
    pub records: Vec<EventRecord>,
    pub torn_tail: Option<StoreError>,
    /// Byte length of the valid prefix.
    valid_len: u64,
}

/// Parses a log. A bad record followed by further lines is an error; a bad
/// final line is reported as a torn tail.
pub fn scan(text: &str) -> Result<Scan, StoreError> {
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut valid_len = 0u64;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        offset += raw.len() as u64;
        let line = raw.trim();
        if line.is_empty() {
            valid_len = offset;
            continue;
        }
        let expected = records.len() as u64 + 1;
        let parsed = serde_json::from_str::<EventRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| {
                if r.seq == expected {
                    Ok(r)
                } else {
                    Err(format!("sequence {} where {expected} was expected", r.seq))
                }
            })
            .and_then(|r| if raw.ends_with('\n') { Ok(r) } else { Err("unterminated record".into()) });
        match parsed {
            Ok(r) => {
                records.push(r);
                valid_len = offset;
            }
            Err(reason) => {
                let err = StoreError::CorruptRecord { seq: expected, line: i + 1, reason };
                let rest_empty = lines[i + 1..].iter().all(|l| l.trim().is_empty());
                if rest_empty {
                    return Ok(Scan { records, torn_tail: Some(err), valid_len });
                }
                return Err(err);
            }
        }
    }
    Ok(Scan { records, torn_tail: None, valid_len })
}

/// Reads a log strictly: a torn final record is an error.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>, StoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let scan = scan(&text)?;
    match scan.torn_tail {
        Some(e) => Err(e),
        None => Ok(scan.records),
    }
}

/// Writer side of a log. A log without a path keeps nothing, which is
/// useful for ephemeral studies.
#[derive(Debug)]
pub struct EventLog {
    path: Option<PathBuf>,
    file: Option<File>,
    closed: bool,
    next_seq: u64,
}

impl EventLog {
    /// Creates a new, empty log file. Fails if the file exists.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let file = OpenOptions::new().create_new(true).append(true).open(path).map_err(io_err(path))?;
        Ok(EventLog { path: Some(path.to_path_buf()), file: Some(file), closed: false, next_seq: 1 })
    }

    /// Opens an existing log for appending, returning its records. A torn
    /// final record is cut off and returned alongside.
    pub fn recover(path: impl AsRef<Path>) -> Result<(Self, Vec<EventRecord>, Option<StoreError>), StoreError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let scan = scan(&text)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        if scan.torn_tail.is_some() {
            file.set_len(scan.valid_len).map_err(io_err(path))?;
            file.sync_all().map_err(io_err(path))?;
        }
        let next_seq = scan.records.len() as u64 + 1;
        let log = EventLog { path: Some(path.to_path_buf()), file: Some(file), closed: false, next_seq };
        Ok((log, scan.records, scan.torn_tail))
    }

    pub fn ephemeral() -> Self {
        EventLog { path: None, file: None, closed: false, next_seq: 1 }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Appends and syncs one event.
    pub fn append(&mut self, kind: EventKind, payload: serde_json::Value) -> Result<EventRecord, StoreError> {
        let path = self.path.clone().unwrap_or_else(|| PathBuf::from("<memory>"));
        if self.closed {
            return Err(StoreError::Io {
                path: path.display().to_string(),
                source: io::Error::new(io::ErrorKind::BrokenPipe, "log is closed"),
            });
        }
        let record = EventRecord { seq: self.next_seq, kind, at: now_rfc3339(), payload };
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_vec(&record).expect("event record serializes");
            line.push(b'\n');
            file.write_all(&line).map_err(io_err(&path))?;
            file.sync_data().map_err(io_err(&path))?;
        }
        self.next_seq += 1;
        Ok(record)
    }

    pub fn close(&mut self) {
        self.file = None;
        self.closed = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn appends_are_sequential_and_replayable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut log = EventLog::create(&path).unwrap();
        let a = log.append(EventKind::Registered, json!({"sid": "a"})).unwrap();
        let b = log.append(EventKind::Annotation, json!({"sid": "a"})).unwrap();
        assert_eq!((a.seq, b.seq), (1, 2));
        let back = read_log(&path).unwrap();
        assert_eq!(back, vec![a, b]);
        assert!(chrono::DateTime::parse_from_rfc3339(&back[0].at).is_ok());
    }

    #[test]
    fn append_after_close_fails() {
        let mut log = EventLog::ephemeral();
        log.append(EventKind::Registered, json!({})).unwrap();
        log.close();
        assert!(matches!(log.append(EventKind::Registered, json!({})), Err(StoreError::Io { .. })));
    }

    #[test]
    fn empty_log_scans_empty() {
        let s = scan("").unwrap();
        assert!(s.records.is_empty() && s.torn_tail.is_none());
    }

    #[test]
    fn torn_tail_is_reported_and_cut() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut log = EventLog::create(&path).unwrap();
        let a = log.append(EventKind::Registered, json!({"sid": "a"})).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"seq":2,"kind":"annot"#).unwrap();
        drop(f);

        assert!(matches!(read_log(&path), Err(StoreError::CorruptRecord { seq: 2, line: 2, .. })));
        let (mut log, records, torn) = EventLog::recover(&path).unwrap();
        assert_eq!(records, vec![a]);
        assert!(matches!(torn, Some(StoreError::CorruptRecord { seq: 2, .. })));
        assert_eq!(log.append(EventKind::Annotation, json!({})).unwrap().seq, 2);
        assert_eq!(read_log(&path).unwrap().len(), 2);
    }

    #[test]
    fn corruption_before_the_tail_is_fatal() {
        let good = |seq: u64| {
            serde_json::to_string(&EventRecord { seq, kind: EventKind::Registered, at: now_rfc3339(), payload: json!({}) })
                .unwrap()
        };
        let text = format!("{}\nnot json\n{}\n", good(1), good(2));
        assert!(matches!(scan(&text), Err(StoreError::CorruptRecord { seq: 2, line: 2, .. })));
        let gap = format!("{}\n{}\n", good(1), good(3));
        assert!(matches!(scan(&gap).unwrap().torn_tail, Some(StoreError::CorruptRecord { seq: 2, .. })));
    }
}
