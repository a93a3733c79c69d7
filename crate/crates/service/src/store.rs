//! Append-only submission log with content-addressed bodies.
//!
//! Layout of the data directory:
//! - `submissions.jsonl`: one [`LoggedSubmission`] per line, in arrival order
//! - `bodies/<sha256>.json`: submission bodies exactly as received

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ServiceError};
use crate::platform::SubmissionRecord;

pub const LOG_FILE: &str = "submissions.jsonl";
pub const BODY_DIR: &str = "bodies";

/// A log line. Scores recorded without a body (injected directly) have no hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedSubmission {
    #[serde(flatten)]
    pub record: SubmissionRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_sha256: Option<String>,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    log: File,
}

pub fn body_hash(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

impl Store {
    /// Opens (creating if needed) a data directory and returns the store with
    /// every record already logged. A torn final line, left by a crash
    /// mid-append, is dropped and truncated away.
    pub fn open(dir: &Path) -> Result<(Self, Vec<LoggedSubmission>)> {
        fs::create_dir_all(dir.join(BODY_DIR)).map_err(|e| ServiceError::io(dir, e))?;
        let path = dir.join(LOG_FILE);
        let mut records = Vec::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let file = File::open(&path).map_err(|e| ServiceError::io(&path, e))?;
            let mut reader = BufReader::new(file);
            let mut line = String::new();
            let mut number = 0;
            loop {
                line.clear();
                let n = reader
                    .read_line(&mut line)
                    .map_err(|e| ServiceError::io(&path, e))?;
                if n == 0 {
                    break;
                }
                number += 1;
                if !line.ends_with('\n') {
                    tracing::warn!(line = number, "dropping torn final log line");
                    break;
                }
                let r: LoggedSubmission = serde_json::from_str(line.trim_end()).map_err(|e| {
                    ServiceError::CorruptLog {
                        path: path.clone(),
                        line: number,
                        message: e.to_string(),
                    }
                })?;
                if records.last().is_some_and(|p: &LoggedSubmission| {
                    r.record.submission_id <= p.record.submission_id
                }) {
                    return Err(ServiceError::CorruptLog {
                        path,
                        line: number,
                        message: "submission ids not increasing".into(),
                    });
                }
                records.push(r);
                valid_len += n as u64;
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServiceError::io(&path, e))?;
        log.set_len(valid_len)
            .map_err(|e| ServiceError::io(&path, e))?;
        Ok((
            Self {
                dir: dir.to_path_buf(),
                log,
            },
            records,
        ))
    }

    /// Writes a body under its hash. Existing bodies are left alone.
    pub fn put_body(&self, body: &[u8]) -> Result<String> {
        let hash = body_hash(body);
        let path = self.dir.join(BODY_DIR).join(format!("{hash}.json"));
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            let write = || -> std::io::Result<()> {
                let mut f = File::create(&tmp)?;
                f.write_all(body)?;
                f.sync_all()?;
                fs::rename(&tmp, &path)
            };
            write().map_err(|e| ServiceError::io(&path, e))?;
        }
        Ok(hash)
    }

    pub fn body_path(&self, hash: &str) -> PathBuf {
        self.dir.join(BODY_DIR).join(format!("{hash}.json"))
    }

    /// Appends one record and flushes it to disk.
    pub fn append(&mut self, entry: &LoggedSubmission) -> Result<()> {
        let path = self.dir.join(LOG_FILE);
        let mut line = serde_json::to_string(entry).expect("records serialize");
        line.push('\n');
        self.log
            .write_all(line.as_bytes())
            .and_then(|_| self.log.sync_data())
            .map_err(|e| ServiceError::io(&path, e))
    }
}
