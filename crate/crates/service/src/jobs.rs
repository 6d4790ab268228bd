//! In-process job runner with an append-only log.
//!
//! Every state change appends the full record as one canonical JSON line
//! to `jobs.log`; reopening a workspace replays the log, and jobs that never
//! reached a terminal state are marked failed.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use slicebench::canonical;

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Evaluate,
    SliceBuild,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    /// For evaluate jobs `{"report_id": ...}`; for builds the build outcome.
    #[serde(default)]
    pub result: Option<Value>,
    #[serde(default)]
    pub error: Option<String>,
}

struct Inner {
    records: HashMap<String, JobRecord>,
    next: u64,
    log: File,
}

#[derive(Clone)]
pub struct JobStore {
    inner: Arc<Mutex<Inner>>,
    bench_locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl JobStore {
    pub fn open(log_path: PathBuf) -> Result<Self> {
        let mut records: HashMap<String, JobRecord> = HashMap::new();
        let mut next = 1;
        if log_path.exists() {
            let f = File::open(&log_path).map_err(|e| ServiceError::io(&log_path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| ServiceError::io(&log_path, e))?;
                // a torn final line from a crash is skipped
                let Ok(rec) = serde_json::from_str::<JobRecord>(&line) else { continue };
                if let Some(n) = rec.job_id.strip_prefix("job-").and_then(|n| n.parse::<u64>().ok()) {
                    next = next.max(n + 1);
                }
                records.insert(rec.job_id.clone(), rec);
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| ServiceError::io(&log_path, e))?;
        let mut inner = Inner { records, next, log };
        let stale: Vec<JobRecord> = inner.records.values().filter(|r| !r.status.is_terminal()).cloned().collect();
        for mut rec in stale {
            rec.status = JobStatus::Failed;
            rec.error = Some("interrupted by service restart".into());
            append(&mut inner, rec)?;
        }
        Ok(JobStore {
            inner: Arc::new(Mutex::new(inner)),
            bench_locks: Arc::default(),
        })
    }

    pub fn create(&self, kind: JobKind) -> Result<JobRecord> {
        let mut inner = self.inner.lock().expect("job store lock");
        let rec = JobRecord {
            job_id: format!("job-{:06}", inner.next),
            kind,
            status: JobStatus::Queued,
            result: None,
            error: None,
        };
        inner.next += 1;
        append(&mut inner, rec.clone())?;
        Ok(rec)
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.inner.lock().expect("job store lock").records.get(id).cloned()
    }

    /// Moves a job to `status`; terminal records never change again.
    pub fn transition(&self, id: &str, status: JobStatus, result: Option<Value>, error: Option<String>) -> Result<JobRecord> {
        let mut inner = self.inner.lock().expect("job store lock");
        let mut rec = inner.records.get(id).cloned().ok_or_else(|| ServiceError::not_found("job", id))?;
        if rec.status.is_terminal() {
            return Err(ServiceError::BadRequest(format!("job `{id}` is already {:?}", rec.status).to_lowercase()));
        }
        rec.status = status;
        rec.result = result;
        rec.error = error;
        append(&mut inner, rec.clone())?;
        Ok(rec)
    }

    /// Lock serializing work on one bench.
    pub fn bench_lock(&self, bench: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.bench_locks
            .lock()
            .expect("bench lock map")
            .entry(bench.to_string())
            .or_default()
            .clone()
    }
}

fn append(inner: &mut Inner, rec: JobRecord) -> Result<()> {
    let mut line = canonical::to_vec_from(&rec).map_err(slicebench::Error::from)?;
    line.push(b'\n');
    inner
        .log
        .write_all(&line)
        .and_then(|_| inner.log.flush())
        .map_err(|e| ServiceError::io("jobs.log", e))?;
    inner.records.insert(rec.job_id.clone(), rec);
    Ok(())
}
