//! On-disk layout shared by the CLI and the service:
//!
//! ```text
//! <root>/datasets/<id>.jsonl
//! <root>/benches/<id>/        bench bundles
//! <root>/reports/<id>.json    canonical report JSON
//! <root>/cache/               cached operation outputs
//! <root>/jobs.log             append-only job log
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use slicebench::cache::CacheStore;
use slicebench::report::Report;
use slicebench::testbench::TestBench;
use slicebench::{Dataset, Identifier};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

/// Ids become file names, so they are limited to a safe alphabet.
pub fn check_id(kind: &'static str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::BadRequest(format!(
            "invalid {kind} id `{id}`: use letters, digits, `-`, `_` or `.`"
        )))
    }
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["datasets", "benches", "reports", "cache"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|e| ServiceError::io(&p, e))?;
        }
        Ok(Workspace { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_path(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.jsonl"))
    }

    pub fn bench_dir(&self, id: &str) -> PathBuf {
        self.root.join("benches").join(id)
    }

    pub fn report_path(&self, id: &str) -> PathBuf {
        self.root.join("reports").join(format!("{id}.json"))
    }

    pub fn jobs_log(&self) -> PathBuf {
        self.root.join("jobs.log")
    }

    pub fn cache(&self) -> Result<Arc<CacheStore>> {
        Ok(Arc::new(CacheStore::open(self.root.join("cache"))?))
    }

    pub fn save_dataset(&self, id: &str, dataset: &Dataset) -> Result<Dataset> {
        check_id("dataset", id)?;
        let ds = dataset.with_identifier(Identifier::new(id));
        ds.save(&self.dataset_path(id))?;
        Ok(ds)
    }

    pub fn load_dataset(&self, id: &str) -> Result<Dataset> {
        check_id("dataset", id)?;
        let p = self.dataset_path(id);
        if !p.is_file() {
            return Err(ServiceError::not_found("dataset", id));
        }
        Ok(Dataset::load(&p)?)
    }

    pub fn bench_exists(&self, id: &str) -> bool {
        self.bench_dir(id).join("manifest.json").is_file()
    }

    pub fn load_bench(&self, id: &str) -> Result<TestBench> {
        check_id("testbench", id)?;
        if !self.bench_exists(id) {
            return Err(ServiceError::not_found("testbench", id));
        }
        Ok(TestBench::load(&self.bench_dir(id))?)
    }

    /// Stores a bench under the name of its identifier.
    pub fn save_bench(&self, bench: &TestBench) -> Result<()> {
        let id = bench.identifier.canonical();
        check_id("testbench", &id)?;
        bench.save(&self.bench_dir(&id))?;
        Ok(())
    }

    pub fn list_benches(&self) -> Result<Vec<TestBench>> {
        let dir = self.root.join("benches");
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| ServiceError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("manifest.json").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        ids.iter().map(|id| self.load_bench(id)).collect()
    }

    pub fn save_report(&self, id: &str, report: &Report) -> Result<Vec<u8>> {
        check_id("report", id)?;
        let bytes = report.emit_json();
        let path = self.report_path(id);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, &bytes).map_err(|e| ServiceError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))?;
        Ok(bytes)
    }

    pub fn report_bytes(&self, id: &str) -> Result<Vec<u8>> {
        check_id("report", id)?;
        let path = self.report_path(id);
        match fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServiceError::not_found("report", id)),
            Err(e) => Err(ServiceError::io(path, e)),
        }
    }

    pub fn load_report(&self, id: &str) -> Result<Report> {
        Ok(Report::from_json(&self.report_bytes(id)?)?)
    }
}
