//! Cached operations and the content-addressed store behind them.
//!
//! An entry is keyed by the SHA-256 of the canonical JSON array
//! `[op canonical identifier, [columns in call order], example fingerprint]`
//! and stores the canonical JSON bytes of the operation's output. On disk an
//! entry lives at `<root>/<k[0..2]>/<k[2..4]>/<k>` with a one-line sidecar
//! `<k>.meta` naming the operation and columns.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::canonical;
use crate::dataset::{ColumnKind, Dataset, Example, Fingerprint};
use crate::error::{Error, Result};
use crate::identifier::Identifier;

pub type ApplyFn = dyn Fn(&Example, &[&str]) -> std::result::Result<Value, String> + Send + Sync;

/// A pure per-example computation. `apply` receives the example restricted
/// to the requested columns plus the column names in call order, and must be
/// deterministic for the cache to stay valid.
#[derive(Clone)]
pub struct CachedOperation {
    identifier: Identifier,
    output_kind: ColumnKind,
    apply: Arc<ApplyFn>,
}

impl fmt::Debug for CachedOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CachedOperation")
            .field("identifier", &self.identifier.canonical())
            .field("output_kind", &self.output_kind)
            .finish()
    }
}

impl CachedOperation {
    pub fn new<F>(identifier: Identifier, output_kind: ColumnKind, apply: F) -> Self
    where
        F: Fn(&Example, &[&str]) -> std::result::Result<Value, String> + Send + Sync + 'static,
    {
        CachedOperation {
            identifier,
            output_kind,
            apply: Arc::new(apply),
        }
    }

    pub fn identifier(&self) -> &Identifier {
        &self.identifier
    }

    pub fn output_kind(&self) -> ColumnKind {
        self.output_kind
    }

    pub fn apply(&self, example: &Example, columns: &[&str]) -> std::result::Result<Value, String> {
        (self.apply)(example, columns)
    }

    /// Name of the column `run_cached_op` appends.
    pub fn column_name(&self, columns: &[&str]) -> String {
        column_name(&self.identifier, columns)
    }
}

pub fn column_name(op: &Identifier, columns: &[&str]) -> String {
    format!("{}@{}", op.canonical(), columns.join(","))
}

pub fn cache_key(op: &Identifier, columns: &[&str], example: &Fingerprint) -> String {
    let key = json!([op.canonical(), columns, example.hex()]);
    canonical::sha256_hex(&canonical::to_vec(&key))
}

enum Backend {
    Disk(PathBuf),
    Memory(Mutex<HashMap<String, Vec<u8>>>),
}

/// Write-once key/value store. Concurrent writers to the same key are
/// harmless because values for a key are identical bytes.
pub struct CacheStore {
    backend: Backend,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl CacheStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| Error::CacheWrite {
            path: root.clone(),
            source,
        })?;
        Ok(CacheStore {
            backend: Backend::Disk(root),
        })
    }

    pub fn in_memory() -> Self {
        CacheStore {
            backend: Backend::Memory(Mutex::new(HashMap::new())),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        match &self.backend {
            Backend::Disk(root) => Some(root),
            Backend::Memory(_) => None,
        }
    }

    fn entry_path(root: &Path, key: &str) -> PathBuf {
        root.join(&key[0..2]).join(&key[2..4]).join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<Vec<u8>>> {
        match &self.backend {
            Backend::Memory(map) => Ok(map.lock().expect("cache lock").get(key).cloned()),
            Backend::Disk(root) => {
                let path = Self::entry_path(root, key);
                match fs::read(&path) {
                    Ok(bytes) => Ok(Some(bytes)),
                    Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
                    Err(source) => Err(Error::CacheRead { path, source }),
                }
            }
        }
    }

    /// Stores `bytes` under `key` unless an entry already exists.
    pub fn put(&self, key: &str, bytes: &[u8], meta: &str) -> Result<()> {
        match &self.backend {
            Backend::Memory(map) => {
                map.lock()
                    .expect("cache lock")
                    .entry(key.to_string())
                    .or_insert_with(|| bytes.to_vec());
                Ok(())
            }
            Backend::Disk(root) => {
                let path = Self::entry_path(root, key);
                if path.exists() {
                    return Ok(());
                }
                let dir = path.parent().expect("entry has a parent");
                let write_err = |source| Error::CacheWrite {
                    path: path.clone(),
                    source,
                };
                fs::create_dir_all(dir).map_err(write_err)?;
                let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
                let tmp = dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
                fs::write(&tmp, bytes).map_err(write_err)?;
                fs::rename(&tmp, &path).map_err(write_err)?;
                let meta_path = dir.join(format!("{key}.meta"));
                fs::write(&meta_path, format!("{meta}\n")).map_err(|source| Error::CacheWrite {
                    path: meta_path,
                    source,
                })?;
                Ok(())
            }
        }
    }

    pub fn len(&self) -> Result<usize> {
        match &self.backend {
            Backend::Memory(map) => Ok(map.lock().expect("cache lock").len()),
            Backend::Disk(root) => Ok(walk_files(root)?
                .into_iter()
                .filter(|p| p.extension().is_none())
                .count()),
        }
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }

    /// Removes every entry.
    pub fn clear(&self) -> Result<()> {
        match &self.backend {
            Backend::Memory(map) => map.lock().expect("cache lock").clear(),
            Backend::Disk(root) => {
                for entry in fs::read_dir(root)? {
                    let path = entry?.path();
                    if path.is_dir() {
                        fs::remove_dir_all(&path)?;
                    } else {
                        fs::remove_file(&path)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn walk_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn meta_line(op: &Identifier, columns: &[&str]) -> String {
    canonical::to_string(&json!({ "op": op.canonical(), "columns": columns }))
}

fn restrict(dataset: &Dataset, row: usize, columns: &[&str]) -> Result<Example> {
    let mut values = std::collections::BTreeMap::new();
    for &c in columns {
        values.insert(c.to_string(), dataset.value(row, c)?.clone());
    }
    Ok(Example::new(values))
}

/// Computes (or fetches) `op` for every row and returns the per-row outputs
/// in row order. Rows with identical projections are computed once.
pub fn compute_cached(op: &CachedOperation, dataset: &Dataset, columns: &[&str], store: &CacheStore) -> Result<Vec<Value>> {
    dataset.check_columns(columns)?;
    let fingerprints = (0..dataset.len())
        .map(|i| dataset.row_fingerprint(i, columns))
        .collect::<Result<Vec<_>>>()?;
    let keys: Vec<String> = fingerprints
        .iter()
        .map(|fp| cache_key(op.identifier(), columns, fp))
        .collect();

    let mut resolved: HashMap<&str, Value> = HashMap::new();
    let mut missing: Vec<(usize, &str)> = Vec::new();
    for (row, key) in keys.iter().enumerate() {
        if resolved.contains_key(key.as_str()) || missing.iter().any(|(_, k)| *k == key) {
            continue;
        }
        match store.get(key)? {
            Some(bytes) => {
                resolved.insert(key, serde_json::from_slice(&bytes)?);
            }
            None => missing.push((row, key)),
        }
    }

    let computed: Vec<(&str, Value)> = missing
        .par_iter()
        .map(|&(row, key)| {
            let example = restrict(dataset, row, columns)?;
            let value = op.apply(&example, columns).map_err(|message| Error::OpFailed {
                op: op.identifier().canonical(),
                row,
                message,
            })?;
            Ok((key, value))
        })
        .collect::<Result<_>>()?;

    let meta = meta_line(op.identifier(), columns);
    for (key, value) in computed {
        store.put(key, &canonical::to_vec(&value), &meta)?;
        resolved.insert(key, value);
    }
    Ok(keys.iter().map(|k| resolved[k.as_str()].clone()).collect())
}

/// Runs `op` over `columns` and appends its outputs as a new column named
/// by [`CachedOperation::column_name`].
pub fn run_cached_op(op: &CachedOperation, dataset: &Dataset, columns: &[&str], store: &CacheStore) -> Result<Dataset> {
    let values = compute_cached(op, dataset, columns, store)?;
    dataset.append_column(&op.column_name(columns), op.output_kind(), values)
}

/// Cached outputs of `op` for every row, in row order.
pub fn retrieve(dataset: &Dataset, columns: &[&str], op: &Identifier, store: &CacheStore) -> Result<Vec<Value>> {
    retrieve_with(dataset, columns, op, store, |v| v)
}

/// Like [`retrieve`], mapping each value through `proc`.
pub fn retrieve_with<T>(
    dataset: &Dataset,
    columns: &[&str],
    op: &Identifier,
    store: &CacheStore,
    proc: impl Fn(Value) -> T,
) -> Result<Vec<T>> {
    dataset.check_columns(columns)?;
    let mut out = Vec::with_capacity(dataset.len());
    for row in 0..dataset.len() {
        let fp = dataset.row_fingerprint(row, columns)?;
        let bytes = store.get(&cache_key(op, columns, &fp))?.ok_or_else(|| Error::CacheMiss {
            op: op.canonical(),
            columns: columns.join(","),
            row,
        })?;
        out.push(proc(serde_json::from_slice(&bytes)?));
    }
    Ok(out)
}

/// Convenience for ops over a single text column.
pub(crate) fn text_arg<'a>(example: &'a Example, column: &str) -> std::result::Result<&'a str, String> {
    match example.get(column) {
        Some(Value::String(s)) => Ok(s),
        Some(Value::Null) | None => Ok(""),
        Some(other) => Err(format!("column `{column}` is not text: {other}")),
    }
}
