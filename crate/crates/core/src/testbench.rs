//! Versioned, serializable collections of slices.
//!
//! A bench saves to a directory bundle:
//!
//! ```text
//! <dir>/manifest.json        canonical JSON: identifier, version, task, slice entries
//! <dir>/meta.json            creation timestamp (not part of the manifest)
//! <dir>/slices/NNN_<name>.jsonl
//! ```
//!
//! Each slice entry records its display name, category, lineage, dataset
//! identifier, file and the SHA-256 of the file, which equals the slice
//! data's fingerprint.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::canonical;
use crate::dataset::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::identifier::Identifier;
use crate::slices::{
    fixed_suffix, wrap_eval_set, HasPhrase, Interval, KeyboardAug, Provenance, ScoreSubpopulation, Slice, SliceBuilder,
    SliceCategory, SynonymAug,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Version { major, minor, patch }
    }

    pub fn bump_major(self) -> Self {
        Version::new(self.major + 1, 0, 0)
    }

    pub fn bump_minor(self) -> Self {
        Version::new(self.major, self.minor + 1, 0)
    }

    pub fn bump_patch(self) -> Self {
        Version::new(self.major, self.minor, self.patch + 1)
    }
}

impl Default for Version {
    fn default() -> Self {
        Version::new(0, 1, 0)
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl FromStr for Version {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("invalid version `{s}`, expected M.m.p"));
        let parts: Vec<&str> = s.split('.').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        let num = |p: &str| {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            p.parse::<u64>().map_err(|_| bad())
        };
        Ok(Version::new(num(a)?, num(b)?, num(c)?))
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Classification,
    SequenceGeneration,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::SequenceGeneration => "sequence-generation",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(TaskKind::Classification),
            "sequence-generation" | "generation" => Ok(TaskKind::SequenceGeneration),
            _ => Err(Error::InvalidParameter(format!("unknown task kind `{s}`"))),
        }
    }
}

/// The task a bench evaluates: a free-form name plus the column schema that
/// predictions are keyed on and scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
    pub input_columns: Vec<String>,
    pub target_column: String,
    /// Declared label order; empty for generation tasks.
    #[serde(default)]
    pub classes: Vec<String>,
}

impl TaskSpec {
    pub fn classification(name: &str, inputs: &[&str], target: &str, classes: &[&str]) -> Self {
        TaskSpec {
            name: name.into(),
            kind: TaskKind::Classification,
            input_columns: inputs.iter().map(|s| s.to_string()).collect(),
            target_column: target.into(),
            classes: classes.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn generation(name: &str, inputs: &[&str], target: &str) -> Self {
        TaskSpec {
            name: name.into(),
            kind: TaskKind::SequenceGeneration,
            input_columns: inputs.iter().map(|s| s.to_string()).collect(),
            target_column: target.into(),
            classes: Vec::new(),
        }
    }

    pub fn input_refs(&self) -> Vec<&str> {
        self.input_columns.iter().map(String::as_str).collect()
    }

    /// Columns (with kinds) an evaluation set must provide.
    pub fn required_columns(&self) -> Vec<Column> {
        let target_kind = match self.kind {
            TaskKind::Classification => ColumnKind::Label,
            TaskKind::SequenceGeneration => ColumnKind::Text,
        };
        let mut cols: Vec<Column> = self.input_columns.iter().map(|c| Column::new(c.clone(), ColumnKind::Text)).collect();
        cols.push(Column::new(self.target_column.clone(), target_kind));
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit<'a> {
    pub score: f64,
    pub index: usize,
    pub slice: &'a Slice,
}

#[derive(Debug, Clone)]
pub struct TestBench {
    pub identifier: Identifier,
    pub version: Version,
    pub task: TaskSpec,
    pub slices: Vec<Slice>,
    pub created_at: DateTime<Utc>,
}

impl PartialEq for TestBench {
    /// Equality over the canonical manifest and slice data; `created_at` is
    /// ignored.
    fn eq(&self, other: &Self) -> bool {
        self.manifest_bytes() == other.manifest_bytes()
    }
}

fn longest_common_substring(a: &[char], b: &[char]) -> usize {
    let mut best = 0;
    let mut prev = vec![0usize; b.len() + 1];
    for &ca in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            if ca == cb {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best
}

fn file_stem_for(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(60)
        .collect();
    format!("{index:03}_{clean}")
}

fn bundle_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Bundle {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl TestBench {
    pub fn new(identifier: Identifier, task: TaskSpec) -> Self {
        TestBench {
            identifier,
            version: Version::default(),
            task,
            slices: Vec::new(),
            created_at: Utc::now(),
        }
    }

    pub fn with_created_at(mut self, at: DateTime<Utc>) -> Self {
        self.created_at = at;
        self
    }

    /// Appends slices in order; the version is left for the caller to bump.
    pub fn add_slices(&self, slices: impl IntoIterator<Item = Slice>) -> Result<TestBench> {
        let mut next = self.clone();
        for s in slices {
            if next.slices.iter().any(|e| e.display_name == s.display_name) {
                return Err(Error::DuplicateSlice(s.display_name));
            }
            next.slices.push(s);
        }
        Ok(next)
    }

    pub fn bump_major(&self) -> TestBench {
        TestBench {
            version: self.version.bump_major(),
            ..self.clone()
        }
    }

    pub fn bump_minor(&self) -> TestBench {
        TestBench {
            version: self.version.bump_minor(),
            ..self.clone()
        }
    }

    pub fn bump_patch(&self) -> TestBench {
        TestBench {
            version: self.version.bump_patch(),
            ..self.clone()
        }
    }

    pub fn slice(&self, display_name: &str) -> Option<&Slice> {
        self.slices.iter().find(|s| s.display_name == display_name)
    }

    /// Ranks slices by the longest common substring of the case-folded query
    /// and display name, divided by the query length. Ties keep bench order.
    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit<'_>>> {
        if query.is_empty() {
            return Err(Error::InvalidParameter("empty search query".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("search needs k >= 1".into()));
        }
        let q: Vec<char> = query.to_lowercase().chars().collect();
        let mut hits: Vec<SearchHit<'_>> = self
            .slices
            .iter()
            .enumerate()
            .map(|(index, slice)| {
                let name: Vec<char> = slice.display_name.to_lowercase().chars().collect();
                SearchHit {
                    score: longest_common_substring(&q, &name) as f64 / q.len() as f64,
                    index,
                    slice,
                }
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        hits.truncate(k);
        Ok(hits)
    }

    fn manifest_value(&self) -> serde_json::Value {
        let slices: Vec<serde_json::Value> = self
            .slices
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "display_name": s.display_name,
                    "category": s.category,
                    "lineage": s.lineage,
                    "dataset": s.data.identifier(),
                    "file": format!("slices/{}.jsonl", file_stem_for(i, &s.display_name)),
                    "sha256": s.data.fingerprint().hex(),
                })
            })
            .collect();
        json!({
            "identifier": self.identifier,
            "version": self.version,
            "task": self.task,
            "slices": slices,
        })
    }

    /// Canonical manifest bytes; the bench's identity for equality checks.
    pub fn manifest_bytes(&self) -> Vec<u8> {
        canonical::to_vec(&self.manifest_value())
    }

    /// Writes the bundle to `dir`, replacing an earlier bundle there. A
    /// non-empty directory that is not a bundle is refused.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if dir.exists() {
            let is_bundle = dir.join("manifest.json").is_file();
            let is_empty = fs::read_dir(dir)?.next().is_none();
            if !is_bundle && !is_empty {
                return Err(bundle_err(dir, "refusing to overwrite a directory that is not a bench bundle"));
            }
        }
        let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let staging = tempfile::Builder::new().prefix(".bench-").tempdir_in(parent)?;
        let root = staging.path();
        fs::create_dir_all(root.join("slices"))?;
        fs::write(root.join("manifest.json"), self.manifest_bytes())?;
        let meta = json!({ "created_at": self.created_at.to_rfc3339_opts(SecondsFormat::Micros, true) });
        fs::write(root.join("meta.json"), canonical::to_vec(&meta))?;
        for (i, s) in self.slices.iter().enumerate() {
            let file = root.join("slices").join(format!("{}.jsonl", file_stem_for(i, &s.display_name)));
            fs::write(file, s.data.canonical_bytes())?;
        }
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        let staged = staging.keep();
        fs::rename(&staged, dir)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<TestBench> {
        let manifest_path = dir.join("manifest.json");
        let raw = fs::read(&manifest_path).map_err(|e| bundle_err(&manifest_path, e.to_string()))?;
        let manifest: Manifest =
            serde_json::from_slice(&raw).map_err(|e| bundle_err(&manifest_path, e.to_string()))?;

        let meta_path = dir.join("meta.json");
        let created_at = match fs::read(&meta_path) {
            Ok(bytes) => {
                let meta: Meta = serde_json::from_slice(&bytes).map_err(|e| bundle_err(&meta_path, e.to_string()))?;
                meta.created_at
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => DateTime::<Utc>::UNIX_EPOCH,
            Err(e) => return Err(bundle_err(&meta_path, e.to_string())),
        };

        let mut slices = Vec::with_capacity(manifest.slices.len());
        for entry in manifest.slices {
            let path = safe_join(dir, &entry.file)?;
            let bytes = fs::read(&path).map_err(|e| bundle_err(&path, e.to_string()))?;
            let actual = canonical::sha256_hex(&bytes);
            if actual != entry.sha256 {
                return Err(Error::Integrity {
                    path,
                    expected: entry.sha256,
                    actual,
                });
            }
            let data = Dataset::from_canonical_bytes(entry.dataset, &bytes).map_err(|e| bundle_err(&path, e.to_string()))?;
            slices.push(Slice {
                data,
                category: entry.category,
                lineage: entry.lineage,
                display_name: entry.display_name,
            });
        }
        let bench = TestBench {
            identifier: manifest.identifier,
            version: manifest.version,
            task: manifest.task,
            slices,
            created_at,
        };
        if bench.manifest_bytes() != raw {
            return Err(bundle_err(&manifest_path, "manifest is not in canonical form"));
        }
        Ok(bench)
    }
}

/// The standard composition: HasNegation, LexicalOverlap deciles (when the
/// task has two inputs), Length deciles, SynonymAug, KeyboardAug, the
/// FixedSuffix attack and the source dataset wrapped as an evaluation set.
pub fn standard_slices(dataset: &Dataset, task: &TaskSpec, seed: u64) -> Result<Vec<Slice>> {
    let inputs = task.input_refs();
    let Some(&last) = inputs.last() else {
        return Err(Error::InvalidParameter("task has no input columns".into()));
    };
    let mut slices = HasPhrase::negation().build(dataset, &inputs)?.slices;
    if let [a, b, ..] = inputs.as_slice() {
        let overlap = ScoreSubpopulation::lexical_overlap(Interval::deciles())?.build(dataset, &[a, b])?;
        slices.extend(overlap.slices);
    }
    slices.extend(ScoreSubpopulation::length(Interval::deciles())?.build(dataset, &inputs)?.slices);
    slices.extend(SynonymAug::new(seed, 0.3)?.build(dataset, &inputs)?.slices);
    slices.extend(KeyboardAug::new(seed, 0.3)?.build(dataset, &inputs)?.slices);
    slices.extend(fixed_suffix("aaaabbbb")?.build(dataset, &[last])?.slices);
    slices.push(wrap_eval_set(dataset, &dataset.identifier().canonical(), &task.required_columns())?);
    Ok(slices)
}

fn safe_join(dir: &Path, rel: &str) -> Result<PathBuf> {
    let p = Path::new(rel);
    if p.is_absolute() || p.components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
        return Err(bundle_err(dir, format!("slice file `{rel}` escapes the bundle")));
    }
    Ok(dir.join(p))
}

#[derive(Deserialize)]
struct Manifest {
    identifier: Identifier,
    version: Version,
    task: TaskSpec,
    slices: Vec<ManifestSlice>,
}

#[derive(Deserialize)]
struct ManifestSlice {
    display_name: String,
    category: SliceCategory,
    lineage: Provenance,
    dataset: Identifier,
    file: String,
    sha256: String,
}

#[derive(Deserialize)]
struct Meta {
    created_at: DateTime<Utc>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slices::{HasPhrase, Interval, ScoreSubpopulation, SliceBuilder, SynonymAug};
    use proptest::prelude::*;
    use serde_json::json;

    fn dataset() -> Dataset {
        Dataset::from_rows(
            Identifier::new("reviews"),
            vec![Column::new("text", ColumnKind::Text), Column::new("label", ColumnKind::Label)],
            vec![
                vec![json!("she liked the good film"), json!("pos")],
                vec![json!("a bad movie"), json!("neg")],
                vec![json!("her dog was happy"), json!("pos")],
                vec![json!("boring and long and slow"), json!("neg")],
            ],
        )
        .unwrap()
    }

    fn bench() -> TestBench {
        let ds = dataset();
        let mut slices = HasPhrase::new(["she", "her"]).unwrap().build(&ds, &["text"]).unwrap().slices;
        slices.extend(
            ScoreSubpopulation::length(vec![Interval::pct("0%", "50%").unwrap()])
                .unwrap()
                .build(&ds, &["text"])
                .unwrap()
                .slices,
        );
        slices.extend(SynonymAug::new(3, 0.5).unwrap().build(&ds, &["text"]).unwrap().slices);
        TestBench::new(
            Identifier::new("sentiment"),
            TaskSpec::classification("sentiment", &["text"], "label", &["neg", "pos"]),
        )
        .add_slices(slices)
        .unwrap()
    }

    fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn version_rules() {
        let v: Version = "0.1.0".parse().unwrap();
        assert_eq!(v.bump_minor().to_string(), "0.2.0");
        assert_eq!("1.9.3".parse::<Version>().unwrap().bump_major().to_string(), "2.0.0");
        assert_eq!(v.bump_patch().to_string(), "0.1.1");
        for bad in ["1.2", "1.2.3.4", "a.b.c", "1..2", "-1.0.0", "+1.0.0"] {
            assert!(bad.parse::<Version>().is_err(), "{bad}");
        }
    }

    #[test]
    fn add_slices_rules() {
        let b = bench();
        assert_eq!(b.slices.len(), 3);
        assert_eq!(b.slices[0].display_name, "HasPhrase(she|her)");
        let same = b.add_slices(Vec::new()).unwrap();
        assert_eq!(same.manifest_bytes(), b.manifest_bytes());
        let dup = b.slices[1].clone();
        match b.add_slices([dup]) {
            Err(Error::DuplicateSlice(n)) => assert_eq!(n, "Length[0%,50%]"),
            other => panic!("unexpected {:?}", other.map(|b| b.slices.len())),
        }
        assert_eq!(b.add_slices([b.slices[1].clone().renamed("short")]).unwrap().version, b.version);
    }

    #[test]
    fn search_ranks_by_normalized_common_substring() {
        let ds = dataset();
        let mk = |n: &str| {
            HasPhrase::new(["x"]).unwrap().build(&ds, &["text"]).unwrap().slices.remove(0).renamed(n)
        };
        let b = TestBench::new(Identifier::new("s"), TaskSpec::generation("t", &["text"], "label"))
            .add_slices([mk("HasPhrase(she)"), mk("Length(0,10)")])
            .unwrap();
        let hits = b.search("len", 1).unwrap();
        assert_eq!(hits[0].slice.display_name, "Length(0,10)");
        assert_eq!(hits[0].score, 1.0);
        let exact = b.search("HasPhrase(she)", 5).unwrap();
        assert_eq!(exact.len(), 2);
        assert_eq!(exact[0].score, 1.0);
        assert_eq!(exact[0].index, 0);
        assert!(b.search("", 1).is_err());
        assert!(b.search("x", 0).is_err());
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        let bench = bench().bump_minor();
        bench.save(&a).unwrap();
        let loaded = TestBench::load(&a).unwrap();
        assert_eq!(loaded, bench);
        assert_eq!(loaded.created_at, DateTime::parse_from_rfc3339(&bench.created_at.to_rfc3339_opts(SecondsFormat::Micros, true)).unwrap());
        loaded.save(&b).unwrap();
        assert_eq!(read_all(&a), read_all(&b));
        assert_eq!(loaded.slices[2].lineage, bench.slices[2].lineage);
        // saving again over an existing bundle works
        loaded.save(&a).unwrap();
        assert_eq!(read_all(&a), read_all(&b));
    }

    #[test]
    fn tampering_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bench");
        bench().save(&dir).unwrap();
        let file = fs::read_dir(dir.join("slices")).unwrap().next().unwrap().unwrap().path();
        let mut bytes = fs::read(&file).unwrap();
        bytes.extend_from_slice(b"{\"label\":\"pos\",\"text\":\"x\"}\n");
        fs::write(&file, bytes).unwrap();
        match TestBench::load(&dir) {
            Err(Error::Integrity { path, .. }) => assert_eq!(path, file),
            other => panic!("unexpected {:?}", other.map(|b| b.slices.len())),
        }
        assert!(matches!(TestBench::load(&tmp.path().join("missing")), Err(Error::Bundle { .. })));
    }

    #[test]
    fn refuses_to_clobber_foreign_directories() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("notes.txt"), "keep me").unwrap();
        assert!(bench().save(tmp.path()).is_err());
        assert!(tmp.path().join("notes.txt").exists());
    }

    #[test]
    fn standard_composition() {
        let ds = Dataset::from_rows(
            Identifier::new("pairs"),
            vec![
                Column::new("premise", ColumnKind::Text),
                Column::new("hypothesis", ColumnKind::Text),
                Column::new("label", ColumnKind::Label),
            ],
            (0..30)
                .map(|i| vec![json!(format!("a good film number {i}")), json!("it is not bad"), json!("e")])
                .collect(),
        )
        .unwrap();
        let task = TaskSpec::classification("nli", &["premise", "hypothesis"], "label", &["e", "n", "c"]);
        let slices = standard_slices(&ds, &task, 1).unwrap();
        assert_eq!(slices.len(), 1 + 10 + 10 + 2 + 1 + 1);
        let bench = TestBench::new(Identifier::new("std"), task).add_slices(slices).unwrap();
        let cats: Vec<SliceCategory> = bench.slices.iter().map(|s| s.category).collect();
        for c in SliceCategory::ALL {
            assert!(cats.contains(&c));
        }
    }

    proptest! {
        #[test]
        fn bumps_strictly_increase(major in 0u64..1000, minor in 0u64..1000, patch in 0u64..1000) {
            let v = Version::new(major, minor, patch);
            prop_assert!(v.bump_major() > v);
            prop_assert!(v.bump_minor() > v);
            prop_assert!(v.bump_patch() > v);
            prop_assert_eq!(v.to_string().parse::<Version>().unwrap(), v);
        }
    }
}
