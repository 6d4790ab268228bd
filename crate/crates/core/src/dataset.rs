//! Immutable columnar datasets with content fingerprints.
//!
//! A dataset's canonical serialization is JSON Lines: a header line
//! `{"columns":[{"kind":..,"name":..},..]}` followed by one canonical JSON
//! object per row (every declared column present, nulls explicit). The
//! fingerprint is the SHA-256 of exactly those bytes; the identifier is
//! metadata and does not participate.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::canonical;
use crate::error::{Error, Result};
use crate::identifier::Identifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Text,
    Label,
    Scalar,
    SequenceOfText,
    OpaqueJson,
}

impl ColumnKind {
    pub fn accepts(self, value: &Value) -> bool {
        match (self, value) {
            (_, Value::Null) | (ColumnKind::OpaqueJson, _) => true,
            (ColumnKind::Text, Value::String(_)) => true,
            (ColumnKind::Label, Value::String(_) | Value::Number(_) | Value::Bool(_)) => true,
            (ColumnKind::Scalar, Value::Number(_) | Value::Bool(_)) => true,
            (ColumnKind::SequenceOfText, Value::Array(items)) => items.iter().all(Value::is_string),
            _ => false,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Text => "text",
            ColumnKind::Label => "label",
            ColumnKind::Scalar => "scalar",
            ColumnKind::SequenceOfText => "sequence-of-text",
            ColumnKind::OpaqueJson => "opaque-json",
        }
    }

    fn infer<'a>(values: impl Iterator<Item = &'a Value>) -> ColumnKind {
        let mut seen: Option<ColumnKind> = None;
        for v in values.filter(|v| !v.is_null()) {
            let kind = match v {
                Value::String(_) => ColumnKind::Text,
                Value::Number(_) | Value::Bool(_) => ColumnKind::Scalar,
                Value::Array(items) if items.iter().all(Value::is_string) => ColumnKind::SequenceOfText,
                _ => return ColumnKind::OpaqueJson,
            };
            match seen {
                None => seen = Some(kind),
                Some(k) if k == kind => {}
                Some(_) => return ColumnKind::OpaqueJson,
            }
        }
        seen.unwrap_or(ColumnKind::OpaqueJson)
    }
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "text" => ColumnKind::Text,
            "label" => ColumnKind::Label,
            "scalar" => ColumnKind::Scalar,
            "sequence-of-text" => ColumnKind::SequenceOfText,
            "opaque-json" => ColumnKind::OpaqueJson,
            other => return Err(Error::InvalidParameter(format!("unknown column kind `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Column {
            name: name.into(),
            kind,
        }
    }
}

/// SHA-256 content digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint([u8; 32]);

impl Fingerprint {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Fingerprint(Sha256::digest(bytes).into())
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)
            .map_err(|e| Error::InvalidParameter(format!("bad fingerprint `{s}`: {e}")))?;
        Ok(Fingerprint(out))
    }

    /// The low 64 bits of the digest read as a big-endian 256-bit integer.
    pub fn low_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[24..].try_into().expect("8 bytes"))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.hex())
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.hex())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Fingerprint::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// One row, materialized as column name → value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Example(BTreeMap<String, Value>);

impl Example {
    pub fn new(values: BTreeMap<String, Value>) -> Self {
        Example(values)
    }

    pub fn get(&self, column: &str) -> Option<&Value> {
        self.0.get(column)
    }

    pub fn text(&self, column: &str) -> Option<&str> {
        self.0.get(column).and_then(Value::as_str)
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.0
    }

    pub fn into_values(self) -> BTreeMap<String, Value> {
        self.0
    }

    /// Fingerprint of the `columns` projection of this example.
    pub fn fingerprint(&self, columns: &[&str]) -> Result<Fingerprint> {
        fingerprint_example(self, columns)
    }
}

impl From<BTreeMap<String, Value>> for Example {
    fn from(values: BTreeMap<String, Value>) -> Self {
        Example(values)
    }
}

/// SHA-256 over the canonical JSON object of the selected `(name, value)`
/// pairs. Column order in `columns` does not matter.
pub fn fingerprint_example(example: &Example, columns: &[&str]) -> Result<Fingerprint> {
    let mut projection = Map::new();
    for &col in columns {
        let v = example
            .get(col)
            .ok_or_else(|| Error::UnknownColumn(col.to_string()))?;
        projection.insert(col.to_string(), v.clone());
    }
    Ok(Fingerprint::of_bytes(&canonical::to_vec(&Value::Object(projection))))
}

#[derive(Clone)]
pub struct Dataset {
    identifier: Identifier,
    columns: Vec<Column>,
    data: Vec<Arc<Vec<Value>>>,
    len: usize,
    fingerprint: Fingerprint,
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("identifier", &self.identifier.canonical())
            .field("columns", &self.columns)
            .field("len", &self.len)
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint
    }
}

impl Dataset {
    /// Builds a dataset from row-major values; each row must have one value
    /// per column, in column order.
    pub fn from_rows(identifier: Identifier, columns: Vec<Column>, rows: Vec<Vec<Value>>) -> Result<Self> {
        let mut data: Vec<Vec<Value>> = columns.iter().map(|_| Vec::with_capacity(rows.len())).collect();
        for row in rows {
            if row.len() != columns.len() {
                return Err(Error::LengthMismatch {
                    expected: columns.len(),
                    actual: row.len(),
                });
            }
            for (slot, v) in data.iter_mut().zip(row) {
                slot.push(v);
            }
        }
        Self::from_columns(identifier, columns, data)
    }

    pub fn from_columns(identifier: Identifier, columns: Vec<Column>, data: Vec<Vec<Value>>) -> Result<Self> {
        Self::from_shared(identifier, columns, data.into_iter().map(Arc::new).collect())
    }

    fn from_shared(identifier: Identifier, columns: Vec<Column>, data: Vec<Arc<Vec<Value>>>) -> Result<Self> {
        if data.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: columns.len(),
                actual: data.len(),
            });
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|p| p.name == c.name) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        let len = data.first().map_or(0, |d| d.len());
        for (col, values) in columns.iter().zip(&data) {
            if values.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    actual: values.len(),
                });
            }
            if let Some(bad) = values.iter().position(|v| !col.kind.accepts(v)) {
                return Err(Error::InvalidParameter(format!(
                    "row {bad}: value does not match kind {} of column `{}`",
                    col.kind.as_str(),
                    col.name
                )));
            }
        }
        let mut ds = Dataset {
            identifier,
            columns,
            data,
            len,
            fingerprint: Fingerprint([0; 32]),
        };
        ds.fingerprint = Fingerprint::of_bytes(&ds.canonical_bytes());
        Ok(ds)
    }

    pub fn identifier(&self) -> &Identifier {
        &self.identifier
    }

    /// Same content under a different identifier; the fingerprint is unchanged.
    pub fn with_identifier(&self, identifier: Identifier) -> Self {
        Dataset {
            identifier,
            ..self.clone()
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_values(&self, name: &str) -> Result<&[Value]> {
        Ok(&self.data[self.column_index(name)?])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn value(&self, row: usize, column: &str) -> Result<&Value> {
        let c = self.column_index(column)?;
        self.data[c]
            .get(row)
            .ok_or_else(|| Error::InvalidSelection(format!("row {row} out of bounds")))
    }

    pub fn row(&self, index: usize) -> Example {
        Example(
            self.columns
                .iter()
                .zip(&self.data)
                .map(|(c, d)| (c.name.clone(), d[index].clone()))
                .collect(),
        )
    }

    pub fn rows(&self) -> impl Iterator<Item = Example> + '_ {
        (0..self.len).map(move |i| self.row(i))
    }

    /// Fingerprint of row `index` restricted to `columns`.
    pub fn row_fingerprint(&self, index: usize, columns: &[&str]) -> Result<Fingerprint> {
        let mut projection = Map::new();
        for &col in columns {
            let c = self.column_index(col)?;
            projection.insert(col.to_string(), self.data[c][index].clone());
        }
        Ok(Fingerprint::of_bytes(&canonical::to_vec(&Value::Object(projection))))
    }

    pub fn check_columns(&self, columns: &[&str]) -> Result<()> {
        for c in columns {
            self.column_index(c)?;
        }
        Ok(())
    }

    /// Rows at `indices`, which must be strictly increasing and in bounds.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSelection(format!(
                "indices not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= self.len {
                return Err(Error::InvalidSelection(format!(
                    "index {last} out of bounds for {} rows",
                    self.len
                )));
            }
        }
        let data = self
            .data
            .iter()
            .map(|d| indices.iter().map(|&i| d[i].clone()).collect())
            .collect();
        Dataset::from_columns(self.identifier.clone(), self.columns.clone(), data)
    }

    pub fn append_column(&self, name: &str, kind: ColumnKind, values: Vec<Value>) -> Result<Dataset> {
        if self.column(name).is_some() {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
        if values.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: values.len(),
            });
        }
        let mut columns = self.columns.clone();
        columns.push(Column::new(name, kind));
        let mut data = self.data.clone();
        data.push(Arc::new(values));
        Dataset::from_shared(self.identifier.clone(), columns, data)
    }

    /// Replaces the values of an existing column, keeping its kind.
    pub fn replace_column(&self, name: &str, values: Vec<Value>) -> Result<Dataset> {
        let c = self.column_index(name)?;
        if values.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: values.len(),
            });
        }
        let mut data = self.data.clone();
        data[c] = Arc::new(values);
        Dataset::from_shared(self.identifier.clone(), self.columns.clone(), data)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let header = serde_json::json!({ "columns": self.columns });
        canonical::write_value(&header, &mut out);
        out.push(b'\n');
        for i in 0..self.len {
            let row: Map<String, Value> = self
                .columns
                .iter()
                .zip(&self.data)
                .map(|(c, d)| (c.name.clone(), d[i].clone()))
                .collect();
            canonical::write_value(&Value::Object(row), &mut out);
            out.push(b'\n');
        }
        out
    }

    /// Inverse of [`Dataset::canonical_bytes`].
    pub fn from_canonical_bytes(identifier: Identifier, bytes: &[u8]) -> Result<Dataset> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::InvalidParameter(format!("dataset bytes are not UTF-8: {e}")))?;
        let mut lines = text.lines();
        #[derive(Deserialize)]
        struct Header {
            columns: Vec<Column>,
        }
        let header: Header = serde_json::from_str(lines.next().unwrap_or_default())?;
        let mut rows = Vec::new();
        for line in lines {
            let mut obj: Map<String, Value> = serde_json::from_str(line)?;
            let row = header
                .columns
                .iter()
                .map(|c| obj.remove(&c.name).ok_or_else(|| Error::UnknownColumn(c.name.clone())))
                .collect::<Result<Vec<_>>>()?;
            if let Some(extra) = obj.keys().next() {
                return Err(Error::UnknownColumn(extra.clone()));
            }
            rows.push(row);
        }
        Dataset::from_rows(identifier, header.columns, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.canonical_bytes())?;
        Ok(())
    }

    /// Loads a dataset written by [`Dataset::save`], naming it after the file stem.
    pub fn load(path: &Path) -> Result<Dataset> {
        let bytes = fs::read(path)?;
        Dataset::from_canonical_bytes(stem_identifier(path), &bytes)
    }
}

fn stem_identifier(path: &Path) -> Identifier {
    Identifier::new(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
    )
}

/// Reads one flat JSON object per line. Columns are the union of keys in
/// first-seen order (keys within a line in sorted order); missing keys become
/// explicit nulls. `kinds` overrides inference per column.
pub fn ingest_jsonl(path: &Path, kinds: Option<&BTreeMap<String, ColumnKind>>) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    let mut names: Vec<String> = Vec::new();
    let mut objects: Vec<Map<String, Value>> = Vec::new();
    let mut line_numbers = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let obj: Map<String, Value> = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        for k in obj.keys() {
            if !names.contains(k) {
                names.push(k.clone());
            }
        }
        objects.push(obj);
        line_numbers.push(i + 1);
    }
    if objects.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(kinds) = kinds {
        if let Some(unknown) = kinds.keys().find(|k| !names.contains(k)) {
            return Err(Error::UnknownColumn(unknown.clone()));
        }
    }

    let mut data: Vec<Vec<Value>> = names.iter().map(|_| Vec::with_capacity(objects.len())).collect();
    for obj in &mut objects {
        for (name, slot) in names.iter().zip(data.iter_mut()) {
            slot.push(obj.remove(name).unwrap_or(Value::Null));
        }
    }
    let mut columns = Vec::with_capacity(names.len());
    for (name, values) in names.iter().zip(&data) {
        let kind = match kinds.and_then(|k| k.get(name)) {
            Some(&kind) => {
                if let Some(row) = values.iter().position(|v| !kind.accepts(v)) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_numbers[row],
                        message: format!("column `{name}` is not of kind {}", kind.as_str()),
                    });
                }
                kind
            }
            None => ColumnKind::infer(values.iter()),
        };
        columns.push(Column::new(name.clone(), kind));
    }
    Dataset::from_columns(stem_identifier(path), columns, data)
}

/// CSV with a header row; every column is text.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows.push(record.iter().map(|f| Value::String(f.to_string())).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let columns = headers.into_iter().map(|h| Column::new(h, ColumnKind::Text)).collect();
    Dataset::from_rows(stem_identifier(path), columns, rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
