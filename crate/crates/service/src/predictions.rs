//! Prediction files and the set of inputs a bench needs predictions for.
//!
//! A predictions file holds one JSON object per line, either
//! `{"fingerprint": "<hex>", "output": ...}` or
//! `{"input": {<input columns>}, "output": ...}`; for the latter the
//! fingerprint is computed over the task's input columns.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{Map, Value};
use slicebench::dataset::fingerprint_example;
use slicebench::report::PredictionSet;
use slicebench::testbench::{TaskSpec, TestBench};
use slicebench::{Error, Example, Fingerprint};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    fingerprint: Option<String>,
    input: Option<Map<String, Value>>,
    output: Value,
}

fn parse_line(line: &str, task: &TaskSpec) -> Result<(Fingerprint, Value), String> {
    let parsed: Line = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let fp = match (parsed.fingerprint, parsed.input) {
        (Some(hex), None) => Fingerprint::from_hex(&hex).map_err(|e| e.to_string())?,
        (None, Some(input)) => {
            let example = Example::new(input.into_iter().collect());
            fingerprint_example(&example, &task.input_refs()).map_err(|e| e.to_string())?
        }
        _ => return Err("expected exactly one of `fingerprint` or `input`".into()),
    };
    Ok((fp, parsed.output))
}

/// Parses prediction lines; `path` only labels errors.
pub fn parse_predictions(text: &str, path: &Path, model_id: &str, task: &TaskSpec) -> Result<PredictionSet, Error> {
    let mut set = PredictionSet::new(model_id, task.kind);
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (fp, output) = parse_line(line, task).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        set.insert(&fp, output)?;
    }
    Ok(set)
}

pub fn load_predictions_jsonl(path: &Path, model_id: &str, task: &TaskSpec) -> Result<PredictionSet, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_predictions(&text, path, model_id, task)
}

/// Predictions given as JSON values (the same objects a file line holds);
/// errors name the 1-based position.
pub fn predictions_from_values(values: &[Value], model_id: &str, task: &TaskSpec) -> Result<PredictionSet, Error> {
    let mut set = PredictionSet::new(model_id, task.kind);
    for (i, v) in values.iter().enumerate() {
        let (fp, output) = parse_line(&v.to_string(), task).map_err(|message| Error::Parse {
            path: PathBuf::from("<inline>"),
            line: i + 1,
            message,
        })?;
        set.insert(&fp, output)?;
    }
    Ok(set)
}

/// An example's input fingerprint and its input-column values.
pub type InputRow = (Fingerprint, Map<String, Value>);

/// Distinct input projections across every slice of the bench, in bench
/// order of first appearance.
pub fn bench_inputs(bench: &TestBench) -> Result<Vec<InputRow>, Error> {
    let inputs = bench.task.input_refs();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for slice in &bench.slices {
        let data = &slice.data;
        data.check_columns(&inputs)?;
        for row in 0..data.len() {
            let fp = data.row_fingerprint(row, &inputs)?;
            if seen.insert(fp) {
                let mut obj = Map::new();
                for c in &inputs {
                    obj.insert(c.to_string(), data.value(row, c)?.clone());
                }
                out.push((fp, obj));
            }
        }
    }
    Ok(out)
}
