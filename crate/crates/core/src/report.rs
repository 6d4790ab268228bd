//! Robustness reports: per-slice metrics for one model on one bench.
//!
//! Predictions are joined to slice rows by the fingerprint of the task's
//! input columns, so subpopulations, duplicates and transformed copies all
//! find their outputs without relying on row positions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;
use crate::dataset::Fingerprint;
use crate::error::{Error, Result};
use crate::slices::{Slice, SliceCategory};
use crate::summ::{rouge, RougeVariant};
use crate::testbench::{TaskKind, TestBench, Version};
use crate::text;

/// Model outputs keyed by input fingerprint (hex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model_id: String,
    pub task_kind: TaskKind,
    pub outputs: BTreeMap<String, Value>,
}

impl PredictionSet {
    pub fn new(model_id: impl Into<String>, task_kind: TaskKind) -> Self {
        PredictionSet {
            model_id: model_id.into(),
            task_kind,
            outputs: BTreeMap::new(),
        }
    }

    /// Adds one output; re-adding an identical output is a no-op and a
    /// different one is an error.
    pub fn insert(&mut self, fingerprint: &Fingerprint, output: Value) -> Result<()> {
        let key = fingerprint.hex();
        match self.outputs.get(&key) {
            Some(existing) if *existing != output => Err(Error::ConflictingPrediction(key)),
            Some(_) => Ok(()),
            None => {
                self.outputs.insert(key, output);
                Ok(())
            }
        }
    }

    pub fn get(&self, fingerprint: &Fingerprint) -> Option<&Value> {
        self.outputs.get(&fingerprint.hex())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { expected: a, actual: b });
    }
    if a == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

pub fn accuracy<T: PartialEq>(gold: &[T], pred: &[T]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(correct as f64 / gold.len() as f64)
}

fn class_index<S: AsRef<str>>(classes: &[S], label: &str) -> Result<usize> {
    classes
        .iter()
        .position(|c| c.as_ref() == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Unweighted mean of per-class F1; a zero denominator in a class's
/// precision or recall makes that term 0.
pub fn macro_f1<S: AsRef<str>>(gold: &[S], pred: &[S], classes: &[S]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    if classes.is_empty() {
        return Err(Error::InvalidParameter("macro-F1 needs at least one class".into()));
    }
    let k = classes.len();
    let (mut tp, mut gold_n, mut pred_n) = (vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    for (g, p) in gold.iter().zip(pred) {
        let gi = class_index(classes, g.as_ref())?;
        let pi = class_index(classes, p.as_ref())?;
        gold_n[gi] += 1;
        pred_n[pi] += 1;
        if gi == pi {
            tp[gi] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..k {
        let p = if pred_n[c] == 0 { 0.0 } else { tp[c] as f64 / pred_n[c] as f64 };
        let r = if gold_n[c] == 0 { 0.0 } else { tp[c] as f64 / gold_n[c] as f64 };
        if p + r > 0.0 {
            total += 2.0 * p * r / (p + r);
        }
    }
    Ok(total / k as f64)
}

/// Relative frequency of each class, in declared order.
pub fn class_distribution<S: AsRef<str>>(labels: &[S], classes: &[S]) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0usize; classes.len()];
    for l in labels {
        counts[class_index(classes, l.as_ref())?] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / labels.len() as f64).collect())
}

/// Mean ROUGE-1 F1 of each prediction against its reference.
pub fn rouge1_f1_metric<S: AsRef<str>>(gold: &[S], pred: &[S]) -> Result<f64> {
    check_lengths(gold.len(), pred.len())?;
    let sum: f64 = gold
        .iter()
        .zip(pred)
        .map(|(g, p)| {
            let g = text::tokenize_folded(g.as_ref());
            let p = text::tokenize_folded(p.as_ref());
            rouge(&g, &p, RougeVariant::R1).f1
        })
        .sum();
    Ok(sum / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroF1,
    Rouge1F1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
            Metric::Rouge1F1 => "rouge1_f1",
        }
    }

    pub fn parse(name: &str) -> Result<Metric> {
        [Metric::Accuracy, Metric::MacroF1, Metric::Rouge1F1]
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::UnknownMetric(name.to_string()))
    }

    pub fn defaults(kind: TaskKind) -> Vec<Metric> {
        match kind {
            TaskKind::Classification => vec![Metric::Accuracy, Metric::MacroF1],
            TaskKind::SequenceGeneration => vec![Metric::Rouge1F1],
        }
    }

    fn applies_to(self, kind: TaskKind) -> bool {
        match self {
            Metric::Accuracy | Metric::MacroF1 => kind == TaskKind::Classification,
            Metric::Rouge1F1 => kind == TaskKind::SequenceGeneration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub slice_id: String,
    pub category: SliceCategory,
    pub size: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_dist: Option<Vec<f64>>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRef {
    pub id: String,
    pub version: Version,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model_id: String,
    pub testbench: BenchRef,
    /// Class order of `pred_dist` and `gold_dist`.
    #[serde(default)]
    pub classes: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub generated_at: String,
}

fn label_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => canonical::to_string(other),
    }
}

fn text_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => canonical::to_string(other),
    }
}

/// Scores one slice.
pub fn evaluate_slice(bench: &TestBench, preds: &PredictionSet, slice: &Slice, metrics: &[Metric]) -> Result<ReportRow> {
    let task = &bench.task;
    let inputs = task.input_refs();
    let data = &slice.data;
    data.check_columns(&inputs)?;
    data.check_columns(&[task.target_column.as_str()])?;

    let mut row = ReportRow {
        slice_id: slice.display_name.clone(),
        category: slice.category,
        size: data.len(),
        metrics: BTreeMap::new(),
        pred_dist: None,
        gold_dist: None,
        flags: Vec::new(),
    };
    if data.is_empty() {
        row.flags.push("empty".into());
        return Ok(row);
    }

    let mut gold = Vec::with_capacity(data.len());
    let mut pred = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let fp = data.row_fingerprint(i, &inputs)?;
        let out = preds.get(&fp).ok_or_else(|| Error::MissingPrediction {
            fingerprint: fp.hex(),
            slice: slice.display_name.clone(),
        })?;
        let g = data.value(i, &task.target_column)?;
        match task.kind {
            TaskKind::Classification => {
                gold.push(label_of(g));
                pred.push(label_of(out));
            }
            TaskKind::SequenceGeneration => {
                gold.push(text_of(g));
                pred.push(text_of(out));
            }
        }
    }

    for &m in metrics {
        let value = match m {
            Metric::Accuracy => accuracy(&gold, &pred)?,
            Metric::MacroF1 => macro_f1(&gold, &pred, &task.classes)?,
            Metric::Rouge1F1 => rouge1_f1_metric(&gold, &pred)?,
        };
        row.metrics.insert(m.name().to_string(), value);
    }
    if task.kind == TaskKind::Classification {
        row.pred_dist = Some(class_distribution(&pred, &task.classes)?);
        row.gold_dist = Some(class_distribution(&gold, &task.classes)?);
    }
    Ok(row)
}

/// Evaluates every slice; rows are grouped by category in the fixed order
/// subpopulation, transformation, attack, evalset, then by bench order.
pub fn create_report(
    bench: &TestBench,
    preds: &PredictionSet,
    metrics: &[Metric],
    generated_at: DateTime<Utc>,
) -> Result<Report> {
    if preds.task_kind != bench.task.kind {
        return Err(Error::InvalidParameter(format!(
            "predictions are for {} but the bench task is {}",
            preds.task_kind, bench.task.kind
        )));
    }
    if let Some(m) = metrics.iter().find(|m| !m.applies_to(bench.task.kind)) {
        return Err(Error::InvalidParameter(format!(
            "metric {} does not apply to {} tasks",
            m.name(),
            bench.task.kind
        )));
    }
    let mut rows = bench
        .slices
        .par_iter()
        .map(|s| {
            evaluate_slice(bench, preds, s, metrics).map_err(|e| match e {
                e @ Error::MissingPrediction { .. } => e,
                e => e.in_slice(&s.display_name),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // stable: bench order survives within a category
    rows.sort_by_key(|r| r.category);
    Ok(Report {
        model_id: preds.model_id.clone(),
        testbench: BenchRef {
            id: bench.identifier.canonical(),
            version: bench.version,
        },
        classes: bench.task.classes.clone(),
        rows,
        generated_at: generated_at.to_rfc3339_opts(SecondsFormat::Secs, true),
    })
}

impl Report {
    /// Metric columns, in first-seen order across rows.
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            for k in r.metrics.keys() {
                if !names.contains(k) {
                    names.push(k.clone());
                }
            }
        }
        names
    }

    pub fn emit_json(&self) -> Vec<u8> {
        canonical::to_vec_from(self).expect("reports serialize")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Report> {
        Ok(serde_json::from_slice(bytes)?)
    }

    fn categories(&self) -> impl Iterator<Item = (SliceCategory, Vec<&ReportRow>)> + '_ {
        SliceCategory::ALL.into_iter().filter_map(move |c| {
            let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.category == c).collect();
            (!rows.is_empty()).then_some((c, rows))
        })
    }

    fn dist_header(&self) -> String {
        self.classes.join("/")
    }

    pub fn emit_markdown(&self) -> String {
        let metrics = self.metric_names();
        let has_dist = self.rows.iter().any(|r| r.pred_dist.is_some());
        let mut out = format!(
            "# Robustness report\n\nModel `{}` on testbench `{}` version {} (generated {}).\n",
            self.model_id, self.testbench.id, self.testbench.version, self.generated_at
        );
        for (cat, rows) in self.categories() {
            let _ = write!(out, "\n## {}\n\n| Slice | Size |", title(cat));
            for m in &metrics {
                let _ = write!(out, " {m} |");
            }
            if has_dist {
                let _ = write!(out, " Pred dist ({0}) | Gold dist ({0}) |", self.dist_header());
            }
            out.push_str(" Flags |\n|---|---:|");
            for _ in &metrics {
                out.push_str("---:|");
            }
            if has_dist {
                out.push_str("---|---|");
            }
            out.push_str("---|\n");
            for r in rows {
                let _ = write!(out, "| {} | {} |", md_escape(&r.slice_id), r.size);
                for m in &metrics {
                    let _ = write!(out, " {} |", r.metrics.get(m).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()));
                }
                if has_dist {
                    let _ = write!(out, " {} | {} |", fmt_dist(&r.pred_dist, "/"), fmt_dist(&r.gold_dist, "/"));
                }
                let _ = writeln!(out, " {} |", r.flags.join(", "));
            }
        }
        out
    }

    /// A `table` environment with one `tabular` per category and a caption
    /// naming the model and bench.
    pub fn emit_latex(&self) -> String {
        let metrics = self.metric_names();
        let has_dist = self.rows.iter().any(|r| r.pred_dist.is_some());
        let ncols = 2 + metrics.len() + if has_dist { 2 } else { 0 };
        let mut out = String::from("\\begin{table}[ht]\n\\centering\n\\small\n");
        for (i, (cat, rows)) in self.categories().enumerate() {
            if i > 0 {
                out.push_str("\\vspace{0.5em}\n\n");
            }
            let _ = writeln!(out, "\\begin{{tabular}}{{l{}}}", "r".repeat(ncols - 1));
            out.push_str("\\hline\n");
            let _ = writeln!(out, "\\multicolumn{{{ncols}}}{{l}}{{\\textbf{{{}}}}} \\\\", title(cat));
            out.push_str("\\hline\nSlice & Size");
            for m in &metrics {
                let _ = write!(out, " & {}", latex_escape(m));
            }
            if has_dist {
                let h = latex_escape(&self.dist_header());
                let _ = write!(out, " & Pred ({h}) & Gold ({h})");
            }
            out.push_str(" \\\\\n\\hline\n");
            for r in rows {
                let _ = write!(out, "{} & {}", latex_escape(&r.slice_id), r.size);
                for m in &metrics {
                    let _ = write!(out, " & {}", r.metrics.get(m).map(|v| format!("{v:.4}")).unwrap_or_else(|| "--".into()));
                }
                if has_dist {
                    let _ = write!(out, " & {} & {}", fmt_dist(&r.pred_dist, "/"), fmt_dist(&r.gold_dist, "/"));
                }
                out.push_str(" \\\\\n");
            }
            out.push_str("\\hline\n\\end{tabular}\n");
        }
        let _ = writeln!(
            out,
            "\\caption{{Robustness report for model \\texttt{{{}}} on testbench \\texttt{{{}}} (version {}).}}",
            latex_escape(&self.model_id),
            latex_escape(&self.testbench.id),
            self.testbench.version
        );
        let label: String = self
            .testbench
            .id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        let _ = writeln!(out, "\\label{{tab:robustness-{label}}}");
        out.push_str("\\end{table}\n");
        out
    }
}

fn title(c: SliceCategory) -> &'static str {
    match c {
        SliceCategory::Subpopulation => "Subpopulations",
        SliceCategory::Transformation => "Transformations",
        SliceCategory::Attack => "Attacks",
        SliceCategory::Evalset => "Evaluation sets",
    }
}

fn fmt_dist(d: &Option<Vec<f64>>, sep: &str) -> String {
    match d {
        Some(v) => v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(sep),
        None => "-".into(),
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn latex_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            '|' => out.push_str("\\textbar{}"),
            '<' => out.push_str("\\textless{}"),
            '>' => out.push_str("\\textgreater{}"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slice_id: String,
    pub category: SliceCategory,
    pub before: f64,
    pub after: f64,
    pub drop: f64,
}

/// Slices whose `metric` fell by strictly more than `threshold` from `a` to
/// `b`, largest drop first.
pub fn diff(a: &Report, b: &Report, metric: &str, threshold: f64) -> Result<Vec<Regression>> {
    if a.testbench != b.testbench {
        return Err(Error::ReportMismatch(format!(
            "testbench {}@{} vs {}@{}",
            a.testbench.id, a.testbench.version, b.testbench.id, b.testbench.version
        )));
    }
    let known = a.metric_names();
    if !known.iter().any(|m| m == metric) && !b.metric_names().iter().any(|m| m == metric) {
        return Err(Error::UnknownMetric(metric.to_string()));
    }
    let mut out: Vec<Regression> = a
        .rows
        .iter()
        .filter_map(|ra| {
            let rb = b.rows.iter().find(|r| r.slice_id == ra.slice_id)?;
            let (before, after) = (*ra.metrics.get(metric)?, *rb.metrics.get(metric)?);
            let drop = before - after;
            (drop > threshold).then(|| Regression {
                slice_id: ra.slice_id.clone(),
                category: ra.category,
                before,
                after,
                drop,
            })
        })
        .collect();
    out.sort_by(|x, y| y.drop.total_cmp(&x.drop));
    Ok(out)
}
