//! Evaluation shared by the CLI and the HTTP service, so both produce the
//! same report bytes for the same inputs.

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use slicebench::canonical;
use slicebench::report::{create_report, Metric, PredictionSet, Report};

use crate::error::{Result, ServiceError};
use crate::predictions::{bench_inputs, load_predictions_jsonl, predictions_from_values};
use crate::remote::{fetch_predictions_remote, RemoteModelConfig};
use crate::workspace::{check_id, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionSource {
    /// Objects shaped like prediction-file lines.
    Inline { lines: Vec<Value> },
    File { path: PathBuf },
    Remote { config: RemoteModelConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub testbench: String,
    pub model_id: String,
    pub predictions: PredictionSource,
    /// Defaults to the task's standard metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<String>>,
    /// Defaults to the current time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub report_id: String,
    pub report: Report,
    pub bytes: Vec<u8>,
}

/// Report ids hash everything that determines the report except its
/// timestamp, so resubmitting a request lands on the same id.
pub fn report_id(bench_id: &str, version: &str, metrics: &[Metric], preds: &PredictionSet) -> String {
    let names: Vec<&str> = metrics.iter().map(|m| m.name()).collect();
    let key = json!({
        "testbench": bench_id,
        "version": version,
        "metrics": names,
        "predictions": preds,
    });
    let hex = canonical::sha256_hex(&canonical::to_vec(&key));
    format!("r-{}", &hex[..16])
}

pub async fn evaluate(ws: &Workspace, req: &EvaluateRequest) -> Result<EvaluateOutcome> {
    check_id("testbench", &req.testbench)?;
    if req.model_id.trim().is_empty() {
        return Err(ServiceError::BadRequest("model_id must not be empty".into()));
    }
    let bench = ws.load_bench(&req.testbench)?;
    let metrics = match &req.metrics {
        Some(names) if !names.is_empty() => names.iter().map(|n| Metric::parse(n)).collect::<Result<Vec<_>, _>>()?,
        _ => Metric::defaults(bench.task.kind),
    };
    let preds = match &req.predictions {
        PredictionSource::Inline { lines } => predictions_from_values(lines, &req.model_id, &bench.task)?,
        PredictionSource::File { path } => load_predictions_jsonl(path, &req.model_id, &bench.task)?,
        PredictionSource::Remote { config } => {
            let inputs = bench_inputs(&bench)?;
            fetch_predictions_remote(config, &req.model_id, &bench.task, &inputs).await?
        }
    };
    let generated_at = req.generated_at.unwrap_or_else(Utc::now);
    let id = report_id(&bench.identifier.canonical(), &bench.version.to_string(), &metrics, &preds);
    let report = tokio::task::spawn_blocking(move || create_report(&bench, &preds, &metrics, generated_at))
        .await
        .map_err(|e| ServiceError::Task(e.to_string()))??;
    let bytes = ws.save_report(&id, &report)?;
    Ok(EvaluateOutcome {
        report_id: id,
        report,
        bytes,
    })
}
