//! Black-box model client.
//!
//! Wire protocol: `POST <endpoint>` with `{"examples": [{<input columns>}, ...]}`;
//! the model answers `{"outputs": [...]}` with one output per example, in
//! order.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use slicebench::report::PredictionSet;
use slicebench::testbench::TaskSpec;
use thiserror::Error;

use crate::predictions::InputRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteModelConfig {
    pub endpoint: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts per batch after the first.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Sent verbatim as the `Authorization` header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_header: Option<String>,
}

fn default_batch_size() -> usize {
    32
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    200
}

impl RemoteModelConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteModelConfig {
            endpoint: endpoint.into(),
            batch_size: default_batch_size(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            auth_header: None,
        }
    }

    pub fn validate(&self) -> Result<(), RemoteError> {
        if self.batch_size == 0 {
            return Err(RemoteError::Config("batch_size must be at least 1".into()));
        }
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(RemoteError::Config(format!("endpoint `{}` is not an http(s) URL", self.endpoint)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("invalid remote config: {0}")]
    Config(String),

    #[error("protocol error in batch {batch}: {message}")]
    Protocol { batch: usize, message: String },

    #[error("batches {failed_batches:?} failed after retries: {message}")]
    Transport { failed_batches: Vec<usize>, message: String },
}

#[derive(Deserialize)]
struct Reply {
    outputs: Vec<Value>,
}

enum Attempt {
    Ok(Vec<Value>),
    Retryable(String),
    Fatal(String),
}

async fn post_batch(client: &reqwest::Client, config: &RemoteModelConfig, batch: usize, examples: &[Value]) -> Result<Attempt, RemoteError> {
    let mut req = client.post(&config.endpoint).json(&json!({ "examples": examples }));
    if let Some(auth) = &config.auth_header {
        req = req.header(reqwest::header::AUTHORIZATION, auth);
    }
    let resp = match req.send().await {
        Ok(r) => r,
        Err(e) => return Ok(Attempt::Retryable(e.to_string())),
    };
    let status = resp.status();
    if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
        return Ok(Attempt::Retryable(format!("HTTP {status}")));
    }
    if !status.is_success() {
        return Ok(Attempt::Fatal(format!("HTTP {status}")));
    }
    let body = match resp.bytes().await {
        Ok(b) => b,
        Err(e) => return Ok(Attempt::Retryable(e.to_string())),
    };
    let reply: Reply = serde_json::from_slice(&body).map_err(|e| RemoteError::Protocol {
        batch,
        message: format!("expected {{\"outputs\": [...]}}: {e}"),
    })?;
    if reply.outputs.len() != examples.len() {
        return Err(RemoteError::Protocol {
            batch,
            message: format!("sent {} examples, received {} outputs", examples.len(), reply.outputs.len()),
        });
    }
    Ok(Attempt::Ok(reply.outputs))
}

/// Scores `examples` (fingerprint plus input projection) against the
/// endpoint. Batches are sent in order; any batch still failing after its
/// retries fails the whole call, listing every failed batch index.
pub async fn fetch_predictions_remote(
    config: &RemoteModelConfig,
    model_id: &str,
    task: &TaskSpec,
    examples: &[InputRow],
) -> Result<PredictionSet, RemoteError> {
    config.validate()?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_millis(config.timeout_ms))
        .build()
        .map_err(|e| RemoteError::Config(e.to_string()))?;
    let mut set = PredictionSet::new(model_id, task.kind);
    let mut failed = Vec::new();
    let mut last_error = String::new();

    for (batch, chunk) in examples.chunks(config.batch_size).enumerate() {
        let payload: Vec<Value> = chunk.iter().map(|(_, obj)| Value::Object(obj.clone())).collect();
        let mut attempt = 0u32;
        let outputs = loop {
            match post_batch(&client, config, batch, &payload).await? {
                Attempt::Ok(outputs) => break Some(outputs),
                Attempt::Fatal(msg) => {
                    last_error = msg;
                    break None;
                }
                Attempt::Retryable(msg) => {
                    tracing::warn!(batch, attempt, error = %msg, "remote batch failed");
                    last_error = msg;
                    if attempt >= config.retries {
                        break None;
                    }
                    let delay = config.backoff_ms.saturating_mul(1u64 << attempt.min(16));
                    tokio::time::sleep(Duration::from_millis(delay)).await;
                    attempt += 1;
                }
            }
        };
        match outputs {
            Some(outputs) => {
                for ((fp, _), out) in chunk.iter().zip(outputs) {
                    set.insert(fp, out).map_err(|e| RemoteError::Protocol {
                        batch,
                        message: e.to_string(),
                    })?;
                }
            }
            None => failed.push(batch),
        }
    }
    if !failed.is_empty() {
        return Err(RemoteError::Transport {
            failed_batches: failed,
            message: last_error,
        });
    }
    Ok(set)
}
