mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use slicebench_service::predictions::bench_inputs;
use slicebench_service::remote::{fetch_predictions_remote, RemoteError, RemoteModelConfig};

use common::*;

fn examples_of(body: &Value) -> Vec<Value> {
    body["examples"].as_array().unwrap().clone()
}

fn config(addr: std::net::SocketAddr, batch_size: usize) -> RemoteModelConfig {
    RemoteModelConfig {
        batch_size,
        retries: 0,
        backoff_ms: 1,
        ..RemoteModelConfig::new(format!("http://{addr}/predict"))
    }
}

fn inputs() -> Vec<slicebench_service::predictions::InputRow> {
    let dir = tempfile::tempdir().unwrap();
    let (_, bench) = seeded_workspace(dir.path());
    bench_inputs(&bench).unwrap()
}

#[tokio::test]
async fn constant_label_endpoint() {
    let app = Router::new().route(
        "/predict",
        post(|Json(body): Json<Value>| async move {
            let n = examples_of(&body).len();
            Json(json!({ "outputs": vec!["pos"; n] }))
        }),
    );
    let addr = spawn_router(app).await;
    let examples = inputs();
    let set = fetch_predictions_remote(&config(addr, 8), "const", &task(), &examples).await.unwrap();
    assert_eq!(set.len(), examples.len());
    assert!(set.outputs.values().all(|v| v == "pos"));
}

#[tokio::test]
async fn misaligned_outputs_are_a_protocol_error() {
    let app = Router::new().route(
        "/predict",
        post(|Json(body): Json<Value>| async move {
            let n = examples_of(&body).len();
            Json(json!({ "outputs": vec!["pos"; n.saturating_sub(1)] }))
        }),
    );
    let addr = spawn_router(app).await;
    let err = fetch_predictions_remote(&config(addr, 4), "m", &task(), &inputs()).await.unwrap_err();
    assert!(matches!(err, RemoteError::Protocol { batch: 0, .. }), "{err}");
}

#[tokio::test]
async fn malformed_reply_is_a_protocol_error() {
    let app = Router::new().route("/predict", post(|| async { Json(json!({ "labels": [] })) }));
    let addr = spawn_router(app).await;
    let err = fetch_predictions_remote(&config(addr, 4), "m", &task(), &inputs()).await.unwrap_err();
    assert!(matches!(err, RemoteError::Protocol { .. }), "{err}");
}

#[tokio::test]
async fn server_error_then_success_is_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = calls.clone();
    let app = Router::new().route(
        "/predict",
        post(move |Json(body): Json<Value>| {
            let counter = counter.clone();
            async move {
                if counter.fetch_add(1, Ordering::SeqCst) == 0 {
                    return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({})));
                }
                let n = examples_of(&body).len();
                (StatusCode::OK, Json(json!({ "outputs": vec!["neg"; n] })))
            }
        }),
    );
    let addr = spawn_router(app).await;
    let examples = inputs();
    let cfg = RemoteModelConfig {
        retries: 1,
        ..config(addr, examples.len())
    };
    let set = fetch_predictions_remote(&cfg, "m", &task(), &examples).await.unwrap();
    assert_eq!(set.len(), examples.len());
    assert_eq!(calls.load(Ordering::SeqCst), 2);

    // without a retry the same first failure is fatal
    calls.store(0, Ordering::SeqCst);
    let err = fetch_predictions_remote(&config(addr, examples.len()), "m", &task(), &examples).await.unwrap_err();
    match err {
        RemoteError::Transport { failed_batches, .. } => assert_eq!(failed_batches, vec![0]),
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn failed_batches_are_listed() {
    // batches holding a "bad" example always fail
    let app = Router::new().route(
        "/predict",
        post(|Json(body): Json<Value>| async move {
            let ex = examples_of(&body);
            if ex.iter().any(|e| e["text"].as_str().unwrap().contains("bad")) {
                return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({})));
            }
            (StatusCode::OK, Json(json!({ "outputs": vec!["neg"; ex.len()] })))
        }),
    );
    let addr = spawn_router(app).await;
    let examples = inputs();
    let expected: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, (_, e))| e["text"].as_str().unwrap().contains("bad"))
        .map(|(i, _)| i)
        .collect();
    let err = fetch_predictions_remote(&config(addr, 1), "m", &task(), &examples).await.unwrap_err();
    match err {
        RemoteError::Transport { failed_batches, .. } => assert_eq!(failed_batches, expected),
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn result_is_independent_of_batch_size() {
    let app = Router::new().route(
        "/predict",
        post(|Json(body): Json<Value>| async move {
            let outputs: Vec<&str> = examples_of(&body)
                .iter()
                .map(|e| rule_model(e["text"].as_str().unwrap()))
                .collect();
            Json(json!({ "outputs": outputs }))
        }),
    );
    let addr = spawn_router(app).await;
    let examples = inputs();
    let one = fetch_predictions_remote(&config(addr, 1), "m", &task(), &examples).await.unwrap();
    let many = fetch_predictions_remote(&config(addr, 32), "m", &task(), &examples).await.unwrap();
    assert_eq!(one, many);
    assert_eq!(one.len(), examples.len());
}

#[tokio::test]
async fn auth_header_is_sent_and_config_is_validated() {
    let app = Router::new().route(
        "/predict",
        post(|headers: axum::http::HeaderMap, Json(body): Json<Value>| async move {
            if headers.get("authorization").and_then(|h| h.to_str().ok()) != Some("Bearer t0k") {
                return (StatusCode::UNAUTHORIZED, Json(json!({})));
            }
            let n = examples_of(&body).len();
            (StatusCode::OK, Json(json!({ "outputs": vec!["pos"; n] })))
        }),
    );
    let addr = spawn_router(app).await;
    let examples = inputs();
    let mut cfg = config(addr, 16);
    assert!(fetch_predictions_remote(&cfg, "m", &task(), &examples).await.is_err());
    cfg.auth_header = Some("Bearer t0k".into());
    assert!(fetch_predictions_remote(&cfg, "m", &task(), &examples).await.is_ok());

    cfg.batch_size = 0;
    assert!(matches!(
        fetch_predictions_remote(&cfg, "m", &task(), &examples).await,
        Err(RemoteError::Config(_))
    ));
}
