#![allow(dead_code)]

use std::net::SocketAddr;

use chrono::{DateTime, TimeZone, Utc};
use serde_json::{json, Value};
use slicebench::testbench::{standard_slices, TaskSpec, TestBench};
use slicebench::{Column, ColumnKind, Dataset, Identifier};
use slicebench_service::server::{router, AppState};
use slicebench_service::Workspace;

pub fn task() -> TaskSpec {
    TaskSpec::classification("sentiment", &["text"], "label", &["neg", "pos"])
}

pub fn sentiment() -> Dataset {
    let subjects = ["The film", "This movie", "The plot", "The acting", "Her story"];
    let verdicts = [
        ("was good", "pos"),
        ("was not good", "neg"),
        ("felt great and warm", "pos"),
        ("was bad", "neg"),
        ("never worked for me", "neg"),
        ("was a happy surprise", "pos"),
    ];
    let mut rows = Vec::new();
    for (i, s) in subjects.iter().enumerate() {
        for (j, (v, label)) in verdicts.iter().enumerate() {
            let tail = if (i + j) % 3 == 0 { " overall, from start to finish" } else { "" };
            rows.push(vec![json!(format!("{s} {v}{tail}.")), json!(label)]);
        }
    }
    Dataset::from_rows(
        Identifier::new("reviews"),
        vec![Column::new("text", ColumnKind::Text), Column::new("label", ColumnKind::Label)],
        rows,
    )
    .unwrap()
}

/// A crude rule model: positive iff a positive cue appears without "not".
pub fn rule_model(text: &str) -> &'static str {
    let t = text.to_lowercase();
    let cue = ["good", "great", "happy"].iter().any(|w| t.contains(w));
    if cue && !t.contains("not") {
        "pos"
    } else {
        "neg"
    }
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 2, 3, 4, 5).unwrap()
}

/// Workspace holding dataset `reviews` and bench `sent` built from its
/// standard slices.
pub fn seeded_workspace(root: &std::path::Path) -> (Workspace, TestBench) {
    let ws = Workspace::open(root).unwrap();
    let ds = ws.save_dataset("reviews", &sentiment()).unwrap();
    let bench = TestBench::new(Identifier::new("sent"), task())
        .with_created_at(epoch())
        .add_slices(standard_slices(&ds, &task(), 7).unwrap())
        .unwrap();
    ws.save_bench(&bench).unwrap();
    (ws, bench)
}

/// Prediction lines for every distinct input of the bench.
pub fn rule_predictions(bench: &TestBench) -> Vec<Value> {
    slicebench_service::predictions::bench_inputs(bench)
        .unwrap()
        .into_iter()
        .map(|(_, input)| {
            let text = input["text"].as_str().unwrap().to_string();
            json!({ "input": input, "output": rule_model(&text) })
        })
        .collect()
}

pub async fn spawn_service(ws: Workspace) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(AppState::open(ws).unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

pub async fn spawn_router(app: axum::Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

/// Polls a job until it reaches a terminal state.
pub async fn wait_job(client: &reqwest::Client, addr: SocketAddr, job_id: &str) -> Value {
    for _ in 0..600 {
        let rec: Value = client
            .get(format!("http://{addr}/api/jobs/{job_id}"))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        if rec["status"] == "done" || rec["status"] == "failed" {
            return rec;
        }
        tokio::time::sleep(std::time::Duration::from_millis(20)).await;
    }
    panic!("job {job_id} did not finish");
}
