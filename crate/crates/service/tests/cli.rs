mod common;

use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};
use slicebench::canonical;

use common::*;

fn slicebench(root: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_slicebench"))
        .arg("--root")
        .arg(root)
        .args(args)
        .output()
        .expect("run slicebench");
    assert!(
        out.status.success(),
        "slicebench {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_jsonl(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|l| canonical::to_string(l) + "\n").collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn end_to_end_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let data = tmp.path().join("reviews.jsonl");
    let ds = sentiment();
    let rows: Vec<Value> = ds.rows().map(|e| json!(e.values())).collect();
    write_jsonl(&data, &rows);

    let ingested: Value = serde_json::from_str(&slicebench(&root, &["ingest", data.to_str().unwrap(), "--out", "reviews", "--kind", "label=label"])).unwrap();
    assert_eq!(ingested["rows"], 30);

    let cached: Value = serde_json::from_str(&slicebench(&root, &["cache", "reviews", "--op", "length", "--columns", "text"])).unwrap();
    assert_eq!(cached["new_entries"], 30);
    let again: Value = serde_json::from_str(&slicebench(&root, &["cache", "reviews", "--op", "length", "--columns", "text"])).unwrap();
    assert_eq!(again["new_entries"], 0);

    let sliced: Value = serde_json::from_str(&slicebench(
        &root,
        &["slice", "reviews", "--builder", "Length(intervals=\"[0%,50%]\", columns=\"text\")"],
    ))
    .unwrap();
    assert_eq!(sliced["slices"][0]["display_name"], "Length[0%,50%]");

    slicebench(
        &root,
        &[
            "bench", "new", "sent", "--kind", "classification", "--inputs", "text", "--target", "label", "--classes",
            "neg,pos", "--from", "reviews", "--seed", "7",
        ],
    );
    let added: Value = serde_json::from_str(&slicebench(
        &root,
        &["bench", "add", "sent", "--dataset", "reviews", "--builder", "HasPhrase(phrases=\"plot\", columns=\"text\")"],
    ))
    .unwrap();
    assert_eq!(added["version"], "0.2.0");
    let bumped: Value = serde_json::from_str(&slicebench(&root, &["bench", "bump", "sent", "major"])).unwrap();
    assert_eq!(bumped["version"], "1.0.0");
    let hits: Value = serde_json::from_str(&slicebench(&root, &["bench", "search", "sent", "Length", "-k", "2"])).unwrap();
    assert_eq!(hits.as_array().unwrap().len(), 2);
    assert!(hits[0]["slice"].as_str().unwrap().starts_with("Length"));

    let export = tmp.path().join("export");
    slicebench(&root, &["bench", "save", "sent", export.to_str().unwrap()]);
    let other = tmp.path().join("other");
    let loaded: Value = serde_json::from_str(&slicebench(&other, &["bench", "load", export.to_str().unwrap()])).unwrap();
    assert_eq!(loaded["version"], "1.0.0");
    let list: Value = serde_json::from_str(&slicebench(&other, &["bench", "list"])).unwrap();
    assert_eq!(list[0]["id"], "sent");

    let ws = slicebench_service::Workspace::open(&root).unwrap();
    let bench = ws.load_bench("sent").unwrap();
    let preds = tmp.path().join("preds.jsonl");
    write_jsonl(&preds, &rule_predictions(&bench));
    let out: Value = serde_json::from_str(&slicebench(
        &root,
        &["eval", "--bench", "sent", "--preds", preds.to_str().unwrap(), "--model-id", "rules"],
    ))
    .unwrap();
    let id = out["report_id"].as_str().unwrap();
    let md = slicebench(&root, &["report", id, "--format", "md"]);
    assert!(md.contains("| Slice | Size |") && md.contains("## Attacks"), "{md}");
    let latex = slicebench(&root, &["report", id, "--format", "latex"]);
    assert!(latex.contains("\\begin{tabular}"));
    let d: Value = serde_json::from_str(&slicebench(&root, &["diff", id, id])).unwrap();
    assert_eq!(d["regressions"], json!([]));
}

#[tokio::test]
async fn cli_and_service_reports_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cli_root = tmp.path().join("cli");
    let svc_root = tmp.path().join("svc");
    let (_, bench) = seeded_workspace(&cli_root);
    let (svc_ws, _) = seeded_workspace(&svc_root);

    let lines = rule_predictions(&bench);
    write_jsonl(&cli_root.join("preds.jsonl"), &lines);
    write_jsonl(&svc_root.join("preds.jsonl"), &lines);

    let out = {
        let root = cli_root.clone();
        let preds = cli_root.join("preds.jsonl");
        tokio::task::spawn_blocking(move || {
            slicebench(
                &root,
                &[
                    "eval", "--bench", "sent", "--preds", preds.to_str().unwrap(), "--model-id", "rules",
                    "--generated-at", "2024-01-02T03:04:05Z",
                ],
            )
        })
        .await
        .unwrap()
    };
    let cli_id = serde_json::from_str::<Value>(&out).unwrap()["report_id"].as_str().unwrap().to_string();
    let cli_bytes = std::fs::read(cli_root.join("reports").join(format!("{cli_id}.json"))).unwrap();

    let addr = spawn_service(svc_ws).await;
    let client = reqwest::Client::new();
    for predictions in [json!({ "kind": "file", "path": "preds.jsonl" }), json!({ "kind": "inline", "lines": lines })] {
        let req = json!({
            "testbench": "sent",
            "model_id": "rules",
            "predictions": predictions,
            "generated_at": "2024-01-02T03:04:05Z",
        });
        let job: Value = client.post(format!("http://{addr}/api/evaluate")).json(&req).send().await.unwrap().json().await.unwrap();
        let rec = wait_job(&client, addr, job["job_id"].as_str().unwrap()).await;
        assert_eq!(rec["result"]["report_id"], cli_id.as_str());
        let svc_bytes = client
            .get(format!("http://{addr}/api/reports/{cli_id}"))
            .send()
            .await
            .unwrap()
            .bytes()
            .await
            .unwrap();
        assert_eq!(svc_bytes.as_ref(), cli_bytes.as_slice());
    }
}
