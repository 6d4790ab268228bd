use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use slicebench::cache::compute_cached;
use slicebench::canonical;
use slicebench::dataset::{ingest_csv, ingest_jsonl};
use slicebench::ops::builtin_op;
use slicebench::report::diff;
use slicebench::testbench::{standard_slices, TaskKind, TaskSpec, TestBench};
use slicebench::{Column, ColumnKind, Dataset, Identifier};

use crate::build::{run_builder, BuildRequest};
use crate::evaluate::{evaluate, EvaluateRequest, PredictionSource};
use crate::remote::RemoteModelConfig;
use crate::server::{serve, AppState};
use crate::workspace::{check_id, Workspace};

#[derive(Debug, Parser)]
#[command(name = "slicebench", version, about = "Slice-based robustness evaluation")]
pub struct Cli {
    /// Data root holding datasets, benches, reports and the cache.
    #[arg(long, global = true, default_value = ".slicebench", env = "SLICEBENCH_ROOT")]
    pub root: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import a JSONL or CSV file as a dataset.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        out: String,
        /// Column kind overrides such as `label=label`.
        #[arg(long = "kind", value_delimiter = ',', value_parser = parse_column_kind)]
        kinds: Vec<(String, ColumnKind)>,
    },
    /// Run a cached operation over dataset columns.
    Cache {
        dataset: String,
        #[arg(long)]
        op: String,
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        /// Store the dataset with the output column under this id.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a slice builder spec against a dataset.
    Slice {
        dataset: String,
        #[arg(long)]
        builder: String,
        /// Add the resulting slices to this bench.
        #[arg(long)]
        bench: Option<String>,
    },
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Evaluate predictions on a bench and store the report.
    Eval {
        #[arg(long)]
        bench: String,
        #[arg(long, conflicts_with = "remote", required_unless_present = "remote")]
        preds: Option<PathBuf>,
        /// Model endpoint speaking the batch JSON protocol.
        #[arg(long)]
        remote: Option<String>,
        #[arg(long, default_value = "model")]
        model_id: String,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Report timestamp (RFC 3339); defaults to now.
        #[arg(long)]
        generated_at: Option<DateTime<Utc>>,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 30_000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = 2)]
        retries: u32,
        #[arg(long, default_value_t = 200)]
        backoff_ms: u64,
        #[arg(long)]
        auth_header: Option<String>,
    },
    /// Print a stored report.
    Report {
        id: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
    /// List slices that regressed from report `a` to report `b`.
    Diff {
        a: String,
        b: String,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Create a bench, optionally seeded with the standard slices of a dataset.
    New {
        id: String,
        #[arg(long, value_parser = parse_kind)]
        kind: TaskKind,
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        target: String,
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        #[arg(long)]
        task_name: Option<String>,
        #[arg(long)]
        from: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Add the slices of a builder spec; bumps the minor version.
    Add {
        id: String,
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        builder: String,
    },
    Bump {
        id: String,
        #[arg(value_enum)]
        part: VersionPart,
    },
    /// Rank slices by name similarity to a query.
    Search {
        id: String,
        query: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
    },
    /// Export a bench bundle to a directory.
    Save { id: String, dir: PathBuf },
    /// Import a bench bundle from a directory.
    Load { dir: PathBuf },
    List,
    Show { id: String },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Json,
    Md,
    Latex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VersionPart {
    Major,
    Minor,
    Patch,
}

fn parse_kind(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: slicebench::Error| e.to_string())
}

fn parse_column_kind(s: &str) -> Result<(String, ColumnKind), String> {
    let (col, kind) = s.split_once('=').ok_or_else(|| format!("expected `column=kind`, got `{s}`"))?;
    let kind = kind.parse().map_err(|e: slicebench::Error| e.to_string())?;
    Ok((col.to_string(), kind))
}

fn retype(ds: &Dataset, kinds: &BTreeMap<String, ColumnKind>) -> slicebench::Result<Dataset> {
    if let Some(name) = kinds.keys().find(|k| ds.column(k).is_none()) {
        return Err(slicebench::Error::UnknownColumn(name.clone()));
    }
    let mut columns = Vec::new();
    let mut data = Vec::new();
    for c in ds.columns() {
        columns.push(Column::new(c.name.clone(), kinds.get(&c.name).copied().unwrap_or(c.kind)));
        data.push(ds.column_values(&c.name)?.to_vec());
    }
    Dataset::from_columns(ds.identifier().clone(), columns, data)
}

fn print_json(out: &mut dyn Write, value: &serde_json::Value) -> anyhow::Result<()> {
    out.write_all(&canonical::to_vec(value))?;
    writeln!(out)?;
    Ok(())
}

fn bench_line(b: &TestBench) -> serde_json::Value {
    json!({ "id": b.identifier.canonical(), "version": b.version, "slices": b.slices.len() })
}

pub async fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let ws = Workspace::open(&cli.root)?;
    match cli.command {
        Command::Ingest { file, out: id, kinds } => {
            let kinds: BTreeMap<String, ColumnKind> = kinds.into_iter().collect();
            let ds = match file.extension().and_then(|e| e.to_str()) {
                Some("csv") => ingest_csv(&file).and_then(|d| retype(&d, &kinds)),
                _ => ingest_jsonl(&file, Some(&kinds)),
            }
            .with_context(|| format!("reading {}", file.display()))?;
            let ds = ws.save_dataset(&id, &ds)?;
            print_json(
                out,
                &json!({
                    "dataset": id,
                    "rows": ds.len(),
                    "columns": ds.columns(),
                    "fingerprint": ds.fingerprint().hex(),
                }),
            )?;
        }
        Command::Cache { dataset, op, columns, out: save_as } => {
            let ds = ws.load_dataset(&dataset)?;
            let op = builtin_op(&Identifier::parse(&op)?)?;
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            let store = ws.cache()?;
            let before = store.len()?;
            let values = compute_cached(&op, &ds, &cols, &store)?;
            let added = store.len()? - before;
            let column = op.column_name(&cols);
            if let Some(id) = save_as {
                let with = ds.append_column(&column, op.output_kind(), values)?;
                ws.save_dataset(&id, &with)?;
            }
            print_json(out, &json!({ "column": column, "rows": ds.len(), "new_entries": added }))?;
        }
        Command::Slice { dataset, builder, bench } => {
            let outcome = run_builder(
                &ws,
                &BuildRequest {
                    dataset,
                    builder,
                    testbench: bench,
                },
            )?;
            print_json(out, &serde_json::to_value(outcome)?)?;
        }
        Command::Bench(cmd) => bench(&ws, cmd, out)?,
        Command::Eval {
            bench,
            preds,
            remote,
            model_id,
            metrics,
            generated_at,
            batch_size,
            timeout_ms,
            retries,
            backoff_ms,
            auth_header,
        } => {
            let predictions = match (preds, remote) {
                (Some(path), None) => PredictionSource::File { path },
                (None, Some(endpoint)) => PredictionSource::Remote {
                    config: RemoteModelConfig {
                        endpoint,
                        batch_size,
                        timeout_ms,
                        retries,
                        backoff_ms,
                        auth_header,
                    },
                },
                _ => bail!("pass exactly one of --preds or --remote"),
            };
            let req = EvaluateRequest {
                testbench: bench,
                model_id,
                predictions,
                metrics: (!metrics.is_empty()).then_some(metrics),
                generated_at,
            };
            let outcome = evaluate(&ws, &req).await?;
            print_json(out, &json!({ "report_id": outcome.report_id }))?;
        }
        Command::Report { id, format } => match format {
            ReportFormat::Json => {
                out.write_all(&ws.report_bytes(&id)?)?;
                writeln!(out)?;
            }
            ReportFormat::Md => write!(out, "{}", ws.load_report(&id)?.emit_markdown())?,
            ReportFormat::Latex => write!(out, "{}", ws.load_report(&id)?.emit_latex())?,
        },
        Command::Diff { a, b, metric, threshold } => {
            let (ra, rb) = (ws.load_report(&a)?, ws.load_report(&b)?);
            let metric = match metric {
                Some(m) => m,
                None => ra.metric_names().into_iter().next().context("report has no metrics; pass --metric")?,
            };
            let regressions = diff(&ra, &rb, &metric, threshold)?;
            print_json(out, &json!({ "metric": metric, "threshold": threshold, "regressions": regressions }))?;
        }
        Command::Serve { port, host } => {
            let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                .await
                .with_context(|| format!("cannot listen on {host}:{port}"))?;
            tracing::info!(addr = %listener.local_addr()?, root = %ws.root().display(), "serving");
            serve(listener, AppState::open(ws)?).await?;
        }
    }
    Ok(())
}

fn bench(ws: &Workspace, cmd: BenchCommand, out: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        BenchCommand::New {
            id,
            kind,
            inputs,
            target,
            classes,
            task_name,
            from,
            seed,
        } => {
            check_id("testbench", &id)?;
            if ws.bench_exists(&id) {
                bail!("bench `{id}` already exists");
            }
            let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
            let name = task_name.unwrap_or_else(|| id.clone());
            let task = match kind {
                TaskKind::Classification => {
                    if classes.is_empty() {
                        bail!("classification benches need --classes");
                    }
                    let classes: Vec<&str> = classes.iter().map(String::as_str).collect();
                    TaskSpec::classification(&name, &inputs, &target, &classes)
                }
                TaskKind::SequenceGeneration => TaskSpec::generation(&name, &inputs, &target),
            };
            let mut bench = TestBench::new(Identifier::new(&id), task);
            if let Some(ds) = from {
                let dataset = ws.load_dataset(&ds)?;
                bench = bench.add_slices(standard_slices(&dataset, &bench.task, seed)?)?;
            }
            ws.save_bench(&bench)?;
            print_json(out, &bench_line(&bench))?;
        }
        BenchCommand::Add { id, dataset, builder } => {
            let outcome = run_builder(
                ws,
                &BuildRequest {
                    dataset,
                    builder,
                    testbench: Some(id),
                },
            )?;
            print_json(out, &serde_json::to_value(outcome)?)?;
        }
        BenchCommand::Bump { id, part } => {
            let b = ws.load_bench(&id)?;
            let b = match part {
                VersionPart::Major => b.bump_major(),
                VersionPart::Minor => b.bump_minor(),
                VersionPart::Patch => b.bump_patch(),
            };
            ws.save_bench(&b)?;
            print_json(out, &bench_line(&b))?;
        }
        BenchCommand::Search { id, query, k } => {
            let b = ws.load_bench(&id)?;
            let hits: Vec<_> = b
                .search(&query, k)?
                .iter()
                .map(|h| json!({ "slice": h.slice.display_name, "score": h.score }))
                .collect();
            print_json(out, &json!(hits))?;
        }
        BenchCommand::Save { id, dir } => {
            ws.load_bench(&id)?.save(&dir)?;
            print_json(out, &json!({ "saved": id, "dir": dir }))?;
        }
        BenchCommand::Load { dir } => {
            let b = TestBench::load(&dir)?;
            ws.save_bench(&b)?;
            print_json(out, &bench_line(&b))?;
        }
        BenchCommand::List => {
            let list: Vec<_> = ws.list_benches()?.iter().map(bench_line).collect();
            print_json(out, &json!(list))?;
        }
        BenchCommand::Show { id } => {
            let b = ws.load_bench(&id)?;
            let slices: Vec<_> = b
                .slices
                .iter()
                .map(|s| json!({ "display_name": s.display_name, "category": s.category, "size": s.len() }))
                .collect();
            print_json(
                out,
                &json!({ "id": id, "version": b.version, "task": b.task, "slices": slices }),
            )?;
        }
    }
    Ok(())
}
