//! Configuration ingestion, task orchestration and report persistence for
//! the `lrclt` command-line tool.

pub mod config;
pub mod output;
pub mod schema;
pub mod tasks;

use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use config::{ExperimentConfig, Resolved, Task};
use output::{json_bytes, sha256_hex, Cell, OutputDir, RunManifest, Status, TaskRecord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("budget refusal: {0}")]
    Budget(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0}")]
    Core(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

pub const EXIT_VIOLATION: i32 = 4;

/// Tasks in dependency order without repeats.
pub fn ordered_tasks(tasks: &[Task]) -> Vec<Task> {
    let mut t = tasks.to_vec();
    t.sort();
    t.dedup();
    t
}

/// Runs the tasks, writes every report and `manifest.json` under `out`, and
/// returns the manifest with the process exit code.
pub fn run(
    resolved: &Resolved,
    tasks: &[Task],
    out: &Path,
) -> Result<(RunManifest, i32), CliError> {
    let mut dir = OutputDir::create(out)?;
    let mut records = Vec::new();
    for task in ordered_tasks(tasks) {
        let rec = match tasks::run_task(resolved, task, &mut dir) {
            Ok(rec) => rec,
            Err(e) => TaskRecord {
                task: task.name().into(),
                status: match e {
                    CliError::Budget(_) => Status::Budget,
                    _ => Status::Error,
                },
                notes: vec![e.to_string()],
                files: vec![],
            },
        };
        records.push(rec);
    }
    let canonical = json_bytes(&resolved.config)?;
    let manifest = RunManifest {
        tool: "lrclt".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(&canonical),
        seed: resolved.config.seed,
        tasks: records,
        files: dir.files(),
    };
    std::fs::write(out.join("manifest.json"), json_bytes(&manifest)?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let code = manifest
        .tasks
        .iter()
        .map(|t| match t.status {
            Status::Ok | Status::Refused => 0,
            Status::Violation => EXIT_VIOLATION,
            Status::Budget => 3,
            Status::Error => 1,
        })
        .fold(0, |acc, c| match (acc, c) {
            (0, c) => c,
            (a, 0) => a,
            // errors outrank budget refusals, which outrank violations
            (a, c) => [1, 3, 4].into_iter().find(|x| *x == a || *x == c).unwrap(),
        });
    Ok((manifest, code))
}

/// Reads a configuration, applies the seed override and validates it.
pub fn load(path: &Path, seed: Option<u64>) -> Result<Resolved, CliError> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.resolve()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Charfn,
    Lclt,
    Decimation,
    Mc,
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "charfn" => Ok(PlotKind::Charfn),
            "lclt" => Ok(PlotKind::Lclt),
            "decimation" => Ok(PlotKind::Decimation),
            "mc" => Ok(PlotKind::Mc),
            other => Err(CliError::Validation(format!(
                "kind: unknown report kind {other:?} (expected charfn, lclt, decimation or mc)"
            ))),
        }
    }
}

fn field<'a>(v: &'a Value, path: &[&str]) -> Result<&'a Value, CliError> {
    path.iter().try_fold(v, |v, k| {
        v.get(*k).ok_or_else(|| {
            CliError::Validation(format!("report: missing field {}", path.join(".")))
        })
    })
}

fn num(v: &Value) -> Cell {
    v.as_f64().map_or(Cell::F(f64::NAN), Cell::F)
}

/// Turns a JSON report written by a task into plot-ready CSV files.
pub fn emit_plot_data(report: &Path, kind: PlotKind, out: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(report)
        .map_err(|e| CliError::Io(format!("{}: {e}", report.display())))?;
    let v: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("report: {e}")))?;
    let mut dir = OutputDir::create(out)?;
    let mut written = Vec::new();
    match kind {
        PlotKind::Charfn => {
            for name in ["high_t", "high_t_tail"] {
                let run = field(&v, &[name])?;
                let Some(points) = run
                    .get("check")
                    .and_then(|c| c.get("points"))
                    .and_then(Value::as_array)
                else {
                    continue;
                };
                let rows: Vec<Vec<Cell>> = points
                    .iter()
                    .map(|p| {
                        vec![
                            num(&p["t"]),
                            num(&p["modulus"]),
                            num(&p["bound"]),
                            Cell::B(p["holds"].as_bool().unwrap_or(false)),
                        ]
                    })
                    .collect();
                let f = format!("charfn_{name}_plot.csv");
                dir.write_csv(&f, &["t", "modulus", "bound", "holds"], &rows)?;
                written.push(f);
            }
        }
        PlotKind::Lclt => {
            let rows = v
                .as_array()
                .ok_or_else(|| CliError::Validation("report: expected the lclt row list".into()))?
                .iter()
                .map(|w| {
                    Ok(vec![
                        Cell::U(field(w, &["k"])?.as_u64().unwrap_or(0)),
                        num(field(w, &["iclt", "d_k"])?),
                        num(field(w, &["lclt", "sup"])?),
                    ])
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            dir.write_csv("lclt_plot.csv", &["k", "D_k", "discrepancy"], &rows)?;
            written.push("lclt_plot.csv".into());
        }
        PlotKind::Decimation => {
            let rows = field(&v, &["experiment", "samples"])?
                .as_array()
                .ok_or_else(|| {
                    CliError::Validation("report: experiment.samples is not a list".into())
                })?
                .iter()
                .map(|s| {
                    vec![
                        Cell::U(s["index"].as_u64().unwrap_or(0)),
                        num(&s["sup_modulus"]),
                    ]
                })
                .collect::<Vec<_>>();
            dir.write_csv("decimation_plot.csv", &["sample", "sup_modulus"], &rows)?;
            written.push("decimation_plot.csv".into());
        }
        PlotKind::Mc => {
            let rows = field(&v, &["rows"])?
                .as_array()
                .ok_or_else(|| CliError::Validation("report: rows is not a list".into()))?
                .iter()
                .map(|w| {
                    vec![
                        Cell::I(w["s"].as_i64().unwrap_or(0)),
                        num(&w["p_hat"]),
                        num(&w["radius"]),
                        num(&w["p_exact"]),
                    ]
                })
                .collect::<Vec<_>>();
            dir.write_csv("mc_plot.csv", &["s", "p_hat", "radius", "p_exact"], &rows)?;
            written.push("mc_plot.csv".into());
        }
    }
    Ok(written)
}
