//! Experiment harness: strict JSON configs, ordered task execution,
//! JSON-lines records with CSV side files, and report aggregation.

pub mod config;
pub mod report;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{Constants, ExperimentConfig, Preset, RawConfig, TaskEntry, DEFAULT_CONFIG};
pub use report::{emit_report, ReportSummary};
pub use tasks::{run_task, Ctx, TaskOutput, TaskParams, TASK_NAMES};

/// One JSON-lines record. `duration_ms` is the only field allowed to
/// differ between runs of the same config and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub task: String,
    pub params: Value,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(default)]
    pub required: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub csv: Option<String>,
    pub duration_ms: u64,
}

impl Record {
    /// Failed when it errored or missed its threshold.
    pub fn failed(&self) -> bool {
        self.error.is_some() || self.pass == Some(false)
    }

    /// The record without its timing, for determinism comparisons.
    pub fn deterministic(&self) -> Record {
        Record { duration_ms: 0, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub records: Vec<Record>,
    /// Any required task failed.
    pub failed: bool,
    pub dir: Option<PathBuf>,
}

pub const RECORDS_FILE: &str = "records.jsonl";

/// Runs the tasks in order. With an output directory, records go to
/// `records.jsonl` there and each CSV side file to `<index>_<stem>.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunReport> {
    let dir = out.map(Path::to_path_buf).or_else(|| cfg.out.clone());
    let ctx = Ctx::new(cfg.polynomial.clone(), cfg.constants.clone());
    let mut records = Vec::new();
    let mut side_files = Vec::new();
    for (i, (entry, params)) in cfg.tasks.iter().enumerate() {
        let mut params = params.clone();
        params.resolve(cfg.seed.wrapping_add(i as u64));
        let start = Instant::now();
        let outcome = run_task(&params, &ctx);
        let duration_ms = start.elapsed().as_millis() as u64;
        let mut rec = Record {
            task: entry.task.clone(),
            params: params.echo(),
            result: Value::Null,
            pass: None,
            error: None,
            required: entry.required,
            csv: None,
            duration_ms,
        };
        match outcome {
            Ok(o) => {
                rec.result = o.result;
                rec.pass = o.pass;
                if let Some((stem, body)) = o.csv {
                    let name = format!("{i:02}_{stem}.csv");
                    side_files.push((name.clone(), body));
                    rec.csv = Some(name);
                }
            }
            Err(e) => rec.error = Some(format!("{e:#}")),
        }
        records.push(rec);
    }
    if let Some(d) = &dir {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        let mut body = String::new();
        for r in &records {
            body.push_str(&serde_json::to_string(r)?);
            body.push('\n');
        }
        fs::write(d.join(RECORDS_FILE), body)?;
        for (name, text) in side_files {
            fs::write(d.join(name), text)?;
        }
    }
    let failed = records.iter().any(|r| r.required && r.failed());
    Ok(RunReport { records, failed, dir })
}

/// Reads back a `records.jsonl`.
pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).with_context(|| format!("bad record in {}", path.display())))
        .collect()
}
