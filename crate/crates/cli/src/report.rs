use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

use crate::{read_records, Record, RECORDS_FILE};

/// Plot-data files, keyed by the task whose side files feed them.
const PLOTS: &[(&str, &str, &str)] = &[
    ("dmax", "dmax_vs_x.csv", "X,D"),
    ("greedy", "greedy_vs_envelope.csv", "X,size,envelope"),
    ("gauss", "gauss_vs_sqrt_q.csv", "q,magnitude,sqrt_q"),
    ("weight", "weight_decay.csv", "t,magnitude,envelope"),
    ("iterate", "trace_alpha.csv", "m,alpha_m"),
];

#[derive(Clone, Debug)]
pub struct ReportSummary {
    pub runs: usize,
    pub audits: usize,
    pub failed: usize,
    pub markdown: String,
    pub files: Vec<PathBuf>,
}

fn runs_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            runs_under(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == RECORDS_FILE) {
            out.push(dir.to_path_buf());
        }
    }
    Ok(())
}

fn num(v: &Value, path: &[&str]) -> Option<String> {
    let mut cur = v;
    for k in path {
        cur = cur.get(k)?;
    }
    Some(match cur {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    })
}

/// The figure worth quoting for each kind of task.
fn key_figure(r: &Record) -> String {
    if let Some(e) = &r.error {
        return format!("error: {e}");
    }
    let v = &r.result;
    let pick = |label: &str, path: &[&str]| num(v, path).map(|s| format!("{label} {s}"));
    let s = match r.task.as_str() {
        "check" => pick("verdict", &["verdict", "kind"]),
        "aux" => pick("coefficient bound", &["coefficient_bound"]),
        "inheritance" => v["failures"].as_array().map(|f| format!("{} failing pairs", f.len())),
        "sieve" => pick("J", &["J"]),
        "brun" => pick("relative error", &["rel_error"]),
        "gauss" => pick("fitted C", &["fit", "fitted_c"]),
        "weight" => pick("fitted C", &["audit", "fitted_c"]),
        "spectrum" => pick("max nonzero", &["max_nonzero"]),
        "mass" => pick("total", &["total"]),
        "leveld" => pick("verdict", &["report", "verdict"]),
        "step" => match (num(v, &["outcome", "option"]), num(v, &["outcome", "new_alpha"])) {
            (Some(o), Some(a)) => Some(format!("option {o}, new alpha {a}")),
            _ => None,
        },
        "iterate" => v["rows"].as_array().map(|rows| format!("{} rows, stop {}", rows.len(), v["stop"])),
        "dmax" => pick("D", &["d"]),
        "greedy" => pick("exponent", &["exponent"]),
        "f_eval" => pick("F", &["F"]),
        _ => None,
    };
    s.unwrap_or_default()
}

/// Aggregates every run below `dir` into `summary.md` and the plot-data
/// CSVs, all written to `dir`. Timings are left out so that identical runs
/// give identical summaries.
pub fn emit_report(dir: &Path) -> Result<ReportSummary> {
    let mut runs = Vec::new();
    runs_under(dir, &mut runs).with_context(|| format!("scanning {}", dir.display()))?;
    if runs.is_empty() {
        bail!("no {RECORDS_FILE} under {}", dir.display());
    }
    let mut md = String::from("# Experiment summary\n");
    let mut plots: Vec<String> = PLOTS.iter().map(|(_, _, h)| format!("run,{h}\n")).collect();
    let (mut audits, mut failed) = (0, 0);
    for (ri, run) in runs.iter().enumerate() {
        let label = run.strip_prefix(dir).unwrap_or(run).display().to_string();
        let label = if label.is_empty() { ".".to_string() } else { label };
        let records = read_records(&run.join(RECORDS_FILE))?;
        md.push_str(&format!("\n## Run {ri}: {label}\n\n"));
        let run_audits: Vec<&Record> = records.iter().filter(|r| r.pass.is_some() || r.error.is_some()).collect();
        if run_audits.is_empty() {
            md.push_str("no audits\n");
        } else {
            md.push_str("| # | task | status | figure |\n|---|---|---|---|\n");
            for (i, r) in records.iter().enumerate() {
                if r.pass.is_none() && r.error.is_none() {
                    continue;
                }
                let status = if r.failed() { "FAIL" } else { "pass" };
                let req = if r.required { " (required)" } else { "" };
                md.push_str(&format!("| {i} | {} | {status}{req} | {} |\n", r.task, key_figure(r)));
            }
        }
        audits += run_audits.len();
        failed += run_audits.iter().filter(|r| r.failed()).count();
        let others: Vec<String> = records
            .iter()
            .filter(|r| r.pass.is_none() && r.error.is_none())
            .map(|r| format!("- {}: {}\n", r.task, key_figure(r)))
            .collect();
        if !others.is_empty() {
            md.push_str("\nOther tasks:\n\n");
            others.iter().for_each(|l| md.push_str(l));
        }
        for r in &records {
            let (Some(csv), Some(k)) = (&r.csv, PLOTS.iter().position(|(t, _, _)| *t == r.task)) else {
                continue;
            };
            let text = fs::read_to_string(run.join(csv)).with_context(|| format!("reading {csv}"))?;
            let mut lines = text.lines().filter(|l| !l.starts_with('#')).skip(1);
            if r.task == "iterate" {
                for l in lines.by_ref() {
                    let f: Vec<&str> = l.split(',').collect();
                    plots[k].push_str(&format!("{ri},{},{}\n", f[0], f[2]));
                }
            } else {
                for l in lines {
                    plots[k].push_str(&format!("{ri},{l}\n"));
                }
            }
        }
    }
    md.push_str(&format!("\n{audits} audits, {failed} failed\n"));
    let mut files = vec![dir.join("summary.md")];
    fs::write(&files[0], &md)?;
    for ((_, name, _), body) in PLOTS.iter().zip(&plots) {
        if body.lines().count() > 1 {
            let p = dir.join(name);
            fs::write(&p, body)?;
            files.push(p);
        }
    }
    Ok(ReportSummary { runs: runs.len(), audits, failed, markdown: md, files })
}
