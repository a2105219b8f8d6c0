use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use polyfree_cli::{emit_report, run_experiment, ExperimentConfig, Preset, RawConfig, TaskEntry, DEFAULT_CONFIG};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "polyfree", version, about = "Experiments on sets avoiding polynomial differences")]
struct Cli {
    /// Strict JSON experiment config; the bundled default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for records.jsonl and CSV side files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct TaskArgs {
    /// Coefficients, constant term first, e.g. `0,0,1` for x^2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    poly: Option<Vec<String>>,
    /// Task parameter `key=value`; dotted keys reach nested objects and
    /// values are read as JSON where possible.
    #[arg(short = 'p', long = "param")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Intersectivity verdict.
    Check(TaskArgs),
    /// Auxiliary polynomial table over a range of levels.
    Aux(TaskArgs),
    /// Local sieve data and the normalization J.
    Sieve(TaskArgs),
    /// Sieved Gauss sum sweep.
    Gauss(TaskArgs),
    /// Initial mass of a set.
    Mass(TaskArgs),
    /// Modulus family and level-d audit.
    Leveld(TaskArgs),
    /// One density increment.
    Step(TaskArgs),
    /// The full increment iteration.
    Iterate(TaskArgs),
    /// Exact table of maximal avoiding sets.
    Dmax(TaskArgs),
    /// Greedy sizes and their scaling exponent.
    Greedy(TaskArgs),
    /// Any other task by name.
    Task {
        name: String,
        #[command(flatten)]
        args: TaskArgs,
    },
    /// Every task of the config, in order.
    Run,
    /// Summarize the runs below a directory.
    Report { dir: PathBuf },
}

fn set_path(obj: &mut Map<String, Value>, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            obj.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let child = obj.entry(head.to_string()).or_insert_with(|| Value::Object(Map::new()));
            if !child.is_object() {
                *child = Value::Object(Map::new());
            }
            set_path(child.as_object_mut().unwrap(), rest, value);
        }
    }
}

fn parse_params(items: &[String]) -> Result<Value> {
    let mut obj = Map::new();
    for item in items {
        let Some((k, v)) = item.split_once('=') else { bail!("expected key=value, got {item:?}") };
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        set_path(&mut obj, k, value);
    }
    Ok(Value::Object(obj))
}

fn base_config(cli: &Cli) -> Result<RawConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut raw: RawConfig = serde_json::from_str(&text).context("invalid config")?;
    if let Some(s) = cli.seed {
        raw.seed = s;
    }
    if cli.preset.is_some() {
        raw.preset = cli.preset;
    }
    Ok(raw)
}

fn single_task(cli: &Cli, name: &str, args: &TaskArgs) -> Result<RawConfig> {
    let mut raw = base_config(cli)?;
    if let Some(p) = &args.poly {
        raw.polynomial = p.iter().map(|c| serde_json::from_str(c).unwrap_or(Value::String(c.clone()))).collect();
    }
    raw.tasks = vec![TaskEntry { task: name.to_string(), params: parse_params(&args.params)?, required: true }];
    Ok(raw)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let raw = match &cli.cmd {
        Cmd::Report { dir } => {
            let s = emit_report(dir)?;
            print!("{}", s.markdown);
            return Ok(if s.failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS });
        }
        Cmd::Run => base_config(&cli)?,
        Cmd::Check(a) => single_task(&cli, "check", a)?,
        Cmd::Aux(a) => single_task(&cli, "aux", a)?,
        Cmd::Sieve(a) => single_task(&cli, "sieve", a)?,
        Cmd::Gauss(a) => single_task(&cli, "gauss", a)?,
        Cmd::Mass(a) => single_task(&cli, "mass", a)?,
        Cmd::Leveld(a) => single_task(&cli, "leveld", a)?,
        Cmd::Step(a) => single_task(&cli, "step", a)?,
        Cmd::Iterate(a) => single_task(&cli, "iterate", a)?,
        Cmd::Dmax(a) => single_task(&cli, "dmax", a)?,
        Cmd::Greedy(a) => single_task(&cli, "greedy", a)?,
        Cmd::Task { name, args } => single_task(&cli, name, args)?,
    };
    let cfg = ExperimentConfig::from_raw(raw)?;
    let report = run_experiment(&cfg, cli.out.as_deref())?;
    for r in &report.records {
        println!("{}", serde_json::to_string(r)?);
    }
    Ok(if report.failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}
