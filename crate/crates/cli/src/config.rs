use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use num_bigint::BigInt;
use polyfree::arith::int_from_json;
use polyfree::{IncrementConfig, IntPoly};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::tasks::TaskParams;

/// The configuration shipped with the binary, run by `polyfree run` when
/// no `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest admissible `C` in `|sum| <= C q^exponent`.
    pub gauss_c: f64,
    pub gauss_exponent: f64,
    /// Largest relative error of the sieve main term.
    pub brun_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { gauss_c: 10.0, gauss_exponent: 0.6, brun_rel: 0.05 }
    }
}

/// The free constants of the argument plus numerical tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub epsilon: f64,
    pub c_h: f64,
    #[serde(rename = "C_h")]
    pub big_c_h: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    pub rho: f64,
    #[serde(rename = "X_min")]
    pub x_min: u64,
    /// Replaces `U = exp(sqrt(ln X))` where a task needs a sieve level.
    #[serde(rename = "U")]
    pub u: Option<f64>,
    #[serde(rename = "Z")]
    pub z: Option<f64>,
    pub xi_points: usize,
    pub q_cap: u64,
    pub c_extract: f64,
    pub candidates: usize,
    pub max_steps: usize,
    pub tolerances: Tolerances,
}

impl Default for Constants {
    fn default() -> Self {
        let i = IncrementConfig::default();
        Constants {
            epsilon: i.epsilon,
            c_h: i.c_h,
            big_c_h: i.big_c_h,
            c1: i.c1,
            c2: i.c2,
            c3: i.c3,
            c4: i.c4,
            rho: i.rho,
            x_min: i.x_min,
            u: None,
            z: None,
            xi_points: i.xi_points,
            q_cap: i.q_cap,
            c_extract: i.c_extract,
            candidates: i.candidates,
            max_steps: i.max_steps,
            tolerances: Tolerances::default(),
        }
    }
}

impl Constants {
    pub fn increment(&self) -> IncrementConfig {
        IncrementConfig {
            epsilon: self.epsilon,
            c_h: self.c_h,
            big_c_h: self.big_c_h,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            c4: self.c4,
            x_min: self.x_min,
            rho: self.rho,
            xi_points: self.xi_points,
            q_cap: self.q_cap,
            c_extract: self.c_extract,
            candidates: self.candidates,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Desk-scale defaults.
    Desk,
    /// `rho = 2^(-10k)`; everything else as in `desk`.
    Paper,
}

impl Preset {
    pub fn apply(self, c: &mut Constants, degree: usize) {
        if self == Preset::Paper {
            c.rho = 2f64.powi(-10 * degree as i32);
        }
    }
}

/// One task as written in the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub task: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    /// A failed threshold or error in this task fails the run.
    #[serde(default)]
    pub required: bool,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Coefficients, constant term first; integers or decimal strings.
    pub polynomial: Vec<Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tasks: Vec<TaskEntry>,
}

/// A validated configuration: the polynomial parsed, constants resolved
/// against the preset and every task's parameters type-checked.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub polynomial: IntPoly,
    pub seed: u64,
    pub constants: Constants,
    pub out: Option<PathBuf>,
    pub tasks: Vec<(TaskEntry, TaskParams)>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).context("invalid config")?;
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let coeffs: Vec<BigInt> = raw
            .polynomial
            .iter()
            .map(|v| int_from_json(v).with_context(|| format!("bad coefficient {v}")))
            .collect::<Result<_>>()?;
        let polynomial = IntPoly::new(coeffs);
        if polynomial.degree() < 1 {
            bail!("the polynomial must be nonconstant");
        }
        let mut constants = raw.constants;
        if let Some(p) = raw.preset {
            p.apply(&mut constants, polynomial.degree());
        }
        let tasks = raw
            .tasks
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let p = TaskParams::parse(&t.task, &t.params).with_context(|| format!("task {i} ({})", t.task))?;
                Ok((t, p))
            })
            .collect::<Result<_>>()?;
        Ok(ExperimentConfig { polynomial, seed: raw.seed, constants, out: raw.out, tasks })
    }
}
