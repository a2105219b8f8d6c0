//! The named operations a config can invoke, with typed parameters.

use std::sync::OnceLock;

use anyhow::{anyhow, bail, Result};
use polyfree::harmonic::{gauss_envelope_fit, gauss_sum_with_table, mass_terms, weight_fourier_audit, ArcParams};
use polyfree::increment::{f_eval, f_eval_ln, increment_step, iterate};
use polyfree::intersective::{coefficient_bound, inheritance_check, intersectivity_verdict};
use polyfree::leveld::{indicator, level_d_audit, LevelDVerdict};
use polyfree::search::{exact_table, fit_exponent, forbidden_values, greedy_avoiding, verify_avoiding};
use polyfree::{
    AuxBuilder, AvoidingSet, FamilyKind, ForbiddenMode, IntPoly, ModulusFamily, SieveTable, SmoothWeight, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Constants;

/// How a task obtains its set `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    /// Left-to-right greedy set avoiding the differences `h(n)`, `n >= 1`.
    Greedy { x: usize },
    /// Each `n` kept with probability `density`. Without a seed, the run
    /// seed plus the task index is used and echoed back.
    Random { x: usize, density: f64, seed: Option<u64> },
    Residue { x: usize, modulus: usize, residue: usize },
    Explicit { x: usize, members: Vec<usize> },
}

impl SetSpec {
    fn resolve_seed(&mut self, seed: u64) {
        if let SetSpec::Random { seed: s @ None, .. } = self {
            *s = Some(seed);
        }
    }

    fn build(&self, ctx: &Ctx) -> Result<AvoidingSet> {
        Ok(match self {
            SetSpec::Greedy { x } => greedy_avoiding(&ctx.forbidden(*x as u64)?, *x),
            SetSpec::Random { x, density, seed } => {
                if !(0.0..=1.0).contains(density) {
                    bail!("density {density} outside [0, 1]");
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.expect("seed resolved at parse"));
                AvoidingSet::from_members(*x, (1..=*x).filter(|_| rng.gen_bool(*density)))?
            }
            SetSpec::Residue { x, modulus, residue } => {
                if *modulus == 0 {
                    bail!("modulus must be positive");
                }
                AvoidingSet::from_members(*x, (1..=*x).filter(|n| n % modulus == residue % modulus))?
            }
            SetSpec::Explicit { x, members } => AvoidingSet::from_members(*x, members.iter().copied())?,
        })
    }
}

macro_rules! params {
    ($name:ident { $($field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name { $(pub $field: $ty),* }
        impl Default for $name {
            fn default() -> Self { $name { $($field: $default),* } }
        }
    };
}

params!(CheckParams { prime_bound: u64 = 200, depth_bound: u32 = 8 });
params!(AuxParams { ell_max: u64 = 30 });
params!(InheritanceParams { pairs: usize = 100, ell_max: u64 = 30, q_max: u64 = 30, samples: usize = 50, seed: Option<u64> = None });
params!(SieveParams { ell: u64 = 1, u: Option<f64> = None });
params!(BrunParams { ell: u64 = 1, u: Option<f64> = None, q: u64 = 1, b: u64 = 0, t: u64 = 100 });
params!(GaussParams { ell: u64 = 1, u: Option<f64> = None, q_max: u64 = 200, a: i64 = 1, exponent: Option<f64> = None });
params!(WeightParams { depth: usize = 24, resolution: usize = 1 << 16, t_max: f64 = 400.0, samples: usize = 401 });
params!(FEvalParams { x: Option<f64> = None, ln_x: Option<f64> = None, epsilon: Option<f64> = None });
params!(DmaxParams { x: usize = 100 });
params!(GreedyParams { xs: Vec<usize> = vec![1000, 10_000, 100_000], expected: Option<(f64, f64)> = None });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetParams {
    pub set: SetSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub set: SetSpec,
    pub n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassParams {
    pub set: SetSpec,
    #[serde(default)]
    pub xi: f64,
    #[serde(default = "default_top")]
    pub top: usize,
}

fn default_top() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Custom { members: Vec<u64> },
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDParams {
    pub set: SetSpec,
    pub family: FamilySpec,
    #[serde(default = "default_d")]
    pub d: usize,
}

fn default_d() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    pub set: SetSpec,
    #[serde(default = "default_ell")]
    pub ell: u64,
}

fn default_ell() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskParams {
    Check(CheckParams),
    Aux(AuxParams),
    Inheritance(InheritanceParams),
    Sieve(SieveParams),
    Brun(BrunParams),
    Gauss(GaussParams),
    Weight(WeightParams),
    Spectrum(SpectrumParams),
    Mass(MassParams),
    Leveld(LevelDParams),
    Step(StepParams),
    Iterate(SetParams),
    Dmax(DmaxParams),
    Greedy(GreedyParams),
    FEval(FEvalParams),
}

pub const TASK_NAMES: &[&str] = &[
    "check",
    "aux",
    "inheritance",
    "sieve",
    "brun",
    "gauss",
    "weight",
    "spectrum",
    "mass",
    "leveld",
    "step",
    "iterate",
    "dmax",
    "greedy",
    "f_eval",
];

fn typed<T: DeserializeOwned>(v: &Value) -> Result<T> {
    Ok(serde_json::from_value(v.clone())?)
}

impl TaskParams {
    pub fn parse(task: &str, params: &Value) -> Result<Self> {
        Ok(match task {
            "check" => TaskParams::Check(typed(params)?),
            "aux" => TaskParams::Aux(typed(params)?),
            "inheritance" => TaskParams::Inheritance(typed(params)?),
            "sieve" => TaskParams::Sieve(typed(params)?),
            "brun" => TaskParams::Brun(typed(params)?),
            "gauss" => TaskParams::Gauss(typed(params)?),
            "weight" => TaskParams::Weight(typed(params)?),
            "spectrum" => TaskParams::Spectrum(typed(params)?),
            "mass" => TaskParams::Mass(typed(params)?),
            "leveld" => TaskParams::Leveld(typed(params)?),
            "step" => TaskParams::Step(typed(params)?),
            "iterate" => TaskParams::Iterate(typed(params)?),
            "dmax" => TaskParams::Dmax(typed(params)?),
            "greedy" => TaskParams::Greedy(typed(params)?),
            "f_eval" => TaskParams::FEval(typed(params)?),
            other => bail!("unknown task {other:?}; expected one of {}", TASK_NAMES.join(", ")),
        })
    }

    /// Fills in every seed left to the run so the echo reproduces the task.
    pub fn resolve(&mut self, seed: u64) {
        match self {
            TaskParams::Inheritance(p) => {
                p.seed.get_or_insert(seed);
            }
            TaskParams::Spectrum(SpectrumParams { set, .. })
            | TaskParams::Mass(MassParams { set, .. })
            | TaskParams::Leveld(LevelDParams { set, .. })
            | TaskParams::Step(StepParams { set, .. })
            | TaskParams::Iterate(SetParams { set }) => set.resolve_seed(seed),
            _ => {}
        }
    }

    pub fn echo(&self) -> Value {
        let v = match self {
            TaskParams::Check(p) => serde_json::to_value(p),
            TaskParams::Aux(p) => serde_json::to_value(p),
            TaskParams::Inheritance(p) => serde_json::to_value(p),
            TaskParams::Sieve(p) => serde_json::to_value(p),
            TaskParams::Brun(p) => serde_json::to_value(p),
            TaskParams::Gauss(p) => serde_json::to_value(p),
            TaskParams::Weight(p) => serde_json::to_value(p),
            TaskParams::Spectrum(p) => serde_json::to_value(p),
            TaskParams::Mass(p) => serde_json::to_value(p),
            TaskParams::Leveld(p) => serde_json::to_value(p),
            TaskParams::Step(p) => serde_json::to_value(p),
            TaskParams::Iterate(p) => serde_json::to_value(p),
            TaskParams::Dmax(p) => serde_json::to_value(p),
            TaskParams::Greedy(p) => serde_json::to_value(p),
            TaskParams::FEval(p) => serde_json::to_value(p),
        };
        v.expect("parameters serialize")
    }
}

/// What a task produced.
#[derive(Debug, Default)]
pub struct TaskOutput {
    pub result: Value,
    /// For audits: whether the threshold was met.
    pub pass: Option<bool>,
    /// `(file stem, contents)` of a CSV side file.
    pub csv: Option<(String, String)>,
}

/// Shared state for one run: the polynomial, its tower builder and the
/// intersectivity verdict, computed on first use.
pub struct Ctx {
    pub poly: IntPoly,
    pub constants: Constants,
    builder: OnceLock<std::result::Result<AuxBuilder, String>>,
    verdict: OnceLock<std::result::Result<Verdict, String>>,
}

impl Ctx {
    pub fn new(poly: IntPoly, constants: Constants) -> Self {
        Ctx { poly, constants, builder: OnceLock::new(), verdict: OnceLock::new() }
    }

    pub fn verdict(&self) -> Result<&Verdict> {
        self.verdict
            .get_or_init(|| intersectivity_verdict(&self.poly, 200, 8).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| anyhow!("no intersectivity verdict: {e}"))
    }

    /// The tower builder; refuses polynomials certified not intersective.
    pub fn builder(&self) -> Result<&AuxBuilder> {
        if let Verdict::NotIntersective { p, e } = self.verdict()? {
            bail!("{} has no root modulo {p}^{e}; the tower does not exist", self.poly);
        }
        self.builder
            .get_or_init(|| AuxBuilder::new(self.poly.clone()).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| anyhow!("{e}"))
    }

    pub fn forbidden(&self, x: u64) -> Result<Vec<u64>> {
        let ctx = polyfree::AuxiliaryContext::identity(self.poly.clone());
        Ok(forbidden_values(&ctx, x, ForbiddenMode::All)?)
    }
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

use polyfree::arith::fmt17;

/// The sieve level: the task's own `U`, else the constants block, else the
/// task default.
fn level(task: Option<f64>, k: &Constants, default: f64) -> f64 {
    task.or(k.u).unwrap_or(default)
}

pub fn run_task(params: &TaskParams, ctx: &Ctx) -> Result<TaskOutput> {
    let k = &ctx.constants;
    match params {
        TaskParams::Check(p) => {
            let verdict = intersectivity_verdict(&ctx.poly, p.prime_bound, p.depth_bound)?;
            let normalized = ctx.poly.normalize_positive().ok();
            Ok(TaskOutput {
                result: json!({
                    "polynomial": ctx.poly,
                    "verdict": verdict,
                    "normalized": normalized.as_ref().map(|(g, c)| json!({"poly": g, "shift": c.to_string()})),
                }),
                ..Default::default()
            })
        }
        TaskParams::Aux(p) => {
            let b = ctx.builder()?;
            let bound = coefficient_bound(&ctx.poly)?;
            let deg = ctx.poly.degree() as u32;
            let mut rows = Vec::new();
            let mut csv = Vec::new();
            let mut all_ok = true;
            for ell in 1..=p.ell_max {
                let c = b.context(ell)?;
                let inv = c.check_invariants().is_ok();
                let cap = &bound * num_bigint::BigInt::from(ell).pow(deg - 1);
                let within = c.aux.coeffs().iter().all(|a| num_traits::Signed::abs(a) <= cap);
                all_ok &= inv && within;
                csv.push(format!(
                    "{ell},{},{},\"{}\"",
                    c.lambda_ell,
                    c.r_ell,
                    c.aux.coeffs().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
                ));
                let mut j = c.to_json();
                j["invariants_ok"] = json!(inv);
                j["within_coefficient_bound"] = json!(within);
                rows.push(j);
            }
            Ok(TaskOutput {
                result: json!({"coefficient_bound": bound.to_string(), "levels": rows}),
                pass: Some(all_ok),
                csv: Some(("aux".into(), csv_rows("ell,lambda,r_ell,coefficients", csv))),
            })
        }
        TaskParams::Inheritance(p) => {
            let b = ctx.builder()?;
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed.expect("seed resolved at parse"));
            let mut failures = Vec::new();
            for _ in 0..p.pairs {
                let ell = rng.gen_range(1..=p.ell_max);
                let q = rng.gen_range(1..=p.q_max);
                let r = inheritance_check(b, ell, q, p.samples)?;
                if !r.ok() {
                    failures.push(r);
                }
            }
            Ok(TaskOutput {
                result: json!({"pairs": p.pairs, "failures": failures}),
                pass: Some(failures.is_empty()),
                csv: None,
            })
        }
        TaskParams::Sieve(p) => {
            let c = ctx.builder()?.context(p.ell)?;
            let t = SieveTable::new(&c, level(p.u, k, 10.0))?;
            let mut j = t.to_json();
            j["J"] = json!(t.j_factor(None).to_string());
            j["J_f64"] = json!(t.j_factor_f64());
            Ok(TaskOutput { result: j, ..Default::default() })
        }
        TaskParams::Brun(p) => {
            let c = ctx.builder()?.context(p.ell)?;
            let t = SieveTable::new(&c, level(p.u, k, 2.0))?;
            let r = t.brun_sum_audit(p.q, p.b, p.t)?;
            let pass = !r.main_term_applicable() || r.rel_error <= k.tolerances.brun_rel;
            Ok(TaskOutput { result: serde_json::to_value(&r)?, pass: Some(pass), csv: None })
        }
        TaskParams::Gauss(p) => {
            let c = ctx.builder()?.context(p.ell)?;
            let t = SieveTable::new(&c, level(p.u, k, 200.0))?;
            let mut rows = Vec::new();
            for q in 2..=p.q_max {
                if polyfree::arith::gcd_u64(p.a.unsigned_abs(), q) != 1 {
                    continue;
                }
                let s = gauss_sum_with_table(&t, p.a, q)?;
                rows.push((q, s.norm()));
            }
            let exponent = p.exponent.unwrap_or(k.tolerances.gauss_exponent);
            let fit = gauss_envelope_fit(&t, p.q_max, exponent);
            let csv = csv_rows(
                "q,magnitude,sqrt_q",
                rows.iter().map(|(q, m)| format!("{q},{},{}", fmt17(*m), fmt17((*q as f64).sqrt()))),
            );
            Ok(TaskOutput {
                result: json!({
                    "a": p.a,
                    "rows": rows.iter().map(|(q, m)| json!({"q": q, "magnitude": m, "sqrt_q": (*q as f64).sqrt()})).collect::<Vec<_>>(),
                    "fit": fit,
                }),
                pass: Some(fit.fitted_c <= k.tolerances.gauss_c),
                csv: Some(("gauss".into(), csv)),
            })
        }
        TaskParams::Weight(p) => {
            let w = SmoothWeight::build(p.depth, p.resolution)?;
            let audit = weight_fourier_audit(&w, p.t_max)?;
            let n = p.samples.max(2);
            let csv = csv_rows(
                "t,magnitude,envelope",
                (0..n).map(|i| {
                    let t = p.t_max * i as f64 / (n - 1) as f64;
                    let env = audit.fitted_c * (-(t / 2.0).sqrt()).exp();
                    format!("{},{},{}", fmt17(t), fmt17(w.fourier(t).norm()), fmt17(env))
                }),
            );
            let pass = w.invariants_hold() && audit.violations == 0;
            Ok(TaskOutput {
                result: json!({"invariants_hold": w.invariants_hold(), "audit": audit}),
                pass: Some(pass),
                csv: Some(("weight".into(), csv)),
            })
        }
        TaskParams::Spectrum(p) => {
            let a = p.set.build(ctx)?;
            let n = p.n.unwrap_or(2 * a.x() + 1);
            let s = polyfree::harmonic::fourier_grid(&a, n)?;
            let peak = s.values.iter().skip(1).map(|v| v.norm()).fold(0.0, f64::max);
            Ok(TaskOutput {
                result: json!({"n": n, "size": a.len(), "zero": s.values[0].re, "max_nonzero": peak}),
                pass: None,
                csv: Some(("spectrum".into(), s.to_csv())),
            })
        }
        TaskParams::Mass(p) => {
            let a = p.set.build(ctx)?;
            if a.is_empty() {
                bail!("the set is empty");
            }
            let params = ArcParams::new(a.density(), k.epsilon, k.c1, a.x() as f64)?.capped(k.q_cap);
            let mut terms = mass_terms(&a, p.xi, &params)?;
            let total: f64 = terms.iter().map(|t| t.contribution).sum();
            terms.sort_by(|u, v| v.contribution.total_cmp(&u.contribution).then(u.q.cmp(&v.q)));
            terms.truncate(p.top);
            Ok(TaskOutput {
                result: json!({"alpha": a.density(), "arcs": params, "total": total, "top": terms}),
                ..Default::default()
            })
        }
        TaskParams::Leveld(p) => {
            let a = p.set.build(ctx)?;
            let alpha = a.density();
            let family = match &p.family {
                FamilySpec::Custom { members } => ModulusFamily::custom(members)?,
                FamilySpec::First => ModulusFamily::build(FamilyKind::First { c1: k.c1 }, alpha, k.epsilon)?,
                FamilySpec::Second => {
                    ModulusFamily::build(FamilyKind::Second { c2: k.c2, c3: k.c3 }, alpha, k.epsilon)?
                }
            };
            let mut r = level_d_audit(&indicator(&a), &family, p.d, alpha)?;
            r.terms.truncate(32);
            Ok(TaskOutput {
                pass: Some(r.verdict != LevelDVerdict::Counterexample),
                result: json!({"family": family.json(), "report": r}),
                csv: None,
            })
        }
        TaskParams::Step(p) => {
            let a = p.set.build(ctx)?;
            let b = ctx.builder()?;
            let out = increment_step(&a, b, p.ell, &k.increment())?;
            let verification = match (&out.rescaled, &out.new_context) {
                (Some(r), Some(c)) => Some(verify_avoiding(r, &forbidden_values(c, r.x() as u64, ForbiddenMode::All)?)),
                _ => None,
            };
            let pass = out.option.accepted() && verification.as_ref().is_some_and(|v| v.ok);
            Ok(TaskOutput {
                result: json!({
                    "outcome": out,
                    "new_aux": out.new_context.as_ref().map(|c| c.to_json()),
                    "verification": verification,
                }),
                pass: Some(pass),
                csv: None,
            })
        }
        TaskParams::Iterate(p) => {
            let a = p.set.build(ctx)?;
            let t = iterate(&a, ctx.builder()?, &k.increment())?;
            Ok(TaskOutput {
                pass: Some(t.check_invariants()),
                csv: Some(("trace".into(), t.to_csv())),
                result: json!({"stop": t.stop, "rows": t.rows, "invariants_hold": t.check_invariants()}),
            })
        }
        TaskParams::Dmax(p) => {
            let rows = exact_table(&ctx.forbidden(p.x as u64)?, p.x)?;
            let unit_steps = rows.windows(2).all(|w| w[1].d == w[0].d || w[1].d == w[0].d + 1);
            let csv = csv_rows("X,D", rows.iter().map(|r| format!("{},{}", r.x, r.d)));
            Ok(TaskOutput {
                result: json!({"x": p.x, "d": rows.last().map_or(0, |r| r.d), "unit_steps": unit_steps, "rows": rows}),
                pass: Some(unit_steps),
                csv: Some(("dmax".into(), csv)),
            })
        }
        TaskParams::Greedy(p) => {
            let deg = ctx.poly.degree() as f64;
            let mut pts = Vec::new();
            for &x in &p.xs {
                pts.push((x as f64, greedy_avoiding(&ctx.forbidden(x as u64)?, x).len() as f64));
            }
            let exponent = if pts.len() >= 2 { Some(fit_exponent(&pts)) } else { None };
            let pass = match (p.expected, exponent) {
                (Some((lo, hi)), Some(e)) => Some((lo..=hi).contains(&e)),
                _ => None,
            };
            let csv = csv_rows(
                "X,size,envelope",
                pts.iter().map(|(x, s)| format!("{x},{s},{}", fmt17(x.powf(1.0 - 1.0 / deg)))),
            );
            Ok(TaskOutput {
                result: json!({
                    "sizes": pts.iter().map(|(x, s)| json!({"X": *x as u64, "size": *s as u64})).collect::<Vec<_>>(),
                    "exponent": exponent,
                }),
                pass,
                csv: Some(("greedy".into(), csv)),
            })
        }
        TaskParams::FEval(p) => {
            let eps = p.epsilon.unwrap_or(k.epsilon);
            let v = match (p.x, p.ln_x) {
                (Some(x), None) => f_eval(x, eps)?,
                (None, Some(l)) => f_eval_ln(l, eps)?,
                _ => bail!("give exactly one of x and ln_x"),
            };
            Ok(TaskOutput { result: json!({"F": v, "epsilon": eps}), ..Default::default() })
        }
    }
}
