//! Density increments on progressions with common difference `lambda(q)`,
//! and the iteration that passes to `h_{q l}` after each step.

use std::fmt;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arith::fmt17;
use crate::error::{Error, Result};
use crate::harmonic::{mass_terms, ArcParams};
use crate::intersective::{AuxBuilder, AuxiliaryContext};
use crate::search::AvoidingSet;

/// Constants of the increment scheme. The defaults are the documented
/// desk-scale choices; none of them is determined by the theory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncrementConfig {
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
    #[serde(rename = "X_min")]
    pub x_min: u64,
    pub rho: f64,
    /// Shifts `xi` sampled in `[-tau, tau]`.
    pub xi_points: usize,
    /// Denominators beyond this are not scanned.
    pub q_cap: u64,
    /// `c` in the block length `ceil(c eta X / (lambda(q) T))`.
    pub c_extract: f64,
    /// Mass candidates tried before the fallback list.
    pub candidates: usize,
    pub max_steps: usize,
}

impl Default for IncrementConfig {
    fn default() -> Self {
        IncrementConfig {
            epsilon: 1.0,
            c_h: 0.01,
            big_c_h: 20.0,
            c1: 10.0,
            c2: 100.0,
            c3: 100.0,
            c4: 100.0,
            x_min: 16,
            rho: 0.5,
            xi_points: 33,
            q_cap: 200,
            c_extract: 1.0,
            candidates: 16,
            max_steps: 64,
        }
    }
}

impl IncrementConfig {
    /// The same constants with `rho = 2^(-10k)`.
    pub fn with_paper_rho(mut self, k: u32) -> Self {
        self.rho = 2f64.powi(-10 * k as i32);
        self
    }
}

/// `F(X) = (ln X)^d / sqrt(ln(3 + ln X))` with `d = 1/((2+eps)(1+eps)+2)`.
pub fn f_eval(x: f64, epsilon: f64) -> Result<f64> {
    if !(x > 1.0) {
        return Err(Error::InvalidInput(format!("need X > 1, got {x}")));
    }
    f_eval_ln(x.ln(), epsilon)
}

/// [`f_eval`] taking `ln X`, for scales beyond the double range.
pub fn f_eval_ln(ln_x: f64, epsilon: f64) -> Result<f64> {
    if !(ln_x > 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("need ln X > 0 and eps > 0, got {ln_x}, {epsilon}")));
    }
    Ok(ln_x.powf(d_epsilon(epsilon)) / (3.0 + ln_x).ln().sqrt())
}

pub fn d_epsilon(epsilon: f64) -> f64 {
    1.0 / ((2.0 + epsilon) * (1.0 + epsilon) + 2.0)
}

/// `{start + i step : 0 <= i < length}`, with `step = lambda(q)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Progression {
    pub start: u64,
    pub step: u64,
    pub length: u64,
    pub q: u64,
}

impl Progression {
    pub fn last(&self) -> u64 {
        self.start + (self.length - 1) * self.step
    }

    pub fn elements(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.length).map(move |i| self.start + i * self.step)
    }

    pub fn count_in(&self, a: &AvoidingSet) -> u64 {
        self.elements().filter(|&n| a.contains(n as usize)).count() as u64
    }

    /// `A'` with `y` in `A'` iff `start + (y-1) step` is in `A`.
    pub fn rescale(&self, a: &AvoidingSet) -> AvoidingSet {
        let members = self.elements().enumerate().filter(|(_, n)| a.contains(*n as usize)).map(|(i, _)| i + 1);
        AvoidingSet::from_members(self.length as usize, members).expect("offsets lie in [length]")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extraction {
    pub progression: Progression,
    pub count: u64,
    pub density: f64,
    /// `(1 + eta/20) alpha`.
    pub target: f64,
    pub meets: bool,
}

/// Tiles each class mod `lambda(q)` by blocks of `ceil(c eta X / (lambda T))`
/// consecutive terms, `T = max(1, |xi| X)`. Returns the first block whose
/// density reaches `(1 + eta/20) alpha`, or else the densest block with
/// `meets` false.
pub fn extract_increment(a: &AvoidingSet, q: u64, xi: f64, eta: f64, lambda_q: u64, c: f64) -> Result<Extraction> {
    let x = a.x() as u64;
    if !(eta > 0.0) || lambda_q == 0 || x == 0 {
        return Err(Error::InvalidInput(format!("need eta > 0 and lambda > 0, got {eta}, {lambda_q}")));
    }
    let t = (xi.abs() * x as f64).max(1.0);
    let len = (c * eta * x as f64 / (lambda_q as f64 * t)).ceil().max(1.0) as u64;
    if (len - 1).saturating_mul(lambda_q) >= x {
        return Err(Error::Limit(format!("no block of {len} terms with step {lambda_q} fits in [{x}]")));
    }
    let alpha = a.density();
    let target = (1.0 + eta / 20.0) * alpha;
    let mut best: Option<(u64, Progression)> = None;
    for r in 1..=lambda_q.min(x) {
        let terms = (x - r) / lambda_q + 1;
        for b in 0..terms / len {
            let p = Progression { start: r + b * len * lambda_q, step: lambda_q, length: len, q };
            let count = p.count_in(a);
            let density = count as f64 / len as f64;
            if density >= target {
                return Ok(Extraction { progression: p, count, density, target, meets: true });
            }
            if best.as_ref().is_none_or(|(bc, _)| count > *bc) {
                best = Some((count, p));
            }
        }
    }
    let (count, p) = best.expect("at least one block fits");
    Ok(Extraction { density: count as f64 / p.length as f64, progression: p, count, target, meets: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOption {
    Star,
    Opt1,
    Opt2,
    Opt3,
    None,
}

impl fmt::Display for StepOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StepOption::Star => "star",
            StepOption::Opt1 => "opt1",
            StepOption::Opt2 => "opt2",
            StepOption::Opt3 => "opt3",
            StepOption::None => "none",
        };
        f.write_str(s)
    }
}

impl StepOption {
    pub fn accepted(&self) -> bool {
        matches!(self, StepOption::Star | StepOption::Opt2 | StepOption::Opt3)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepOutcome {
    pub option: StepOption,
    /// Every envelope the progression satisfies.
    pub envelopes: Vec<StepOption>,
    pub progression: Option<Progression>,
    pub old_alpha: f64,
    pub new_alpha: f64,
    /// `floor(log2(new/old))`, when the second option's envelope applies.
    pub j: Option<u32>,
    pub xi: f64,
    pub eta: f64,
    /// `l' = q l`.
    pub new_ell: u64,
    #[serde(skip)]
    pub new_context: Option<AuxiliaryContext>,
    #[serde(skip)]
    pub rescaled: Option<AvoidingSet>,
    pub note: String,
}

impl StepOutcome {
    fn without_progression(option: StepOption, alpha: f64, ell: u64, note: String) -> Self {
        StepOutcome {
            option,
            envelopes: vec![],
            progression: None,
            old_alpha: alpha,
            new_alpha: alpha,
            j: None,
            xi: 0.0,
            eta: 0.0,
            new_ell: ell,
            new_context: None,
            rescaled: None,
            note,
        }
    }
}

/// `sum_{a mod q} |f_A^(a/q + xi)|^2` for the balanced function
/// `f_A = 1_A - alpha 1_[X]`.
fn balanced_energy(a: &AvoidingSet, q: u64, xi: f64) -> f64 {
    let alpha = a.density();
    let mut c = vec![Complex64::new(0.0, 0.0); q as usize];
    for n in 1..=a.x() {
        let v = if a.contains(n) { 1.0 - alpha } else { -alpha };
        c[n % q as usize] += crate::harmonic::e(-(n as f64) * xi) * v;
    }
    rustfft::FftPlanner::new().plan_fft_forward(q as usize).process(&mut c);
    c.iter().map(|v| v.norm_sqr()).sum()
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    q: u64,
    xi_index: usize,
    xi: f64,
    value: f64,
}

/// Envelopes met by a step from density `alpha` on `[X]` to density
/// `new_alpha` on `length` terms, with the `j` of the second option.
pub fn envelopes(alpha: f64, new_alpha: f64, x: f64, length: f64, cfg: &IncrementConfig) -> (Vec<StepOption>, Option<u32>) {
    let l = (1.0 / alpha).ln();
    let s = 2.0 + cfg.epsilon;
    let mut out = Vec::new();
    if length >= alpha.powf(cfg.big_c_h) * x && new_alpha >= alpha + alpha.powf(cfg.big_c_h) {
        out.push(StepOption::Star);
    }
    let mut j = None;
    if alpha <= cfg.c_h {
        let ratio = new_alpha / alpha;
        if ratio >= 2.0 {
            let jj = ratio.log2().floor() as u32;
            let need = x * (-cfg.big_c_h * jj as f64 * l.powf(3.0 + cfg.epsilon) * l.ln().powi(2)).exp();
            if length >= need {
                out.push(StepOption::Opt2);
                j = Some(jj);
            }
        }
        if length >= x * l.powf(-cfg.big_c_h) && new_alpha >= alpha * (1.0 + cfg.c_h * l.powf(-s * (1.0 + cfg.epsilon))) {
            out.push(StepOption::Opt3);
        }
    }
    (out, j)
}

/// One density increment for `A`, which avoids the differences of
/// `h_ell`. Candidates `(q, xi)` come from the initial-mass terms, ranked
/// by mass, then `q`, then `xi`; `q = 1` and small `q` at `xi = 0` follow
/// as fallbacks. The first candidate whose block extraction reaches the
/// target is labelled by the envelopes it meets.
pub fn increment_step(a: &AvoidingSet, builder: &AuxBuilder, ell: u64, cfg: &IncrementConfig) -> Result<StepOutcome> {
    if a.is_empty() {
        return Err(Error::InvalidInput("the set is empty".into()));
    }
    let x = a.x() as u64;
    if x < cfg.x_min {
        return Err(Error::InvalidInput(format!("X = {x} below X_min = {}", cfg.x_min)));
    }
    let alpha = a.density();
    let f = f_eval(x as f64, cfg.epsilon)?;
    if alpha <= cfg.c_h && alpha <= (-cfg.c_h * f).exp() {
        return Ok(StepOutcome::without_progression(
            StepOption::Opt1,
            alpha,
            ell,
            format!("alpha = {alpha} <= exp(-c_h F(X)) = {}", (-cfg.c_h * f).exp()),
        ));
    }

    let mut ranked: Vec<Candidate> = Vec::new();
    if alpha < 1.0 {
        let params = ArcParams::new(alpha, cfg.epsilon, cfg.c1, x as f64)?.capped(cfg.q_cap.min(x / 3).max(2));
        let n = cfg.xi_points.max(1);
        let xis: Vec<f64> =
            (0..n).map(|i| if n == 1 { 0.0 } else { -params.tau + 2.0 * params.tau * i as f64 / (n - 1) as f64 }).collect();
        let per_xi: Vec<Vec<Candidate>> = xis
            .par_iter()
            .enumerate()
            .map(|(xi_index, &xi)| {
                mass_terms(a, xi, &params)
                    .map(|ts| {
                        ts.into_iter().map(|t| Candidate { q: t.q, xi_index, xi, value: t.contribution }).collect()
                    })
                    .unwrap_or_default()
            })
            .collect();
        ranked = per_xi.into_iter().flatten().filter(|c| 3 * c.q <= x).collect();
        ranked.sort_by(|u, v| v.value.total_cmp(&u.value).then(u.q.cmp(&v.q)).then(u.xi_index.cmp(&v.xi_index)));
        let mut seen = std::collections::BTreeSet::new();
        ranked.retain(|c| seen.insert(c.q));
        ranked.truncate(cfg.candidates);
    }
    let mut fallback: Vec<Candidate> = (1..=cfg.q_cap.min(12))
        .filter(|&q| 3 * q <= x && !ranked.iter().any(|c| c.q == q && c.xi == 0.0))
        .map(|q| Candidate { q, xi_index: usize::MAX, xi: 0.0, value: 0.0 })
        .collect();
    fallback.sort_by_key(|c| c.q != 1);
    ranked.extend(fallback);

    let xf = x as f64;
    let mut tried = Vec::new();
    for cand in ranked {
        let lambda = match builder.lambda_of(cand.q)?.to_u64() {
            Some(l) if l < x => l,
            _ => continue,
        };
        let eta = (balanced_energy(a, cand.q, cand.xi) / (alpha * alpha * xf * xf)).min(0.99);
        if !(eta > 0.0) {
            continue;
        }
        let ext = match extract_increment(a, cand.q, cand.xi, eta, lambda, cfg.c_extract) {
            Ok(e) => e,
            Err(Error::Limit(_)) => continue,
            Err(e) => return Err(e),
        };
        tried.push(format!("q={} eta={eta:.3} len={} best={:.4}", cand.q, ext.progression.length, ext.density));
        // a single term says nothing about A
        if !ext.meets || ext.density <= alpha || ext.progression.length < 2 {
            continue;
        }
        let p = ext.progression;
        let (env, j) = envelopes(alpha, ext.density, xf, p.length as f64, cfg);
        let option = if alpha > cfg.c_h {
            if env.contains(&StepOption::Star) { StepOption::Star } else { StepOption::None }
        } else if env.contains(&StepOption::Opt2) {
            StepOption::Opt2
        } else if env.contains(&StepOption::Opt3) {
            StepOption::Opt3
        } else if env.contains(&StepOption::Star) {
            StepOption::Star
        } else {
            StepOption::None
        };
        let new_ell = ell
            .checked_mul(cand.q)
            .ok_or_else(|| Error::Limit(format!("ell = {ell} times q = {} overflows", cand.q)))?;
        let new_context = builder.context(new_ell)?;
        let rescaled = p.rescale(a);
        return Ok(StepOutcome {
            option,
            envelopes: env,
            old_alpha: alpha,
            new_alpha: ext.density,
            j: if option == StepOption::Opt2 { j } else { None },
            xi: cand.xi,
            eta,
            new_ell,
            new_context: Some(new_context),
            rescaled: Some(rescaled),
            progression: Some(p),
            note: String::new(),
        });
    }
    Ok(StepOutcome::without_progression(StepOption::None, alpha, ell, format!("no increment: {}", tried.join("; "))))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub m: usize,
    #[serde(rename = "X_m")]
    pub x_m: u64,
    pub alpha_m: f64,
    pub q_m: u64,
    pub ell_m: u64,
    pub option: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Empty,
    Opt1,
    BelowXMin,
    AlphaAboveTwoThirds,
    EllTooLarge,
    NoIncrement,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationTrace {
    pub config: IncrementConfig,
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
}

impl IterationTrace {
    /// `l_m <= 2^m X_0 / X_m` on every row, and `l_m` is the product of the
    /// `q_i`.
    pub fn check_invariants(&self) -> bool {
        let Some(first) = self.rows.first() else { return true };
        let x0 = first.x_m as f64;
        let mut ell = first.ell_m;
        self.rows.iter().enumerate().all(|(i, r)| {
            if i > 0 {
                ell *= r.q_m;
            }
            r.ell_m == ell && r.ell_m as f64 <= 2f64.powi(r.m as i32) * x0 / r.x_m as f64 * (1.0 + 1e-12)
        }) && self.rows.windows(2).all(|w| w[1].x_m < w[0].x_m && w[1].alpha_m > w[0].alpha_m)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# config: {}\nm,X_m,alpha_m,q_m,ell_m,option\n", serde_json::to_string(&self.config).unwrap());
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{},{}\n", r.m, r.x_m, fmt17(r.alpha_m), r.q_m, r.ell_m, r.option));
        }
        s
    }

    pub fn to_json_lines(&self) -> String {
        let mut s = serde_json::to_string(&json!({"config": self.config, "stop": self.stop})).unwrap();
        s.push('\n');
        for r in &self.rows {
            s.push_str(&serde_json::to_string(r).unwrap());
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).unwrap()
    }
}

/// Repeats [`increment_step`] from `h_1`, rescaling onto each progression,
/// until option (1), `X_m < X_min`, `alpha_m > 2/3`, `l_m >= X_m^rho`, no
/// increment, or the step limit.
pub fn iterate(a: &AvoidingSet, builder: &AuxBuilder, cfg: &IncrementConfig) -> Result<IterationTrace> {
    let mut rows = Vec::new();
    if a.is_empty() {
        return Ok(IterationTrace { config: cfg.clone(), rows, stop: StopReason::Empty });
    }
    let mut set = a.clone();
    let mut ell = 1u64;
    rows.push(TraceRow { m: 0, x_m: set.x() as u64, alpha_m: set.density(), q_m: 1, ell_m: 1, option: "start".into() });
    let stop = loop {
        let m = rows.len();
        let x = set.x() as u64;
        if x < cfg.x_min {
            break StopReason::BelowXMin;
        }
        if set.density() > 2.0 / 3.0 {
            break StopReason::AlphaAboveTwoThirds;
        }
        if ell as f64 >= (x as f64).powf(cfg.rho) {
            break StopReason::EllTooLarge;
        }
        if m > cfg.max_steps {
            break StopReason::MaxSteps;
        }
        let out = increment_step(&set, builder, ell, cfg)?;
        match out.option {
            StepOption::Opt1 => break StopReason::Opt1,
            StepOption::None => break StopReason::NoIncrement,
            _ => {}
        }
        let p = out.progression.expect("accepted steps carry a progression");
        ell = out.new_ell;
        set = out.rescaled.expect("accepted steps carry the rescaled set");
        rows.push(TraceRow {
            m,
            x_m: set.x() as u64,
            alpha_m: set.density(),
            q_m: p.q,
            ell_m: ell,
            option: out.option.to_string(),
        });
    };
    Ok(IterationTrace { config: cfg.clone(), rows, stop })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::IntPoly;
    use crate::search::{forbidden_values, greedy_avoiding, verify_avoiding, ForbiddenMode};

    fn squares() -> AuxBuilder {
        AuxBuilder::new(IntPoly::from_i64(&[0, 0, 1])).unwrap()
    }

    #[test]
    fn f_examples() {
        assert!((d_epsilon(1e-9) - 0.25).abs() < 1e-8);
        assert_eq!(d_epsilon(1.0), 0.125);
        let v = f_eval_ln(256.0, 1.0).unwrap();
        assert!((v - 2.0 / 259f64.ln().sqrt()).abs() < 1e-15);
        assert!((v - 0.8484).abs() < 1e-4);
        // eps = 1 dips on e <= ln X <= 37.8; small eps increases from e^e on
        for (eps, start) in [(0.1, std::f64::consts::E), (1.0, 38.0)] {
            let mut prev = 0.0;
            for i in 0..200 {
                let v = f_eval_ln(start * 1.1f64.powi(i), eps).unwrap();
                assert!(v > prev, "eps {eps} step {i}");
                prev = v;
            }
        }
        assert!(f_eval_ln(10.0, 1.0).unwrap() < f_eval_ln(std::f64::consts::E, 1.0).unwrap());
        assert!(f_eval(1.0, 1.0).is_err());
        assert!(f_eval(10.0, 0.0).is_err());
    }

    #[test]
    fn f_drop_bound() {
        for lx in [1e6f64.ln(), 1e12f64.ln()] {
            for y in [1.0, 10.0] {
                if y >= lx {
                    continue;
                }
                let drop = f_eval_ln(lx, 1.0).unwrap() - f_eval_ln(lx - y, 1.0).unwrap();
                let bound = y * lx.powf(d_epsilon(1.0) - 1.0) / (3.0 + lx).ln().sqrt();
                assert!(drop <= bound, "lnX = {lx}, y = {y}");
            }
        }
    }

    #[test]
    fn extraction_examples() {
        let a = AvoidingSet::from_members(100, (5..=100).step_by(5)).unwrap();
        let e = extract_increment(&a, 5, 0.0, 1.0, 5, 1.0).unwrap();
        assert!(e.meets);
        assert_eq!(e.progression, Progression { start: 5, step: 5, length: 20, q: 5 });
        assert_eq!(e.density, 1.0);
        let full = AvoidingSet::full(100);
        assert!(!extract_increment(&full, 3, 0.0, 0.5, 9, 1.0).unwrap().meets);
        let odds = AvoidingSet::from_members(100, (1..=100).step_by(2)).unwrap();
        let e = extract_increment(&odds, 2, 0.0, 1.0, 2, 1.0).unwrap();
        assert_eq!((e.progression.start, e.progression.length, e.density), (1, 50, 1.0));
        assert!(matches!(extract_increment(&odds, 2, 0.0, 1.0, 2, 5.0), Err(Error::Limit(_))));
    }

    #[test]
    fn step_on_structured_set() {
        let a = AvoidingSet::from_members(100, (1..=100).step_by(4)).unwrap();
        let out = increment_step(&a, &squares(), 1, &IncrementConfig::default()).unwrap();
        assert_eq!(out.option, StepOption::Star);
        assert_eq!(out.new_alpha, 1.0);
        assert_eq!(out.progression.as_ref().unwrap().q % 2, 0);
        let p = out.progression.unwrap();
        assert_eq!(p.count_in(&a), p.length);
        assert_eq!(p.step, squares().lambda_of(p.q).unwrap().to_u64().unwrap());
        assert!(increment_step(&AvoidingSet::empty(100), &squares(), 1, &IncrementConfig::default()).is_err());
    }

    #[test]
    fn step_on_greedy_set_inherits_avoidance() {
        let b = squares();
        let f = forbidden_values(&b.context(1).unwrap(), 5000, ForbiddenMode::All).unwrap();
        let a = greedy_avoiding(&f, 5000);
        let out = increment_step(&a, &b, 1, &IncrementConfig::default()).unwrap();
        assert!(out.option.accepted(), "{}", out.note);
        assert!(out.new_alpha > out.old_alpha);
        let p = out.progression.as_ref().unwrap();
        assert_eq!(out.new_alpha, p.count_in(&a) as f64 / p.length as f64);
        let r = out.rescaled.as_ref().unwrap();
        let ctx = out.new_context.as_ref().unwrap();
        let f2 = forbidden_values(ctx, r.x() as u64, ForbiddenMode::All).unwrap();
        assert!(verify_avoiding(r, &f2).ok);
    }

    #[test]
    fn iteration_examples() {
        let b = squares();
        let cfg = IncrementConfig::default();
        assert_eq!(iterate(&AvoidingSet::empty(50), &b, &cfg).unwrap().stop, StopReason::Empty);
        let t = iterate(&AvoidingSet::full(50), &b, &cfg).unwrap();
        assert_eq!((t.stop, t.rows.len()), (StopReason::AlphaAboveTwoThirds, 1));
        let f = forbidden_values(&b.context(1).unwrap(), 2000, ForbiddenMode::All).unwrap();
        let t = iterate(&greedy_avoiding(&f, 2000), &b, &cfg).unwrap();
        assert!(t.rows.len() >= 2, "{t:?}");
        assert!(t.check_invariants());
        assert!(t.to_csv().lines().nth(1).unwrap() == "m,X_m,alpha_m,q_m,ell_m,option");
        assert_eq!(t.to_json_lines().lines().count(), t.rows.len() + 1);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn extraction_recounts(seed in 0u64..10_000, q in 1u64..8, eta in 0.05f64..1.0, xi in -0.01f64..0.01) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = AvoidingSet::from_members(600, (1..=600).filter(|_| rng.gen_bool(0.3))).unwrap();
            if let Ok(e) = extract_increment(&a, q, xi, eta, q * q, 1.0) {
                let p = &e.progression;
                proptest::prop_assert_eq!(e.count, p.count_in(&a));
                proptest::prop_assert_eq!(e.density, e.count as f64 / p.length as f64);
                proptest::prop_assert!(p.last() <= 600 && p.step == q * q);
                proptest::prop_assert_eq!(p.rescale(&a).len() as u64, e.count);
            }
        }
    }

    #[test]
    fn config_is_strict() {
        let c: IncrementConfig = serde_json::from_str(r#"{"rho": 0.25, "C_h": 30}"#).unwrap();
        assert_eq!((c.rho, c.big_c_h, c.c_h), (0.25, 30.0, 0.01));
        assert!(serde_json::from_str::<IncrementConfig>(r#"{"bogus": 1}"#).is_err());
        assert_eq!(IncrementConfig::default().with_paper_rho(2).rho, 2f64.powi(-20));
    }
}
