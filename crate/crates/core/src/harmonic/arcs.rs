use num_complex::Complex64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{classify_arc, e, fourier_point, residue_table, Arc, ArcParams, Freq, SmoothWeight, WeightedImage};
use crate::arith::{gcd_u64, KahanSum};
use crate::error::{Error, Result};
use crate::search::AvoidingSet;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassTerm {
    pub q: u64,
    /// `q^(-1/(2+eps))`.
    pub weight: f64,
    /// `sum over reduced a of |1_A^(a/q + xi)|^2`.
    pub energy: f64,
    pub contribution: f64,
}

/// `1_A^(a/q + xi)` for every `a mod q`: residue-class sums of `e(-n xi)`
/// followed by a length-`q` DFT.
pub(crate) fn class_transform(members: &[usize], q: u64, xi: f64) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); q as usize];
    for &n in members {
        c[n % q as usize] += e(-(n as f64) * xi);
    }
    FftPlanner::new().plan_fft_forward(q as usize).process(&mut c);
    c
}

/// The terms `2 <= q <= Qmax` of the initial mass at shift `xi`.
pub fn mass_terms(a: &AvoidingSet, xi: f64, params: &ArcParams) -> Result<Vec<MassTerm>> {
    if xi.abs() > params.tau {
        return Err(Error::Hypothesis(format!("|xi| = {} exceeds tau = {}", xi.abs(), params.tau)));
    }
    let members = a.members();
    let expo = -1.0 / (2.0 + params.epsilon);
    Ok((2..=params.qmax)
        .into_par_iter()
        .map(|q| {
            let vals = class_transform(&members, q, xi);
            let mut energy = KahanSum::default();
            for (r, v) in vals.iter().enumerate() {
                if gcd_u64(r as u64, q) == 1 {
                    energy.add(v.norm_sqr());
                }
            }
            let weight = (q as f64).powf(expo);
            MassTerm { q, weight, energy: energy.value(), contribution: weight * energy.value() }
        })
        .collect())
}

/// `sum_{2 <= q <= Qmax} q^(-1/(2+eps)) sum_{(a,q)=1} |1_A^(a/q + xi)|^2`.
pub fn initial_mass(a: &AvoidingSet, xi: f64, params: &ArcParams) -> Result<f64> {
    let mut k = KahanSum::default();
    for t in mass_terms(a, xi, params)? {
        k.add(t.contribution);
    }
    Ok(k.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisPolicy {
    /// Refuse inputs outside `q < X^(1/8k)`, `|theta| <= X^(-(1-1/8k))`.
    Enforce,
    /// Compute anyway and flag the report.
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MajorArcReport {
    pub a: u64,
    pub q: u64,
    pub theta: f64,
    pub measured: f64,
    pub predicted: f64,
    /// `measured / predicted`, absent when the prediction vanishes.
    pub ratio: Option<f64>,
    /// `|measured - predicted| / (2 X w^(0))`.
    pub normalized_error: f64,
    pub hypotheses_ok: bool,
    /// `|w^(theta X)|`.
    pub weight_factor: f64,
}

/// Compares `g^(a/q + theta)` against the main term
/// `J (2X/q) Re[w^(theta X) prod'(1 - j/p^gamma) sum_{b in W^q} e(-a h(b)/q)]`,
/// the product running over `p <= U` with `p^gamma` not dividing `q`.
pub fn major_arc_predict(
    g: &WeightedImage,
    w: &SmoothWeight,
    a: u64,
    q: u64,
    theta: f64,
    policy: HypothesisPolicy,
) -> Result<MajorArcReport> {
    if q == 0 || gcd_u64(a, q) != 1 {
        return Err(Error::NotCoprime { a: a as i64, q });
    }
    let x = g.x as f64;
    let k = g.aux().aux.degree() as f64;
    let hypotheses_ok = (q as f64) < x.powf(1.0 / (8.0 * k)) && theta.abs() <= x.powf(-(1.0 - 1.0 / (8.0 * k)));
    if !hypotheses_ok && policy == HypothesisPolicy::Enforce {
        return Err(Error::Hypothesis(format!("q = {q}, theta = {theta} outside the major arc range at X = {x}")));
    }
    let measured = fourier_point(g, Freq::rational(a as i64, q).shifted(theta)).re;

    let table = &g.table;
    let res = residue_table(&table.aux.aux, q);
    let mut s = Complex64::new(0.0, 0.0);
    for (b, &r) in res.iter().enumerate() {
        if table.in_w(b as u64, Some(q)) {
            s += e(-((a as u128 * r as u128 % q as u128) as f64) / q as f64);
        }
    }
    let local = table.j_factor(Some(q)).recip().to_f64().unwrap();
    let wt = w.fourier(theta * x);
    let predicted = g.j * (2.0 * x / q as f64) * (wt * s * local).re;
    let scale = 2.0 * x * w.fourier(0.0).re;
    let ratio = (predicted.abs() > 1e-9 * scale).then(|| measured / predicted);
    Ok(MajorArcReport {
        a,
        q,
        theta,
        measured,
        predicted,
        ratio,
        normalized_error: (measured - predicted).abs() / scale,
        hypotheses_ok,
        weight_factor: wt.norm(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinorArcReport {
    pub grid: usize,
    pub sampled: usize,
    pub minor_points: usize,
    /// Largest `|g^|` over the minor-arc samples.
    pub sup: f64,
    pub argsup: Option<f64>,
    /// `2^-9 alpha X`.
    pub threshold: f64,
    /// `threshold - sup`; positive when the bound is met.
    pub margin: f64,
    pub clears: bool,
    pub mass: f64,
    /// `|g^|` at the fractional part of the golden ratio, and its share of
    /// `g^(0)`.
    pub golden: f64,
    pub golden_share: f64,
    /// Whether `alpha >= c (ln X)^(ek) exp(-(ln X)^(3/8))`.
    pub alpha_hypothesis: bool,
}

/// Frequencies near `a/q` for `q` just past `Qmax`, and just outside the
/// arcs around small denominators.
fn adversarial_points(params: &ArcParams) -> Vec<f64> {
    let mut out = Vec::new();
    for q in params.qmax + 1..=params.qmax + 8 {
        out.push(1.0 / q as f64);
    }
    for q in 1..=params.qmax.min(12) {
        for a in 0..q {
            if gcd_u64(a, q) != 1 {
                continue;
            }
            let c = a as f64 / q as f64;
            for m in [-4.0, -2.0, 2.0, 4.0] {
                out.push((c + m * params.tau).rem_euclid(1.0));
            }
        }
    }
    out.push((5f64.sqrt() - 1.0) / 2.0);
    out
}

pub fn minor_arc_audit(g: &WeightedImage, params: &ArcParams, grid: usize, alpha_c: f64) -> MinorArcReport {
    let mut thetas: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
    thetas.extend(adversarial_points(params));
    let minor: Vec<(f64, f64)> = thetas
        .par_iter()
        .filter(|&&t| classify_arc(t, params) == Arc::Minor)
        .map(|&t| (t, fourier_point(g, Freq::from_f64(t)).norm()))
        .collect();
    let (argsup, sup) = minor
        .iter()
        .fold((None, 0.0f64), |(arg, best), &(t, v)| if v > best { (Some(t), v) } else { (arg, best) });
    let x = g.x as f64;
    let threshold = params.alpha * x / 512.0;
    let mass = g.total_mass();
    let golden = fourier_point(g, Freq::from_f64((5f64.sqrt() - 1.0) / 2.0)).norm();
    let k = g.aux().aux.degree() as f64;
    let lx = x.ln();
    let alpha_floor = alpha_c * lx.powf(std::f64::consts::E * k) * (-lx.powf(3.0 / 8.0)).exp();
    MinorArcReport {
        grid,
        sampled: thetas.len(),
        minor_points: minor.len(),
        sup,
        argsup,
        threshold,
        margin: threshold - sup,
        clears: sup <= threshold,
        mass,
        golden,
        golden_share: golden / mass,
        alpha_hypothesis: params.alpha >= alpha_floor,
    }
}
