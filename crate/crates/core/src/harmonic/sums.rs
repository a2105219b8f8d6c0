use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use super::{convergents, e, fourier_point, rational_approx, residue_table, Freq, WeightedImage};
use crate::arith::{gcd_u64, KahanSum};
use crate::error::{Error, Result};
use crate::intersective::AuxiliaryContext;
use crate::sieve::SieveTable;

/// `sum e(a h_l(s) / q)` over `s mod q` with `s` in `W^q(U)`.
pub fn gauss_sum_sieved(aux: &AuxiliaryContext, a: i64, q: u64, u: f64) -> Result<Complex64> {
    gauss_sum_with_table(&SieveTable::new(aux, u)?, a, q)
}

pub fn gauss_sum_with_table(table: &SieveTable, a: i64, q: u64) -> Result<Complex64> {
    if q == 0 || gcd_u64(a.unsigned_abs(), q) != 1 {
        return Err(Error::NotCoprime { a, q });
    }
    let res = residue_table(&table.aux.aux, q);
    let a = a.rem_euclid(q as i64) as u128;
    let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
    for (s, &r) in res.iter().enumerate() {
        if table.in_w(s as u64, Some(q)) {
            let z = e((a * r as u128 % q as u128) as f64 / q as f64);
            re.add(z.re);
            im.add(z.im);
        }
    }
    Ok(Complex64::new(re.value(), im.value()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussFit {
    pub exponent: f64,
    pub qmax: u64,
    /// `max |sum| / q^exponent` over `q <= qmax` and reduced `a`.
    pub fitted_c: f64,
    /// The same maximum over dyadic blocks `[2^i, 2^(i+1))`.
    pub blocks: Vec<(u64, u64, f64)>,
}

/// Fits `C` in `|sum| <= C q^exponent` over every reduced fraction `a/q`.
pub fn gauss_envelope_fit(table: &SieveTable, qmax: u64, exponent: f64) -> GaussFit {
    let per_q: Vec<f64> = (1..=qmax)
        .into_par_iter()
        .map(|q| {
            let res = residue_table(&table.aux.aux, q);
            let kept: Vec<u64> = (0..q).filter(|&s| table.in_w(s, Some(q))).map(|s| res[s as usize]).collect();
            let mut best = 0.0f64;
            for a in 0..q {
                if gcd_u64(a, q) != 1 {
                    continue;
                }
                let z: Complex64 =
                    kept.iter().map(|&r| e((a as u128 * r as u128 % q as u128) as f64 / q as f64)).sum();
                best = best.max(z.norm());
            }
            best / (q as f64).powf(exponent)
        })
        .collect();
    let fitted_c = per_q.iter().cloned().fold(0.0, f64::max);
    let mut blocks = Vec::new();
    let mut lo = 1u64;
    while lo <= qmax {
        let hi = (2 * lo).min(qmax + 1);
        let c = per_q[(lo - 1) as usize..(hi - 1) as usize].iter().cloned().fold(0.0, f64::max);
        blocks.push((lo, hi - 1, c));
        lo = hi;
    }
    GaussFit { exponent, qmax, fitted_c, blocks }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylSample {
    pub theta: f64,
    pub a: u64,
    pub q: u64,
    /// `sum e(theta h_l(n))` over `n <= N` in `W(U)`.
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
    /// Right side of the Weyl-type bound without its implied constant.
    pub bound: f64,
    pub fitted_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylReport {
    pub n: u64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub members: u64,
    pub samples: Vec<WeylSample>,
    pub max_fitted_c: f64,
}

/// `N (ln U)^(ek) (exp(-ln Z / ln U) + (b_k ln^(k^2)(b_k q N) (1/q + Z/N +
/// q Z^k / (b_k N^k)))^(1/K))`.
pub fn weyl_bound(k: u32, bk: f64, q: u64, n: f64, u: f64, z: f64) -> f64 {
    let kk = 2f64.powi(k as i32);
    let kf = k as f64;
    let q = q as f64;
    let inner = bk
        * (bk * q * n).ln().powf(kf * kf)
        * (1.0 / q + z / n + q * z.powf(kf) / (bk * n.powf(kf)));
    n * u.ln().powf(std::f64::consts::E * kf) * ((-z.ln() / u.ln()).exp() + inner.powf(1.0 / kk))
}

pub fn weyl_sum_audit(aux: &AuxiliaryContext, u: f64, z: f64, n: u64, thetas: &[f64]) -> Result<WeylReport> {
    if n < 2 || u < 2.0 || z < 2.0 || u * z > n as f64 {
        return Err(Error::Hypothesis(format!("need N, U, Z >= 2 and U Z <= N, got N = {n}, U = {u}, Z = {z}")));
    }
    let table = SieveTable::new(aux, u)?;
    let h = &aux.aux;
    let values: Vec<BigInt> = (1..=n).filter(|&m| table.in_w(m, None)).map(|m| h.eval(&BigInt::from(m))).collect();
    let k = h.degree() as u32;
    let bk = h.leading().to_f64().unwrap();
    let samples: Vec<WeylSample> = thetas
        .par_iter()
        .map(|&theta| {
            let f = Freq::from_f64(theta);
            let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
            for v in &values {
                let w = e(f.phase_big(v));
                re.add(w.re);
                im.add(w.im);
            }
            let s = Complex64::new(re.value(), im.value());
            let (a, q, _) = rational_approx(theta, n);
            let bound = weyl_bound(k, bk, q, n as f64, u, z);
            WeylSample { theta, a, q, re: s.re, im: s.im, magnitude: s.norm(), bound, fitted_c: s.norm() / bound }
        })
        .collect();
    let max_fitted_c = samples.iter().map(|s| s.fitted_c).fold(0.0, f64::max);
    Ok(WeylReport { n, u, z, members: values.len() as u64, samples, max_fitted_c })
}

/// Envelopes for the rational approximation forced by a large value. The
/// `o(1)` terms in the exponents are replaced by `slack`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorEnvelope {
    /// For `|g^(theta)| >= delta X`: `q <= C delta^-K X^((k-1) rho + s)` and
    /// `||q theta|| <= C delta^(-K-k) X^(-1 + 2(k-1) rho + s)`, `ell = X^rho`.
    Weighted { c: f64, slack: f64 },
    /// For `|S(theta)| >= delta N`: `q <= C T^K delta^-K` and `||q theta|| <=
    /// C T^K N^(-k+s) delta^-K`, with `T = (ln X)^(ek/2) (b_k
    /// ln^(k^2)(b_k N^(k+1)))^(1/K)`.
    Unweighted { c: f64, slack: f64, n: u64 },
}

impl DetectorEnvelope {
    pub fn weighted() -> Self {
        DetectorEnvelope::Weighted { c: 1.0, slack: 0.05 }
    }

    /// `(q bound, ||q theta|| bound)`.
    pub fn bounds(&self, k: u32, bk: f64, ell: u64, x: f64, delta: f64) -> (f64, f64) {
        let kk = 2f64.powi(k as i32);
        let kf = k as f64;
        match *self {
            DetectorEnvelope::Weighted { c, slack } => {
                let rho = (ell as f64).ln() / x.ln();
                let qb = c * delta.powf(-kk) * x.powf((kf - 1.0) * rho + slack);
                let db = c * delta.powf(-kk - kf) * x.powf(-1.0 + 2.0 * (kf - 1.0) * rho + slack);
                (qb, db)
            }
            DetectorEnvelope::Unweighted { c, slack, n } => {
                let n = n as f64;
                let t = x.ln().powf(std::f64::consts::E * kf / 2.0)
                    * (bk * (bk * n.powf(kf + 1.0)).ln().powf(kf * kf)).powf(1.0 / kk);
                let tk = t.powf(kk) * delta.powf(-kk);
                (c * tk, c * tk * n.powf(-kf + slack))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectorHit {
    pub theta: f64,
    /// `|g^(theta)| / X`, or `|S(theta)| / N`.
    pub normalized: f64,
    pub q_bound: f64,
    pub dist_bound: f64,
    /// Smallest `q` within the `q` bound achieving the distance bound.
    pub q: Option<u64>,
    pub dist: Option<f64>,
    pub confirmed: bool,
}

/// Smallest `q <= qb` with `||q theta|| <= db`. Any such minimal `q` is a
/// best approximation, hence a convergent denominator.
fn structured_q(theta: f64, qb: f64, db: f64) -> Option<(u64, f64)> {
    let qmax = qb.min(1e15).max(1.0) as u64;
    convergents(theta, qmax).into_iter().find(|&(_, _, d)| d <= db).map(|(_, q, d)| (q, d))
}

fn hit(theta: f64, normalized: f64, (qb, db): (f64, f64)) -> DetectorHit {
    let found = structured_q(theta, qb, db);
    DetectorHit {
        theta,
        normalized,
        q_bound: qb,
        dist_bound: db,
        q: found.map(|f| f.0),
        dist: found.map(|f| f.1),
        confirmed: found.is_some(),
    }
}

/// Frequencies among `thetas` where `|g^| >= delta X`, each checked for a
/// rational approximation inside the envelope.
pub fn large_value_detector(
    g: &WeightedImage,
    thetas: &[f64],
    delta: f64,
    env: DetectorEnvelope,
) -> Vec<DetectorHit> {
    let h = &g.aux().aux;
    let k = h.degree() as u32;
    let bk = h.leading().to_f64().unwrap();
    let x = g.x as f64;
    let bounds = env.bounds(k, bk, g.aux().ell, x, delta);
    thetas
        .par_iter()
        .filter_map(|&theta| {
            let v = fourier_point(g, Freq::from_f64(theta)).norm() / x;
            (v >= delta).then(|| hit(theta, v, bounds))
        })
        .collect()
}

/// As [`large_value_detector`] for the unweighted sum over `n <= N` in
/// `W(U)`, at scale `X`.
pub fn weyl_detector(table: &SieveTable, n: u64, x: f64, thetas: &[f64], delta: f64, c: f64, slack: f64) -> Vec<DetectorHit> {
    let h = &table.aux.aux;
    let values: Vec<BigInt> = (1..=n).filter(|&m| table.in_w(m, None)).map(|m| h.eval(&BigInt::from(m))).collect();
    let env = DetectorEnvelope::Unweighted { c, slack, n };
    let bounds = env.bounds(h.degree() as u32, h.leading().to_f64().unwrap(), table.aux.ell, x, delta);
    thetas
        .par_iter()
        .filter_map(|&theta| {
            let f = Freq::from_f64(theta);
            let s: Complex64 = values.iter().map(|v| e(f.phase_big(v))).sum();
            let v = s.norm() / n as f64;
            (v >= delta).then(|| hit(theta, v, bounds))
        })
        .collect()
}
