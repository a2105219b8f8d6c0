//! Fourier analysis on the integers: the smooth weight, the weighted image
//! of an auxiliary polynomial, exponential sums and arc classification.
//!
//! Convention throughout: `f^(theta) = sum_n f(n) e(-n theta)` with
//! `e(x) = exp(2 pi i x)`.

mod arcs;
mod fourier;
mod sums;
mod weight;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::arith::gcd_u64;
use crate::error::{Error, Result};
use crate::poly::{eval_mod, IntPoly};

pub use arcs::{
    initial_mass, major_arc_predict, mass_terms, minor_arc_audit, HypothesisPolicy, MajorArcReport, MassTerm,
    MinorArcReport,
};
pub use fourier::{fourier_grid, fourier_point, Signal, Spectrum, WeightedImage};
pub use sums::{
    gauss_envelope_fit, gauss_sum_sieved, gauss_sum_with_table, large_value_detector, weyl_bound, weyl_detector,
    weyl_sum_audit, DetectorEnvelope, DetectorHit, GaussFit, WeylReport, WeylSample,
};
pub use weight::{weight_fourier_audit, SmoothWeight, WeightAudit};

/// A frequency `a/q + delta` whose rational part is kept exact, so that the
/// phase of `v * theta` can be reduced mod 1 before any rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Freq {
    a: u64,
    q: u64,
    delta: f64,
}

const DYADIC: u64 = 1 << 53;

impl Freq {
    pub fn rational(a: i64, q: u64) -> Self {
        assert!(q > 0);
        Freq { a: a.rem_euclid(q as i64) as u64, q, delta: 0.0 }
    }

    /// The double `theta`, read mod 1 and rounded to a multiple of `2^-53`.
    pub fn from_f64(theta: f64) -> Self {
        let frac = theta - theta.floor();
        let m = (frac * DYADIC as f64).round() as u64 % DYADIC;
        Freq { a: m, q: DYADIC, delta: 0.0 }
    }

    pub fn zero() -> Self {
        Freq::rational(0, 1)
    }

    pub fn shifted(self, delta: f64) -> Self {
        Freq { delta: self.delta + delta, ..self }
    }

    pub fn value(&self) -> f64 {
        self.a as f64 / self.q as f64 + self.delta
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Fractional part of `v * theta`, in `[0, 1)`.
    pub fn phase(&self, v: i64) -> f64 {
        let r = (v as i128).rem_euclid(self.q as i128) as u128;
        self.phase_from_residue(r as u64, v as f64)
    }

    pub fn phase_big(&self, v: &BigInt) -> f64 {
        let r = v.mod_floor(&BigInt::from(self.q)).to_u64().unwrap();
        self.phase_from_residue(r, v.to_f64().unwrap_or(0.0))
    }

    /// `vr` is `v mod q`; `vf` is `v` as a double, only used for the small
    /// offset part.
    fn phase_from_residue(&self, vr: u64, vf: f64) -> f64 {
        let num = (vr as u128 * self.a as u128 % self.q as u128) as f64 / self.q as f64;
        let off = if self.delta == 0.0 { 0.0 } else { (vf * self.delta).rem_euclid(1.0) };
        let x = num + off;
        x - x.floor()
    }
}

/// `e(x) = exp(2 pi i x)`.
pub fn e(x: f64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * x).sin_cos();
    Complex64::new(c, s)
}

/// Continued-fraction convergents `(p, q, |q theta - p|)` of `theta mod 1`
/// with `q <= qmax`, in increasing `q`. Computed on the exact rational
/// value of the double.
pub fn convergents(theta: f64, qmax: u64) -> Vec<(u64, u64, f64)> {
    let frac = theta - theta.floor();
    let x = BigRational::from_float(frac).unwrap_or_else(BigRational::zero);
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::from(0), BigInt::from(1), BigInt::from(1), BigInt::from(0));
    let mut rem = x.clone();
    let mut out = Vec::new();
    loop {
        let a = rem.floor().to_integer();
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        if q2 > BigInt::from(qmax) {
            break;
        }
        let dist = (&x * BigRational::from_integer(q2.clone()) - BigRational::from_integer(p2.clone())).abs();
        out.push((p2.to_u64().unwrap(), q2.to_u64().unwrap(), dist.to_f64().unwrap()));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let f = &rem - BigRational::from_integer(a);
        if f.is_zero() {
            break;
        }
        rem = f.recip();
    }
    out
}

/// Best continued-fraction convergent `a/q` to `theta` with `q <= qmax`,
/// and `delta = |theta - a/q|`. `theta` is read mod 1; `a` lies in `[0, q]`.
pub fn rational_approx(theta: f64, qmax: u64) -> (u64, u64, f64) {
    assert!(qmax >= 1);
    let (a, q, d) = *convergents(theta, qmax).last().expect("q = 1 always qualifies");
    (a, q, d / q as f64)
}

/// Major arc parameters: radius `tau = C1 L^2 / X` around `a/q` with
/// `q <= Qmax = C1 alpha^(-2-eps)`, where `L = ln(1/alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub c1: f64,
    pub x: f64,
    pub tau: f64,
    pub qmax: u64,
    pub l: f64,
}

impl ArcParams {
    pub fn new(alpha: f64, epsilon: f64, c1: f64, x: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || epsilon <= 0.0 || c1 <= 0.0 || x < 1.0 {
            return Err(Error::InvalidInput(format!("bad arc parameters alpha={alpha} eps={epsilon} C1={c1} X={x}")));
        }
        let l = (1.0 / alpha).ln();
        let tau = c1 * l * l / x;
        let qmax = ((c1 * alpha.powf(-2.0 - epsilon)).floor() as u64).max(2);
        Ok(ArcParams { alpha, epsilon, c1, x, tau, qmax, l })
    }

    /// Same arcs with the denominator range truncated at `cap`.
    pub fn capped(mut self, cap: u64) -> Self {
        self.qmax = self.qmax.min(cap.max(2));
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "arc", rename_all = "snake_case")]
pub enum Arc {
    Major { q: u64, a: u64 },
    Minor,
}

/// Smallest `q <= Qmax` with some reduced `a/q` within `tau` of `theta`.
pub fn classify_arc(theta: f64, params: &ArcParams) -> Arc {
    let t = theta - theta.floor();
    for q in 1..=params.qmax {
        let qt = q as f64 * t;
        let a = qt.round();
        if (qt - a).abs() <= params.tau * q as f64 {
            let a = (a as u64) % q;
            if gcd_u64(a, q) == 1 || q == 1 {
                return Arc::Major { q, a };
            }
        }
    }
    Arc::Minor
}

/// Scale-dependent quantities: `U = exp(sqrt(ln X))`, `Z =
/// exp((ln X)^(7/8))`, `K = 2^k` and `Y` with `h_l(Y) = X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicParams {
    pub x: f64,
    pub u: f64,
    pub z: f64,
    pub k: u32,
    pub big_k: u64,
    pub y: f64,
    /// `(X / b_k)^(1/k)`, the leading-order approximation of `Y`.
    pub y_leading: f64,
}

impl HarmonicParams {
    pub fn new(aux: &IntPoly, x: f64) -> Result<Self> {
        let k = aux.degree() as u32;
        if k < 2 || x <= 1.0 {
            return Err(Error::InvalidInput("need degree >= 2 and X > 1".into()));
        }
        let lx = x.ln();
        let bk = aux.leading().to_f64().unwrap();
        let y = solve_increasing(aux, x);
        Ok(HarmonicParams {
            x,
            u: lx.sqrt().exp(),
            z: lx.powf(7.0 / 8.0).exp(),
            k,
            big_k: 1 << k,
            y,
            y_leading: (x / bk).powf(1.0 / k as f64),
        })
    }

    /// Whether `U Z <= N` and `N, U, Z >= 2`.
    pub fn weyl_range_ok(&self, n: f64) -> bool {
        self.u >= 2.0 && self.z >= 2.0 && n >= 2.0 && self.u * self.z <= n
    }
}

/// Real `y >= 0` with `h(y) = x`, by bisection on the increasing branch.
pub fn solve_increasing(h: &IntPoly, x: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while h.eval_f64(hi) < x {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h.eval_f64(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Residue of `h(s)` mod `q` for every `s` in `0..q`.
pub(crate) fn residue_table(h: &IntPoly, q: u64) -> Vec<u64> {
    let r = h.residues_mod(q);
    (0..q).map(|s| eval_mod(&r, s, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_examples() {
        assert_eq!(rational_approx(0.5, 10), (1, 2, 0.0));
        let (a, q, d) = rational_approx(std::f64::consts::PI - 3.0, 10);
        assert_eq!((a, q), (1, 7));
        assert!((d - 0.001_264_489).abs() < 1e-8);
        let (a, q, d) = rational_approx(16.0 / 113.0, 200);
        assert_eq!((a, q), (16, 113));
        assert!(d < 1e-15);
    }

    #[test]
    fn arc_examples() {
        let p = ArcParams::new(0.1, 1.0, 10.0, 1e6).unwrap();
        assert_eq!(classify_arc(0.0, &p), Arc::Major { q: 1, a: 0 });
        assert_eq!(classify_arc(0.5 + p.tau / 2.0, &p), Arc::Major { q: 2, a: 1 });
        let tight = ArcParams::new(0.1, 1.0, 10.0, 1e6).unwrap().capped(2).with_tau(1e-9);
        assert_eq!(classify_arc(0.5 + 2e-9, &tight), Arc::Minor);
        assert_eq!(classify_arc(0.999_999_999_9, &tight), Arc::Major { q: 1, a: 0 });
    }

    #[test]
    fn phases_are_exact() {
        let f = Freq::rational(1, 3);
        assert_eq!(f.phase(4), 1.0 / 3.0);
        assert_eq!(f.phase(-1), 2.0 / 3.0);
        let big = BigInt::from(10).pow(30) + 1;
        assert!((Freq::rational(1, 7).phase_big(&big) - ((big.clone() % 7u32).to_f64().unwrap() / 7.0)).abs() < 1e-15);
        let g = Freq::from_f64(0.25);
        assert_eq!(g.phase(3), 0.75);
    }

    #[test]
    fn params_for_squares() {
        let hp = HarmonicParams::new(&IntPoly::from_i64(&[0, 0, 1]), 1e6).unwrap();
        assert!((hp.y - 1000.0).abs() < 1e-6);
        assert_eq!(hp.big_k, 4);
        assert!(!hp.weyl_range_ok(1000.0));
    }
}
