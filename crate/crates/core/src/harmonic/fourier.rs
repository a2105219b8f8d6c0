use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rustfft::FftPlanner;
use serde::Serialize;

use super::{e, Freq, SmoothWeight};
use crate::arith::{fmt17, KahanSum};
use crate::error::{Error, Result};
use crate::intersective::AuxiliaryContext;
use crate::search::AvoidingSet;
use crate::sieve::SieveTable;

/// A finitely supported real function on the integers.
pub trait Signal {
    /// `(n, f(n))` for every `n` in the support.
    fn support(&self) -> Vec<(i64, f64)>;
    fn describe(&self) -> String;
}

impl Signal for AvoidingSet {
    fn support(&self) -> Vec<(i64, f64)> {
        self.members().into_iter().map(|n| (n as i64, 1.0)).collect()
    }

    fn describe(&self) -> String {
        format!("set(X={}, size={})", self.x(), self.len())
    }
}

/// A plain list of points, mostly for tests and balanced functions.
impl Signal for Vec<(i64, f64)> {
    fn support(&self) -> Vec<(i64, f64)> {
        self.clone()
    }

    fn describe(&self) -> String {
        format!("points({})", self.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImagePoint {
    pub n: u64,
    pub v: u64,
    pub weight: f64,
}

/// The even weight `g` on `+-h_l(n)` for `n` in `W_l(U)` with `h_l(n) <= X`,
/// carrying `J * h_l'(n) * w(h_l(n) / X)`.
#[derive(Clone, Debug)]
pub struct WeightedImage {
    pub table: SieveTable,
    pub x: u64,
    pub u: f64,
    pub j: f64,
    /// The positive half, sorted by value.
    pub points: Vec<ImagePoint>,
    /// `2 X * integral of w`, the mass the construction aims at.
    pub expected_mass: f64,
}

impl WeightedImage {
    pub fn build(aux: &AuxiliaryContext, x: u64, u: f64, w: &SmoothWeight) -> Result<Self> {
        let table = SieveTable::new(aux, u)?;
        Self::with_table(&table, x, w)
    }

    pub fn with_table(table: &SieveTable, x: u64, w: &SmoothWeight) -> Result<Self> {
        let h = &table.aux.aux;
        let d = h.derivative();
        let j = table.j_factor_f64();
        let xb = BigInt::from(x);
        let mut points = Vec::new();
        let mut prev = BigInt::zero();
        let mut n = 1u64;
        loop {
            let v = h.eval(&BigInt::from(n));
            if v > xb {
                break;
            }
            let dv = d.eval(&BigInt::from(n));
            if v <= prev || dv <= BigInt::zero() {
                return Err(Error::InvalidInput(format!("auxiliary polynomial not positive and increasing at n = {n}")));
            }
            if table.in_w(n, None) {
                let vu = v.to_u64().unwrap();
                let weight = j * dv.to_f64().unwrap() * w.eval(vu as f64 / x as f64);
                points.push(ImagePoint { n, v: vu, weight });
            }
            prev = v;
            n += 1;
        }
        Ok(WeightedImage { table: table.clone(), x, u: table.u, j, points, expected_mass: 2.0 * x as f64 * w.mass() })
    }

    pub fn aux(&self) -> &AuxiliaryContext {
        &self.table.aux
    }

    /// `g(v)`.
    pub fn value_at(&self, v: i64) -> f64 {
        let a = v.unsigned_abs();
        match self.points.binary_search_by_key(&a, |p| p.v) {
            Ok(i) => self.points[i].weight,
            Err(_) => 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        let mut k = KahanSum::default();
        for p in &self.points {
            k.add(2.0 * p.weight);
        }
        k.value()
    }

    pub fn max_value(&self) -> u64 {
        self.points.last().map_or(0, |p| p.v)
    }
}

impl Signal for WeightedImage {
    fn support(&self) -> Vec<(i64, f64)> {
        let mut out = Vec::with_capacity(2 * self.points.len());
        for p in &self.points {
            out.push((p.v as i64, p.weight));
            out.push((-(p.v as i64), p.weight));
        }
        out
    }

    fn describe(&self) -> String {
        format!("image(ell={}, X={}, U={})", self.table.aux.ell, self.x, self.u)
    }
}

/// `f^(theta) = sum f(n) e(-n theta)`, with phases reduced exactly and
/// compensated accumulation.
pub fn fourier_point<S: Signal + ?Sized>(source: &S, theta: Freq) -> Complex64 {
    let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
    for (n, f) in source.support() {
        let z = e(-theta.phase(n)) * f;
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value())
}

/// `f^(j / N)` for `j = 0..N`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub source: String,
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,re,im,magnitude\n");
        for (j, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{j},{},{},{}\n", fmt17(v.re), fmt17(v.im), fmt17(v.norm())));
        }
        s
    }

    pub fn at(&self, j: usize) -> Complex64 {
        self.values[j % self.n]
    }
}

pub fn fourier_grid<S: Signal + ?Sized>(source: &S, n: usize) -> Result<Spectrum> {
    let support = source.support();
    let max = support.iter().map(|(v, _)| v.unsigned_abs()).max().unwrap_or(0);
    let need = 2 * max as usize + 1;
    if n < need {
        return Err(Error::GridTooSmall { n, need });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (v, f) in support {
        buf[v.rem_euclid(n as i64) as usize] += f;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(Spectrum { source: source.describe(), n, values: buf })
}
