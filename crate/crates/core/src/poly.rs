//! Exact integer polynomials.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Polynomial with integer coefficients, constant term first. The zero
/// polynomial has no stored coefficients and reports degree 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// The polynomial `x`.
    pub fn x() -> Self {
        Self::from_i64(&[0, 1])
    }

    pub fn constant(c: BigInt) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    pub fn max_abs_coeff(&self) -> BigInt {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_default()
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_i64(&self, x: i64) -> BigInt {
        self.eval(&BigInt::from(x))
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap();
        }
        acc
    }

    /// Coefficients reduced into `[0, m)`, for repeated evaluation mod `m`.
    pub fn residues_mod(&self, m: u64) -> Vec<u64> {
        let mb = BigInt::from(m);
        self.coeffs.iter().map(|c| c.mod_floor(&mb).to_u64().unwrap()).collect()
    }

    pub fn derivative(&self) -> IntPoly {
        IntPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        IntPoly::new((0..n).map(|i| self.coeff(i) - other.coeff(i)).collect())
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::default();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        IntPoly::new(out)
    }

    pub fn scale(&self, c: &BigInt) -> IntPoly {
        IntPoly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Divides every coefficient by `d`, or `None` if some coefficient is
    /// not a multiple of `d`.
    pub fn div_exact_scalar(&self, d: &BigInt) -> Option<IntPoly> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            let (q, r) = c.div_rem(d);
            if !r.is_zero() {
                return None;
            }
            out.push(q);
        }
        Some(IntPoly::new(out))
    }

    /// The polynomial `n -> self(r + ell * n)`.
    pub fn compose_affine(&self, r: &BigInt, ell: &BigInt) -> IntPoly {
        let lin = IntPoly::new(vec![r.clone(), ell.clone()]);
        let mut acc = IntPoly::default();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&lin).add(&IntPoly::constant(c.clone()));
        }
        acc
    }

    pub fn shift(&self, c: &BigInt) -> IntPoly {
        self.compose_affine(c, &BigInt::one())
    }

    /// Smallest shift `C >= 0` such that `g(n) = h(n + C)` has `g, g', g''`
    /// strictly positive at every integer `n >= 1`.
    pub fn normalize_positive(&self) -> Result<(IntPoly, BigInt)> {
        if self.degree() < 2 {
            return Err(Error::DegreeTooSmall { min: 2, got: self.degree() });
        }
        if !self.leading().is_positive() {
            return Err(Error::NonPositiveLeading);
        }
        let mut c = BigInt::zero();
        loop {
            let g = self.shift(&c);
            let g1 = g.derivative();
            let g2 = g1.derivative();
            if [&g, &g1, &g2].iter().all(|p| p.positive_on_naturals()) {
                return Ok((g, c));
            }
            c += 1;
        }
    }

    /// Whether `p(n) > 0` for every integer `n >= 1`. Beyond the Cauchy root
    /// bound the sign is that of the leading coefficient, so only finitely
    /// many integers need checking.
    pub fn positive_on_naturals(&self) -> bool {
        if !self.leading().is_positive() {
            return false;
        }
        let lead = self.leading();
        let m = self.coeffs[..self.coeffs.len() - 1].iter().map(|c| c.abs()).max();
        let bound = match m {
            None => BigInt::one(),
            Some(m) => BigInt::one() + m.div_ceil(&lead),
        };
        let mut n = BigInt::one();
        while n <= bound {
            if !self.eval(&n).is_positive() {
                return false;
            }
            n += 1;
        }
        true
    }

    pub fn content(&self) -> BigInt {
        self.coeffs.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Primitive part with positive leading coefficient.
    pub fn primitive(&self) -> IntPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut g = self.content();
        if self.leading().is_negative() {
            g = -g;
        }
        self.div_exact_scalar(&g).unwrap()
    }

    fn to_rational(&self) -> Vec<BigRational> {
        self.coeffs.iter().map(|c| BigRational::from_integer(c.clone())).collect()
    }

    fn from_rational(c: &[BigRational]) -> IntPoly {
        let den = c.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
        IntPoly::new(c.iter().map(|x| (x * BigRational::from_integer(den.clone())).to_integer()).collect())
    }

    /// Division with remainder over the rationals; both results are scaled
    /// to primitive integer polynomials when `primitive` is set.
    fn divrem_q(&self, d: &IntPoly) -> (Vec<BigRational>, Vec<BigRational>) {
        let mut r = self.to_rational();
        let dq = d.to_rational();
        let dl = dq.last().unwrap().clone();
        let mut q = vec![BigRational::zero(); self.coeffs.len().saturating_sub(d.coeffs.len()) + 1];
        while r.len() >= dq.len() && !r.is_empty() {
            let shift = r.len() - dq.len();
            let f = r.last().unwrap() / &dl;
            for (i, c) in dq.iter().enumerate() {
                r[shift + i] -= &f * c;
            }
            q[shift] = f;
            while r.last().is_some_and(|c| c.is_zero()) {
                r.pop();
            }
        }
        (q, r)
    }

    /// Exact quotient of primitive polynomials, up to sign and content.
    pub fn div_primitive(&self, d: &IntPoly) -> IntPoly {
        let (q, r) = self.divrem_q(d);
        debug_assert!(r.is_empty());
        IntPoly::from_rational(&q).primitive()
    }

    /// Greatest common divisor as a primitive polynomial.
    pub fn gcd(&self, other: &IntPoly) -> IntPoly {
        let mut a = self.primitive();
        let mut b = other.primitive();
        while !b.is_zero() {
            let (_, r) = a.divrem_q(&b);
            a = b;
            b = IntPoly::from_rational(&r).primitive();
        }
        a.primitive()
    }

    /// Splits `self` into primitive squarefree factors `s_m` such that every
    /// root of `s_m` has multiplicity exactly `m` in `self`.
    pub fn squarefree_decomposition(&self) -> Vec<(IntPoly, u32)> {
        if self.degree() == 0 {
            return Vec::new();
        }
        // G_0 = h, G_i = gcd(G_{i-1}, G_{i-1}'); G_{i-1}/G_i collects the
        // factors of multiplicity at least i.
        let mut chain = vec![self.primitive()];
        while chain.last().unwrap().degree() > 0 {
            let g = chain.last().unwrap();
            chain.push(g.gcd(&g.derivative()));
        }
        let kernels: Vec<IntPoly> = chain.windows(2).map(|w| w[0].div_primitive(&w[1])).collect();
        let mut out = Vec::new();
        for i in 0..kernels.len() {
            let s = match kernels.get(i + 1) {
                Some(next) => kernels[i].div_primitive(next),
                None => kernels[i].clone(),
            };
            if s.degree() > 0 {
                out.push((s, i as u32 + 1));
            }
        }
        out
    }

    /// Resultant via the Sylvester matrix and fraction-free elimination.
    pub fn resultant(&self, other: &IntPoly) -> BigInt {
        let (m, n) = (self.degree(), other.degree());
        if self.is_zero() || other.is_zero() {
            return BigInt::zero();
        }
        let size = m + n;
        if size == 0 {
            return BigInt::one();
        }
        let mut a = vec![vec![BigInt::zero(); size]; size];
        for i in 0..n {
            for (j, c) in self.coeffs.iter().rev().enumerate() {
                a[i][i + j] = c.clone();
            }
        }
        for i in 0..m {
            for (j, c) in other.coeffs.iter().rev().enumerate() {
                a[n + i][i + j] = c.clone();
            }
        }
        bareiss_det(a)
    }
}

fn bareiss_det(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Horner evaluation of reduced coefficients modulo `m`.
pub fn eval_mod(res: &[u64], x: u64, m: u64) -> u64 {
    let (x, m) = (x as u128 % m as u128, m as u128);
    let mut acc: u128 = 0;
    for &c in res.iter().rev() {
        acc = (acc * x + c as u128) % m;
    }
    acc as u64
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
            }
            first = false;
            let show = i == 0 || !mag.is_one();
            if show {
                write!(f, "{mag}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for IntPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        let mut coeffs = Vec::with_capacity(raw.len());
        for v in raw {
            let c = crate::arith::int_from_json(&v)
                .ok_or_else(|| D::Error::custom(format!("bad coefficient {v}")))?;
            coeffs.push(c);
        }
        Ok(IntPoly::new(coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[i64]) -> IntPoly {
        IntPoly::from_i64(c)
    }

    #[test]
    fn eval_and_derivative() {
        let h = p(&[-1, 0, 1]);
        assert_eq!(h.eval_i64(5), BigInt::from(24));
        assert_eq!(h.derivative(), p(&[0, 2]));
        assert_eq!(p(&[7]).derivative(), IntPoly::default());
        assert_eq!(IntPoly::default().degree(), 0);
        assert_eq!(p(&[1, 2, 0, 0]).degree(), 1);
    }

    #[test]
    fn affine_composition() {
        // x^2 - 1 at -5 + 6n
        let h = p(&[-1, 0, 1]);
        let g = h.compose_affine(&BigInt::from(-5), &BigInt::from(6));
        assert_eq!(g, p(&[24, -60, 36]));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(p(&[0, 0, 1]).normalize_positive().unwrap(), (p(&[0, 0, 1]), BigInt::from(0)));
        assert_eq!(p(&[0, -3, 1]).normalize_positive().unwrap(), (p(&[0, 3, 1]), BigInt::from(3)));
        assert_eq!(p(&[-1, 0, 1]).normalize_positive().unwrap(), (p(&[0, 2, 1]), BigInt::from(1)));
        assert!(p(&[0, 1]).normalize_positive().is_err());
        assert!(p(&[0, 0, -1]).normalize_positive().is_err());
    }

    #[test]
    fn squarefree_parts() {
        // x^2 (x - 1)
        let h = p(&[0, 0, -1, 1]);
        let parts = h.squarefree_decomposition();
        assert_eq!(parts, vec![(p(&[-1, 1]), 1), (p(&[0, 1]), 2)]);
        let h = p(&[-1, 0, 1]).mul(&p(&[-1, 0, 1])).mul(&p(&[2, 1]));
        let parts = h.squarefree_decomposition();
        assert_eq!(parts, vec![(p(&[2, 1]), 1), (p(&[-1, 0, 1]), 2)]);
    }

    #[test]
    fn resultants() {
        // disc-like: Res(x^2 - 1, 2x) = -4 up to sign convention
        assert_eq!(p(&[-1, 0, 1]).resultant(&p(&[0, 2])).abs(), BigInt::from(4));
        assert_eq!(p(&[0, 0, 1]).resultant(&p(&[0, 2])), BigInt::from(0));
        assert_eq!(p(&[-2, 1]).resultant(&p(&[-3, 1])).abs(), BigInt::from(1));
    }

    #[test]
    fn json_roundtrip() {
        let h = p(&[-13, 0, 1]);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"["-13","0","1"]"#);
        let back: IntPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert_eq!(h.to_string(), "x^2 - 13");
    }

    fn arb_poly() -> impl Strategy<Value = IntPoly> {
        proptest::collection::vec(-50i64..50, 1..6).prop_map(|c| IntPoly::from_i64(&c))
    }

    proptest! {
        #[test]
        fn composition_agrees_with_eval(h in arb_poly(), r in -20i64..20, ell in 1i64..20, n in -30i64..30) {
            let g = h.compose_affine(&BigInt::from(r), &BigInt::from(ell));
            prop_assert_eq!(g.eval_i64(n), h.eval_i64(r + ell * n));
        }

        #[test]
        fn chain_rule(h in arb_poly(), r in -20i64..20, ell in 1i64..20, n in -30i64..30) {
            let g = h.compose_affine(&BigInt::from(r), &BigInt::from(ell));
            prop_assert_eq!(g.derivative().eval_i64(n), h.derivative().eval_i64(r + ell * n) * ell);
        }

        #[test]
        fn normalized_is_positive(mut c in proptest::collection::vec(-30i64..30, 3..5), lead in 1i64..4) {
            *c.last_mut().unwrap() = lead;
            let h = IntPoly::from_i64(&c);
            let (g, shift) = h.normalize_positive().unwrap();
            let (g1, g2) = (g.derivative(), g.derivative().derivative());
            for n in 1..=1000i64 {
                prop_assert!(g.eval_i64(n) > BigInt::zero());
                prop_assert!(g1.eval_i64(n) > BigInt::zero());
                prop_assert!(g2.eval_i64(n) > BigInt::zero());
            }
            if shift > BigInt::zero() {
                let prev = h.shift(&(shift - 1));
                let ok = prev.positive_on_naturals()
                    && prev.derivative().positive_on_naturals()
                    && prev.derivative().derivative().positive_on_naturals();
                prop_assert!(!ok);
            }
        }

        #[test]
        fn mod_eval_matches(h in arb_poly(), x in 0u64..1000, m in 2u64..500) {
            let expect = crate::arith::mod_u64(&h.eval(&BigInt::from(x)), m);
            prop_assert_eq!(eval_mod(&h.residues_mod(m), x, m), expect);
        }
    }
}
