//! Small integer helpers shared across modules.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

/// Primes `p <= n` by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// Trial-division factorization, primes ascending.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factor_u64(n).len() == 1 && factor_u64(n)[0].1 == 1
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// `p`-adic valuation; `None` for zero.
pub fn valuation(x: &BigInt, p: u64) -> Option<u32> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut v = 0;
    let mut y = x.clone();
    loop {
        let (q, r) = y.div_rem(&p);
        if !r.is_zero() {
            return Some(v);
        }
        y = q;
        v += 1;
    }
}

/// Nonnegative residue of `x` modulo `m`.
pub fn mod_floor(x: &BigInt, m: &BigInt) -> BigInt {
    x.mod_floor(m)
}

pub fn mod_u64(x: &BigInt, m: u64) -> u64 {
    x.mod_floor(&BigInt::from(m)).to_u64().unwrap()
}

pub fn pow_u64(p: u64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), e as usize)
}

/// Modular inverse of `a` mod `m` for coprime inputs.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// Chinese remaindering over pairwise coprime moduli; result in `[0, M)`.
pub fn crt(residues: &[(BigInt, BigInt)]) -> (BigInt, BigInt) {
    let mut x = BigInt::zero();
    let mut m = BigInt::one();
    for (r, n) in residues {
        let inv = mod_inverse(&m, n).expect("moduli must be coprime");
        let t = ((r - &x) * inv).mod_floor(n);
        x += &m * t;
        m *= n;
        x = x.mod_floor(&m);
    }
    (x, m)
}

/// Integers with magnitude above 2^53 become decimal strings so that JSON
/// readers using doubles do not lose digits.
pub fn int_json(x: &BigInt) -> Value {
    const LIMIT: i64 = 1 << 53;
    match x.to_i64() {
        Some(v) if v.abs() <= LIMIT => Value::from(v),
        _ => Value::String(x.to_string()),
    }
}

pub fn uint_json(x: &BigUint) -> Value {
    int_json(&BigInt::from_biguint(Sign::Plus, x.clone()))
}

/// Reads an integer written either as a JSON number or a decimal string.
pub fn int_from_json(v: &Value) -> Option<BigInt> {
    match v {
        Value::Number(n) => n.as_i64().map(BigInt::from).or_else(|| n.as_u64().map(BigInt::from)),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Natural log of a big integer, accurate for huge values.
pub fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.abs().to_f64().unwrap().ln();
    }
    let shift = bits - 60;
    let top = (x.abs() >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Float text with 17 significant digits, enough to round-trip any double.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_primes() {
        assert_eq!(primes_up_to(20), vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(factor_u64(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factor_u64(97), vec![(97, 1)]);
        assert!(factor_u64(1).is_empty());
        assert!(is_prime(101) && !is_prime(91));
    }

    #[test]
    fn crt_combines() {
        let (x, m) = crt(&[(BigInt::from(1), BigInt::from(2)), (BigInt::from(2), BigInt::from(3))]);
        assert_eq!((x, m), (BigInt::from(5), BigInt::from(6)));
    }

    #[test]
    fn json_switches_to_strings() {
        assert_eq!(int_json(&BigInt::from(12)), Value::from(12));
        let big = BigInt::from(1u64 << 60);
        assert_eq!(int_json(&big), Value::String(big.to_string()));
        assert_eq!(int_from_json(&int_json(&big)), Some(big));
    }

    #[test]
    fn compensated_sum() {
        let mut k = KahanSum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            k.add(x);
        }
        assert_eq!(k.value(), 2.0);
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn valuations() {
        assert_eq!(valuation(&BigInt::from(48), 2), Some(4));
        assert_eq!(valuation(&BigInt::from(0), 2), None);
        assert_eq!(valuation(&BigInt::from(-9), 3), Some(2));
    }
}
