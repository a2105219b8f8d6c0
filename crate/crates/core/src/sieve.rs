//! Local sieve data for `h_l'`: the exponents `gamma(p)`, root counts
//! `j(p)`, the sets `W(U)` and `W^q(U)`, and the normalising factor `J`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arith::primes_up_to;
use crate::error::{Error, Result};
use crate::intersective::AuxiliaryContext;
use crate::poly::{eval_mod, IntPoly};

/// The condition imposed at one prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalSieve {
    pub p: u64,
    pub gamma: u32,
    pub j: u64,
    /// `p^gamma`.
    pub modulus: u64,
    /// Residues mod `p^gamma` where `h_l'` vanishes, ascending.
    pub bad: Vec<u64>,
}

impl LocalSieve {
    pub fn excludes(&self, n: u64) -> bool {
        self.bad.binary_search(&(n % self.modulus)).is_ok()
    }
}

/// Smallest `gamma` such that `h'` is not identically zero as a function
/// mod `p^gamma`, together with the number of its roots there.
pub fn local_data(aux: &IntPoly, p: u64) -> Result<LocalSieve> {
    let d = aux.derivative();
    if d.is_zero() {
        return Err(Error::DegreeTooSmall { min: 1, got: 0 });
    }
    let mut gamma = 1u32;
    let mut modulus = p;
    loop {
        let res = d.residues_mod(modulus);
        let bad: Vec<u64> = (0..modulus).filter(|&n| eval_mod(&res, n, modulus) == 0).collect();
        if (bad.len() as u64) < modulus {
            return Ok(LocalSieve { p, gamma, j: bad.len() as u64, modulus, bad });
        }
        gamma += 1;
        modulus = modulus
            .checked_mul(p)
            .filter(|&m| m <= 1 << 32)
            .ok_or_else(|| Error::Limit(format!("p^gamma too large for p = {p}")))?;
    }
}

#[derive(Clone, Debug)]
pub struct SieveTable {
    pub aux: AuxiliaryContext,
    pub u: f64,
    pub entries: BTreeMap<u64, LocalSieve>,
    pub period: BigInt,
}

impl SieveTable {
    pub fn new(aux: &AuxiliaryContext, u: f64) -> Result<Self> {
        if u.is_nan() || u < 2.0 {
            return Err(Error::InvalidInput(format!("sieve level must be at least 2, got {u}")));
        }
        let primes = primes_up_to(u.floor() as u64);
        let locals: Vec<LocalSieve> =
            primes.par_iter().map(|&p| local_data(&aux.aux, p)).collect::<Result<_>>()?;
        let period = locals.iter().fold(BigInt::one(), |acc, l| acc * l.modulus);
        let entries = locals.into_iter().map(|l| (l.p, l)).collect();
        Ok(SieveTable { aux: aux.clone(), u, entries, period })
    }

    /// Conditions that apply for the optional modulus `q`: all of them, or
    /// only those with `p^gamma | q`.
    fn active(&self, q: Option<u64>) -> impl Iterator<Item = &LocalSieve> {
        self.entries.values().filter(move |l| q.is_none_or(|q| q % l.modulus == 0))
    }

    /// Membership in `W(U)`, or in `W^q(U)` when `q` is given.
    pub fn in_w(&self, n: u64, q: Option<u64>) -> bool {
        self.active(q).all(|l| !l.excludes(n))
    }

    /// `prod (1 - j/p^gamma)^(-1)` over all primes, or over those with
    /// `p^gamma` not dividing `q`.
    pub fn j_factor(&self, q: Option<u64>) -> BigRational {
        let mut acc = BigRational::one();
        for l in self.entries.values() {
            if q.is_some_and(|q| q % l.modulus == 0) {
                continue;
            }
            acc *= BigRational::new(BigInt::from(l.modulus), BigInt::from(l.modulus - l.j));
        }
        acc
    }

    pub fn j_factor_f64(&self) -> f64 {
        self.j_factor(None).to_f64().unwrap()
    }

    /// For each prime up to `U`, either `p` does not divide `q` or `p^gamma`
    /// does; outside this case the residue class mod `q` and the condition
    /// at `p` are not independent.
    pub fn admissible_modulus(&self, q: u64) -> bool {
        self.entries.values().all(|l| !q.is_multiple_of(l.p) || q.is_multiple_of(l.modulus))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "U": self.u,
            "ell": self.aux.ell,
            "entries": self.entries.values().map(|l| json!({"p": l.p, "gamma": l.gamma, "j": l.j})).collect::<Vec<_>>(),
            "period": self.period.to_string(),
        })
    }

    /// Empirical weighted count of `W` in a residue class against the
    /// sieve main term.
    pub fn brun_sum_audit(&self, q: u64, b: u64, t: u64) -> Result<BrunReport> {
        if q == 0 || t < q {
            return Err(Error::InvalidInput(format!("need t >= q >= 1, got t = {t}, q = {q}")));
        }
        let d = self.aux.aux.derivative();
        let b = b % q;
        let mut empirical = BigInt::zero();
        let start = if b == 0 { q } else { b };
        let mut n = start;
        while n <= t {
            if self.in_w(n, None) {
                empirical += d.eval(&BigInt::from(n));
            }
            n += q;
        }
        let density = self.j_factor(Some(q)).recip();
        let main = BigRational::from_integer(self.aux.aux.eval(&BigInt::from(t))) * density
            / BigRational::from_integer(BigInt::from(q));
        let main_term = main.to_f64().unwrap();
        let emp = empirical.to_f64().unwrap();
        let abs_error = (emp - main_term).abs();
        let rel_error = if main_term != 0.0 { abs_error / main_term.abs() } else { f64::INFINITY };
        let b_in_wq = self.in_w(b, Some(q));
        Ok(BrunReport {
            q,
            b,
            t,
            u: self.u,
            empirical: empirical.to_string(),
            main_term,
            abs_error,
            rel_error,
            b_in_wq,
            admissible: self.admissible_modulus(q),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrunReport {
    pub q: u64,
    pub b: u64,
    pub t: u64,
    #[serde(rename = "U")]
    pub u: f64,
    /// Exact value, as a decimal string.
    pub empirical: String,
    pub main_term: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Whether `b` lies in `W^q(U)`. When it does not, the class contains no
    /// element of `W` and the main term does not apply.
    pub b_in_wq: bool,
    /// Whether `q` is compatible with every local condition.
    pub admissible: bool,
}

impl BrunReport {
    pub fn main_term_applicable(&self) -> bool {
        self.b_in_wq && self.admissible
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::mod_u64;
    use proptest::prelude::*;

    fn derivative_vanishes(aux: &IntPoly, n: u64, m: u64) -> bool {
        mod_u64(&aux.derivative().eval(&BigInt::from(n)), m) == 0
    }

    fn ctx(c: &[i64]) -> AuxiliaryContext {
        AuxiliaryContext::identity(IntPoly::from_i64(c))
    }

    #[test]
    fn local_examples() {
        let l = local_data(&IntPoly::from_i64(&[0, 0, 1]), 2).unwrap();
        assert_eq!((l.gamma, l.j, l.bad.clone()), (2, 2, vec![0, 2]));
        let l = local_data(&IntPoly::from_i64(&[0, 0, 1]), 7).unwrap();
        assert_eq!((l.gamma, l.j), (1, 1));
        let l = local_data(&IntPoly::from_i64(&[1, -4, 3]), 3).unwrap();
        assert_eq!((l.gamma, l.j), (1, 0));
    }

    #[test]
    fn membership_examples() {
        let t = SieveTable::new(&ctx(&[0, 0, 1]), 3.0).unwrap();
        assert!(t.in_w(5, None));
        assert!(!t.in_w(4, None));
        let t2 = SieveTable::new(&ctx(&[0, 0, 1]), 2.0).unwrap();
        assert!((1..50).all(|n| t2.in_w(n, Some(5))));
    }

    #[test]
    fn j_examples() {
        let t = SieveTable::new(&ctx(&[0, 0, 1]), 3.0).unwrap();
        assert_eq!(t.j_factor(None), BigRational::from_integer(3.into()));
        let t = SieveTable::new(&ctx(&[0, 0, 1]), 2.0).unwrap();
        assert_eq!(t.j_factor(None), BigRational::from_integer(2.into()));
        let t = SieveTable::new(&ctx(&[1, -4, 3]), 3.0).unwrap();
        assert_eq!(t.entries[&3].j, 0);
        assert_eq!(t.j_factor(None), BigRational::from_integer(2.into()));
    }

    #[test]
    fn brun_examples() {
        let t = SieveTable::new(&ctx(&[0, 0, 1]), 2.0).unwrap();
        let r = t.brun_sum_audit(1, 0, 100).unwrap();
        assert_eq!(r.empirical, "5000");
        assert_eq!(r.main_term, 5000.0);
        let t = SieveTable::new(&ctx(&[0, 0, 1]), 3.0).unwrap();
        let r = t.brun_sum_audit(1, 0, 99).unwrap();
        assert_eq!((r.empirical.as_str(), r.main_term), ("3266", 3267.0));
        assert_eq!(r.abs_error, 1.0);
        let r = t.brun_sum_audit(2, 0, 99).unwrap();
        assert_eq!(r.empirical, "0");
        assert!(!r.admissible);
    }

    #[test]
    fn json_shape() {
        let t = SieveTable::new(&ctx(&[0, 0, 1]), 3.0).unwrap();
        let v = t.to_json();
        assert_eq!(v["period"], "12");
        assert_eq!(v["entries"][0], json!({"p": 2, "gamma": 2, "j": 2}));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn gamma_is_minimal(c in proptest::collection::vec(-40i64..40, 3..6), p_idx in 0usize..5) {
            let h = IntPoly::from_i64(&c);
            prop_assume!(h.degree() >= 2);
            let p = [2u64, 3, 5, 7, 11][p_idx];
            let l = local_data(&h, p).unwrap();
            prop_assert!(l.j < l.modulus);
            for n in 0..l.modulus {
                prop_assert_eq!(l.excludes(n), derivative_vanishes(&h, n, l.modulus));
            }
            if l.gamma > 1 {
                let lower = l.modulus / p;
                prop_assert!((0..lower).all(|n| derivative_vanishes(&h, n, lower)));
            }
        }

        #[test]
        fn restricted_membership_matches_full(n in 1u64..10_000) {
            let t = SieveTable::new(&ctx(&[0, 0, 1]), 7.0).unwrap();
            let period = t.period.to_u64().unwrap();
            prop_assert_eq!(t.in_w(n, Some(period)), t.in_w(n, None));
        }
    }
}
