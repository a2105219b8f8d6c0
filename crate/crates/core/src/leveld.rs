//! Pairwise coprime modulus families, the covering number `l(r)`, fraction
//! lifting onto products of family members, and a numerical audit of the
//! arithmetic level-d inequality.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arith::{factor_u64, primes_up_to, KahanSum};
use crate::error::{Error, Result};
use crate::search::AvoidingSet;

/// `C_0` in the level-d bound.
pub const C0: f64 = 8192.0;
/// Largest product of moduli the audit will transform.
pub const MAX_PRODUCT: u64 = 1 << 24;
const MAX_PRIME_RANGE: f64 = 1e8;
const MAX_SUBSETS: usize = 1 << 16;

/// A positive integer kept as its factorisation, primes ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FactoredInt {
    pub factors: Vec<(u64, u32)>,
    #[serde(skip)]
    pub value: BigUint,
}

impl FactoredInt {
    pub fn new(mut factors: Vec<(u64, u32)>) -> Self {
        factors.retain(|f| f.1 > 0);
        factors.sort_unstable();
        let value = factors.iter().fold(BigUint::one(), |acc, &(p, b)| acc * BigUint::from(p).pow(b));
        FactoredInt { factors, value }
    }

    pub fn from_u64(n: u64) -> Self {
        FactoredInt::new(factor_u64(n))
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.value.to_u64()
    }

    pub fn is_prime_power(&self) -> bool {
        self.factors.len() == 1
    }

    pub fn ln(&self) -> f64 {
        self.factors.iter().map(|&(p, b)| b as f64 * (p as f64).ln()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum FamilyKind {
    /// Smooth cutoff `L^(2+eps)`, exponent `ceil(2(2+eps)L)`, largest
    /// modulus `max(C1 alpha^-(2+eps), L^(2+eps))`.
    First { c1: f64 },
    /// Smooth cutoff `C3 L^(3+eps)`, exponent `ceil(2(2+eps)(ln L)^2)`,
    /// largest modulus `max(C2 L^((2+eps) floor(ln L)), C3 L^(3+eps))`.
    Second { c2: f64, c3: f64 },
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusFamily {
    pub kind: FamilyKind,
    pub alpha: f64,
    pub epsilon: f64,
    /// Primes up to this all sit in the distinguished member.
    pub smooth_cutoff: f64,
    pub p_max: f64,
    /// The distinguished member comes first when present.
    pub members: Vec<FactoredInt>,
    pub distinguished: Option<usize>,
    /// Prime to (member index, exponent).
    #[serde(skip)]
    index: BTreeMap<u64, (usize, u32)>,
}

impl ModulusFamily {
    pub fn build(kind: FamilyKind, alpha: f64, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) || epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!("need 0 < alpha < 1/2 and eps > 0, got {alpha}, {epsilon}")));
        }
        let l = (1.0 / alpha).ln();
        let s = 2.0 + epsilon;
        let (cutoff, exponent, p_max) = match kind {
            FamilyKind::First { c1 } => {
                let y = l.powf(s);
                (y, (2.0 * s * l).ceil(), (c1 * alpha.powf(-s)).max(y))
            }
            FamilyKind::Second { c2, c3 } => {
                let y = c3 * l.powf(s + 1.0);
                (y, (2.0 * s * l.ln().powi(2)).ceil(), (c2 * l.powf(s * l.ln().floor())).max(y))
            }
            FamilyKind::Custom => return Err(Error::InvalidInput("custom families are built from members".into())),
        };
        if p_max > MAX_PRIME_RANGE {
            return Err(Error::Limit(format!("largest modulus {p_max:.3e} too large to enumerate primes")));
        }
        let primes = primes_up_to(p_max.floor() as u64);
        let mut members = Vec::new();
        let small: Vec<(u64, u32)> =
            primes.iter().filter(|&&p| (p as f64) <= cutoff).map(|&p| (p, exponent.max(1.0) as u32)).collect();
        let distinguished = if small.is_empty() {
            None
        } else {
            members.push(FactoredInt::new(small));
            Some(0)
        };
        for &p in primes.iter().filter(|&&p| (p as f64) > cutoff) {
            let mut b = 1u32;
            while ((p as f64).powi(b as i32 + 1)) <= p_max {
                b += 1;
            }
            members.push(FactoredInt::new(vec![(p, b)]));
        }
        let mut fam =
            ModulusFamily { kind, alpha, epsilon, smooth_cutoff: cutoff, p_max, members, distinguished, index: BTreeMap::new() };
        fam.reindex()?;
        Ok(fam)
    }

    pub fn custom(members: &[u64]) -> Result<Self> {
        let members: Vec<FactoredInt> = members.iter().map(|&m| FactoredInt::from_u64(m)).collect();
        if members.iter().any(|m| m.value.is_zero() || m.value.is_one()) {
            return Err(Error::InvalidInput("members must exceed 1".into()));
        }
        let mut fam = ModulusFamily {
            kind: FamilyKind::Custom,
            alpha: f64::NAN,
            epsilon: f64::NAN,
            smooth_cutoff: 0.0,
            p_max: 0.0,
            members,
            distinguished: None,
            index: BTreeMap::new(),
        };
        fam.reindex()?;
        Ok(fam)
    }

    /// Builds the prime index, failing if two members share a prime.
    fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        for (i, m) in self.members.iter().enumerate() {
            for &(p, b) in &m.factors {
                if self.index.insert(p, (i, b)).is_some() {
                    return Err(Error::InvalidInput(format!("members share the prime {p}")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn pairwise_coprime(&self) -> bool {
        let vals: Vec<&BigUint> = self.members.iter().map(|m| &m.value).collect();
        (0..vals.len()).all(|i| (i + 1..vals.len()).all(|j| vals[i].gcd(vals[j]).is_one()))
    }

    /// Members as machine integers, when they all fit.
    pub fn small_members(&self) -> Option<Vec<u64>> {
        self.members.iter().map(|m| m.to_u64()).collect()
    }

    /// Members of a minimal `S` with `r | prod S`, ascending; `None` when no
    /// such `S` exists. Pairwise coprimality makes the owner of each prime
    /// unique, so the cover is forced.
    pub fn cover(&self, r: u64) -> Option<Vec<usize>> {
        let mut s = Vec::new();
        for (p, e) in factor_u64(r) {
            let &(i, b) = self.index.get(&p)?;
            if b < e {
                return None;
            }
            s.push(i);
        }
        s.sort_unstable();
        s.dedup();
        Some(s)
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "smooth_cutoff": self.smooth_cutoff,
            "p_max": self.p_max,
            "members": self.members.iter().map(|m| m.factors.iter().map(|&(p, b)| serde_json::json!({"p": p, "b": b})).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "distinguished": self.distinguished.map(|i| self.members[i].factors.iter().map(|f| f.1).collect::<Vec<_>>()),
        })
    }
}

/// `min |S|` over `S` in the family with `r | prod S`.
pub fn l_value(r: u64, family: &ModulusFamily) -> Option<usize> {
    family.cover(r).map(|s| s.len())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lift {
    /// Indices into the family.
    pub subset: Vec<usize>,
    pub r_s: BigUint,
    pub b: BigUint,
}

/// Writes `a/q = b / R_S` with `|S| = l(q)` and no member of `S` dividing `b`.
pub fn lift_fraction(a: u64, q: u64, family: &ModulusFamily) -> Result<Lift> {
    if q == 0 || a.gcd(&q) != 1 {
        return Err(Error::NotCoprime { a: a as i64, q });
    }
    let subset = family.cover(q).ok_or_else(|| Error::InvalidInput(format!("{q} is not covered by the family")))?;
    let r_s = subset.iter().fold(BigUint::one(), |acc, &i| acc * &family.members[i].value);
    let b = BigUint::from(a) * (&r_s / BigUint::from(q));
    debug_assert!(&b * BigUint::from(q) == BigUint::from(a) * &r_s);
    debug_assert!(subset.iter().all(|&i| !(&b % &family.members[i].value).is_zero()));
    Ok(Lift { subset, r_s, b })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypotheses {
    pub alpha_range: bool,
    /// `alpha > 2 X^(-1/2)`.
    pub alpha_floor: bool,
    /// `max q <= X^(1/(32 L))`.
    pub modulus_cap: bool,
    /// `d <= L / 2^7`.
    pub d_range: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.alpha_range && self.alpha_floor && self.modulus_cap && self.d_range
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityWitness {
    pub subset: Vec<u64>,
    pub modulus: u64,
    pub r: u64,
    pub length: u64,
    pub average: f64,
    /// `2^|S| alpha`.
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelDVerdict {
    BoundHolds,
    DensityBranch,
    Both,
    Counterexample,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelDReport {
    pub x: usize,
    pub d: usize,
    pub alpha: f64,
    pub lhs: f64,
    /// `alpha^2 X^2 (C_0 L / d)^d`.
    pub rhs: f64,
    /// Per subset: its members and its share of the left side.
    pub terms: Vec<(Vec<u64>, f64)>,
    /// Best progression found, by ratio of average to threshold.
    pub witness: Option<DensityWitness>,
    pub density_fires: bool,
    pub hypotheses: Hypotheses,
    pub hypotheses_hold: bool,
    pub verdict: LevelDVerdict,
}

fn subsets_of_size(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < d - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    rec(0, n, d, &mut cur, &mut out);
    out
}

/// Values of `f` at `1..=X`.
pub fn indicator(a: &AvoidingSet) -> Vec<Complex64> {
    (1..=a.x()).map(|n| Complex64::new(if a.contains(n) { 1.0 } else { 0.0 }, 0.0)).collect()
}

/// `f^(a/R)` for every `a mod R`.
pub(crate) fn transform_mod(f: &[Complex64], r: u64) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); r as usize];
    for (i, v) in f.iter().enumerate() {
        c[(i + 1) % r as usize] += v;
    }
    FftPlanner::new().plan_fft_forward(r as usize).process(&mut c);
    c
}

/// The left side of the level-d inequality for `f` on `[X]` (`f[x-1] =
/// f(x)`), both branches of the dichotomy, and the status of its
/// hypotheses.
pub fn level_d_audit(f: &[Complex64], family: &ModulusFamily, d: usize, alpha: f64) -> Result<LevelDReport> {
    let x = f.len();
    if d == 0 || d > family.len() {
        return Err(Error::InvalidInput(format!("d = {d} outside 1..={}", family.len())));
    }
    if f.iter().any(|v| v.norm() > 1.0 + 1e-12) {
        return Err(Error::InvalidInput("need |f| <= 1".into()));
    }
    let q = family.small_members().ok_or_else(|| Error::Limit("family members exceed 64 bits".into()))?;
    let l = (1.0 / alpha).ln();
    let xf = x as f64;
    let max_q = q.iter().copied().max().unwrap_or(1) as f64;
    let hypotheses = Hypotheses {
        alpha_range: alpha > 0.0 && alpha < 0.5,
        alpha_floor: alpha > 2.0 / xf.sqrt(),
        modulus_cap: max_q.ln() <= xf.ln() / (32.0 * l),
        d_range: d as f64 <= l / 128.0,
    };

    let product = |s: &[usize]| -> Result<u64> {
        s.iter().try_fold(1u64, |acc, &i| {
            acc.checked_mul(q[i])
                .filter(|&p| p <= MAX_PRODUCT)
                .ok_or_else(|| Error::Limit(format!("product of moduli exceeds {MAX_PRODUCT}")))
        })
    };

    let subsets = subsets_of_size(q.len(), d);
    if subsets.len() > MAX_SUBSETS {
        return Err(Error::Limit(format!("{} subsets of size {d}", subsets.len())));
    }
    let terms: Vec<(Vec<u64>, f64)> = subsets
        .par_iter()
        .map(|s| {
            let r = product(s)?;
            let vals = transform_mod(f, r);
            let mut acc = KahanSum::default();
            for (a, v) in vals.iter().enumerate() {
                if s.iter().all(|&i| !(a as u64).is_multiple_of(q[i])) {
                    acc.add(v.norm_sqr());
                }
            }
            Ok((s.iter().map(|&i| q[i]).collect(), acc.value()))
        })
        .collect::<Result<_>>()?;
    let mut lhs = KahanSum::default();
    for t in &terms {
        lhs.add(t.1);
    }
    let lhs = lhs.value();
    let rhs = alpha * alpha * xf * xf * (C0 * l / d as f64).powi(d as i32);

    let max_size = ((2.0 * l).floor() as usize).min(q.len());
    let mut all = Vec::new();
    for k in 1..=max_size {
        all.extend(subsets_of_size(q.len(), k));
        if all.len() > MAX_SUBSETS {
            return Err(Error::Limit(format!("more than {MAX_SUBSETS} progressions families to scan")));
        }
    }
    let abs: Vec<f64> = f.iter().map(|v| v.norm()).collect();
    let witnesses: Vec<DensityWitness> = all
        .par_iter()
        .filter_map(|s| {
            let r = product(s).ok()?;
            let mut sum = vec![0.0f64; r as usize];
            let mut len = vec![0u64; r as usize];
            for (i, v) in abs.iter().enumerate() {
                let c = (i + 1) % r as usize;
                sum[c] += v;
                len[c] += 1;
            }
            let threshold = 2f64.powi(s.len() as i32) * alpha;
            (0..r as usize)
                .filter(|&c| len[c] > 0)
                .map(|c| DensityWitness {
                    subset: s.iter().map(|&i| q[i]).collect(),
                    modulus: r,
                    r: c as u64,
                    length: len[c],
                    average: sum[c] / len[c] as f64,
                    threshold,
                })
                .max_by(|a, b| (a.average / a.threshold).total_cmp(&(b.average / b.threshold)))
        })
        .collect();
    let witness = witnesses
        .into_iter()
        .reduce(|a, b| if b.average / b.threshold > a.average / a.threshold { b } else { a });
    let density_fires = witness.as_ref().is_some_and(|w| w.average > w.threshold);
    let bound = lhs <= rhs;
    let verdict = match (bound, density_fires) {
        (true, true) => LevelDVerdict::Both,
        (true, false) => LevelDVerdict::BoundHolds,
        (false, true) => LevelDVerdict::DensityBranch,
        (false, false) => LevelDVerdict::Counterexample,
    };
    Ok(LevelDReport {
        x,
        d,
        alpha,
        lhs,
        rhs,
        terms,
        witness,
        density_fires,
        hypotheses_hold: hypotheses.all(),
        hypotheses,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::{fourier_point, Freq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_family_example() {
        let fam = ModulusFamily::build(FamilyKind::First { c1: 1.0 }, 0.1, 0.5).unwrap();
        let dist = &fam.members[fam.distinguished.unwrap()];
        assert_eq!(dist.factors, vec![(2, 12), (3, 12), (5, 12), (7, 12)]);
        assert_eq!(dist.value, BigUint::from(210u32).pow(12));
        assert!((fam.p_max - 10f64.powf(2.5)).abs() < 1e-9);
        let small: Vec<u64> = fam.members[1..].iter().map(|m| m.to_u64().unwrap()).collect();
        assert_eq!(&small[..4], &[121, 169, 289, 19]);
        assert_eq!(*small.last().unwrap(), 313);
        assert!(fam.members[1..].iter().all(|m| m.is_prime_power() && m.to_u64().unwrap() as f64 <= fam.p_max));
        assert!(fam.pairwise_coprime());
    }

    #[test]
    fn degenerate_and_second_family() {
        let fam = ModulusFamily::build(FamilyKind::First { c1: 1.0 }, 0.49, 0.01).unwrap();
        assert!(fam.members.len() <= 2);
        let fam = ModulusFamily::build(FamilyKind::Second { c2: 1.0, c3: 1.0 }, 0.05, 1.0).unwrap();
        assert!(fam.pairwise_coprime());
        assert!(ModulusFamily::build(FamilyKind::First { c1: 1.0 }, 0.6, 1.0).is_err());
    }

    #[test]
    fn l_value_examples() {
        let fam = ModulusFamily::custom(&[4, 9, 5]).unwrap();
        assert_eq!(l_value(1, &fam), Some(0));
        assert_eq!(l_value(6, &fam), Some(2));
        assert_eq!(l_value(8, &fam), None);
        assert!(ModulusFamily::custom(&[4, 6]).is_err());
    }

    #[test]
    fn lift_examples() {
        let fam = ModulusFamily::custom(&[4, 9, 5]).unwrap();
        let l = lift_fraction(1, 6, &fam).unwrap();
        assert_eq!((l.subset.clone(), l.r_s.clone(), l.b.clone()), (vec![0, 1], 36u32.into(), 6u32.into()));
        let l = lift_fraction(1, 4, &fam).unwrap();
        assert_eq!((l.subset, l.b), (vec![0], 1u32.into()));
        let l = lift_fraction(7, 45, &fam).unwrap();
        assert_eq!((l.subset, l.r_s, l.b), (vec![1, 2], 45u32.into(), 7u32.into()));
        assert!(lift_fraction(2, 4, &fam).is_err());
        assert!(lift_fraction(1, 8, &fam).is_err());
    }

    #[test]
    fn omega_and_denominator_bounds() {
        for fam in [
            ModulusFamily::build(FamilyKind::First { c1: 1.0 }, 0.1, 0.5).unwrap(),
            ModulusFamily::build(FamilyKind::First { c1: 1.0 }, 0.2, 1.0).unwrap(),
            ModulusFamily::build(FamilyKind::Second { c2: 1.0, c3: 0.5 }, 0.05, 1.0).unwrap(),
        ] {
            for q in 2..=10_000u64 {
                if let Some(l) = l_value(q, &fam) {
                    assert!(l <= factor_u64(q).len());
                    assert!(q as f64 >= fam.smooth_cutoff.powi(l as i32 - 1) * (1.0 - 1e-12), "q = {q}");
                    for a in [1, q - 1] {
                        let lift = lift_fraction(a, q, &fam).unwrap();
                        assert_eq!(&lift.b * BigUint::from(q), BigUint::from(a) * &lift.r_s);
                        assert!(lift.subset.iter().all(|&i| !(&lift.b % &fam.members[i].value).is_zero()));
                    }
                }
            }
        }
    }

    #[test]
    fn structured_example() {
        let a = AvoidingSet::from_members(1200, (12..=1200).step_by(12)).unwrap();
        let fam = ModulusFamily::custom(&[3, 4, 5]).unwrap();
        let r = level_d_audit(&indicator(&a), &fam, 2, 1.0 / 12.0).unwrap();
        let t = r.terms.iter().find(|t| t.0 == vec![3, 4]).unwrap();
        assert!((t.1 - 6.0 * 1e4).abs() < 1e-6);
        assert!(r.density_fires);
        let w = r.witness.unwrap();
        assert_eq!(w.average, 1.0);
        assert!(!r.hypotheses_hold);
        let zero = vec![Complex64::new(0.0, 0.0); 300];
        let r = level_d_audit(&zero, &fam, 1, 0.1).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(matches!(r.verdict, LevelDVerdict::BoundHolds));
        assert!(level_d_audit(&zero, &fam, 4, 0.1).is_err());
    }

    fn brute_lhs(a: &AvoidingSet, q: &[u64], d: usize) -> f64 {
        let mut total = 0.0;
        for s in subsets_of_size(q.len(), d) {
            let r: u64 = s.iter().map(|&i| q[i]).product();
            for b in 0..r {
                if s.iter().all(|&i| b % q[i] != 0) {
                    total += fourier_point(a, Freq::rational(b as i64, r)).norm_sqr();
                }
            }
        }
        total
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn audit_matches_brute_force(seed in 0u64..10_000, d in 1usize..=2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = rng.gen_range(50..=500);
            let a = AvoidingSet::from_members(x, (1..=x).filter(|_| rng.gen_bool(0.2))).unwrap();
            let q = [3u64, 4, 5, 7];
            let fam = ModulusFamily::custom(&q).unwrap();
            let r = level_d_audit(&indicator(&a), &fam, d, 0.2).unwrap();
            let b = brute_lhs(&a, &q, d);
            prop_assert!((r.lhs - b).abs() <= 1e-8 * b.max(1.0));
        }
    }
}
