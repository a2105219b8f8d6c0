//! p-adic roots, intersectivity verdicts and the tower of auxiliary
//! polynomials `h_l(n) = h(r_l + l n) / lambda(l)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::arith::{crt, factor_u64, int_json, mod_inverse, pow_u64, primes_up_to, valuation};
use crate::error::{Error, Result};
use crate::poly::{eval_mod, IntPoly};

/// A p-adic root of `h` known modulo `p^precision`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalRootData {
    pub p: u64,
    pub root: BigInt,
    pub multiplicity: u32,
    pub precision: u32,
}

impl LocalRootData {
    pub fn truncate(&self, precision: u32) -> LocalRootData {
        assert!(precision <= self.precision);
        LocalRootData {
            root: self.root.mod_floor(&pow_u64(self.p, precision)),
            precision,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p,
            "root": int_json(&self.root),
            "multiplicity": self.multiplicity,
            "precision": self.precision,
        })
    }
}

/// Roots of a squarefree polynomial in `Z_p`, each determined modulo
/// `p^precision`. Branches are refined digit by digit until the strong
/// lifting criterion `v(f(a)) > 2 v(f'(a))` isolates a unique root, or
/// until the depth cap is hit.
fn squarefree_roots(f: &IntPoly, p: u64, precision: u32, cap: u32) -> Result<Vec<BigInt>> {
    let df = f.derivative();
    let res = f.residues_mod(p);
    let mut stack: Vec<(BigInt, u32)> = (0..p)
        .rev()
        .filter(|&a| eval_mod(&res, a, p) == 0)
        .map(|a| (BigInt::from(a), 1))
        .collect();
    let mut out = Vec::new();
    while let Some((a, d)) = stack.pop() {
        let fa = f.eval(&a);
        let vd = valuation(&df.eval(&a), p);
        let vf = valuation(&fa, p);
        if let Some(vd) = vd {
            let certified = d > vd && vf.is_none_or(|vf| vf > 2 * vd);
            if certified {
                let want = precision.max(d);
                let z = newton(f, &df, &a, p, vd, want);
                let pd = pow_u64(p, d);
                if (&z - &a).mod_floor(&pd).is_zero() {
                    out.push(z.mod_floor(&pow_u64(p, precision)));
                }
                continue;
            }
        }
        if d >= cap {
            return Err(Error::PrecisionExhausted { p, depth: d });
        }
        let pd = pow_u64(p, d);
        let pd1 = &pd * p;
        for j in (0..p).rev() {
            let b = &a + &pd * j;
            if f.eval(&b).mod_floor(&pd1).is_zero() {
                stack.push((b, d + 1));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Refines `a` towards the unique root near it, returning that root
/// modulo `p^want`.
fn newton(f: &IntPoly, df: &IntPoly, a: &BigInt, p: u64, vd: u32, want: u32) -> BigInt {
    let modulus = pow_u64(p, want + 2 * vd + 2);
    let pv = pow_u64(p, vd);
    let mut z = a.clone();
    loop {
        let fz = f.eval(&z);
        if fz.is_zero() || valuation(&fz, p).unwrap() >= want + vd {
            return z.mod_floor(&pow_u64(p, want));
        }
        let t = &fz / &pv;
        let u = df.eval(&z) / &pv;
        let inv = mod_inverse(&u, &modulus).expect("unit derivative");
        z = (&z - t * inv).mod_floor(&modulus);
    }
}

/// Default depth for refining roots of a squarefree factor.
fn default_depth(s: &IntPoly, p: u64) -> u32 {
    let r = s.resultant(&s.derivative());
    2 * valuation(&r, p).unwrap_or(0) + 1
}

/// All p-adic roots of `h`, one entry per distinct root, with multiplicity.
pub fn padic_roots(h: &IntPoly, p: u64, precision: u32) -> Result<Vec<LocalRootData>> {
    padic_roots_capped(h, p, precision, None)
}

pub fn padic_roots_capped(
    h: &IntPoly,
    p: u64,
    precision: u32,
    depth_bound: Option<u32>,
) -> Result<Vec<LocalRootData>> {
    if h.degree() == 0 {
        return Err(Error::DegreeTooSmall { min: 1, got: 0 });
    }
    let mut out = Vec::new();
    for (s, m) in h.squarefree_decomposition() {
        let mut cap = precision + default_depth(&s, p);
        if let Some(b) = depth_bound {
            cap = cap.min(b.max(precision));
        }
        for root in squarefree_roots(&s, p, precision, cap)? {
            out.push(LocalRootData { p, root, multiplicity: m, precision });
        }
    }
    out.sort_by(|a, b| a.multiplicity.cmp(&b.multiplicity).then_with(|| digit_order(&a.root, &b.root, p)));
    Ok(out)
}

/// Compares p-adic numbers by their digit expansions, lowest digit first.
fn digit_order(a: &BigInt, b: &BigInt, p: u64) -> Ordering {
    let pb = BigInt::from(p);
    let (mut a, mut b) = (a.clone(), b.clone());
    while !(a.is_zero() && b.is_zero()) {
        let (qa, ra) = a.div_mod_floor(&pb);
        let (qb, rb) = b.div_mod_floor(&pb);
        match ra.cmp(&rb) {
            Ordering::Equal => {
                a = qa;
                b = qb;
            }
            o => return o,
        }
    }
    Ordering::Equal
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Certified { root: String },
    NotIntersective { p: u64, e: u32 },
    EmpiricalUpTo { prime_bound: u64 },
}

/// Integer roots via the divisors of the constant term.
pub fn integer_roots(h: &IntPoly) -> Vec<BigInt> {
    let c0 = h.coeff(0);
    if c0.is_zero() {
        return vec![BigInt::zero()];
    }
    let mut roots = Vec::new();
    let bound = BigInt::one() + h.max_abs_coeff().div_ceil(&h.leading().abs());
    let a = c0.abs();
    if let Some(limit) = bound.to_u64().filter(|&b| b <= 2_000_000) {
        for r in 1..=limit {
            if (&a % r).is_zero() {
                for s in [BigInt::from(r), -BigInt::from(r)] {
                    if h.eval(&s).is_zero() {
                        roots.push(s);
                    }
                }
            }
        }
    } else if let Some(a) = a.to_u64() {
        let f = factor_u64(a);
        let mut divisors = vec![1u64];
        for (p, e) in f {
            let mut next = Vec::new();
            for d in &divisors {
                let mut x = *d;
                for _ in 0..=e {
                    next.push(x);
                    x = x.saturating_mul(p);
                }
            }
            divisors = next;
        }
        for d in divisors {
            for s in [BigInt::from(d), -BigInt::from(d)] {
                if h.eval(&s).is_zero() {
                    roots.push(s);
                }
            }
        }
    }
    roots.sort();
    roots
}

/// Whether `h(x) = 0 mod p^e` is solvable, by exhaustive search.
pub fn has_root_mod_prime_power(h: &IntPoly, p: u64, e: u32) -> bool {
    let m = pow_u64(p, e).to_u64().expect("modulus fits in u64");
    let r = h.residues_mod(m);
    (0..m).any(|a| eval_mod(&r, a, m) == 0)
}

/// Smallest `e` such that `h` has no root modulo `p^e`, searched up to
/// `depth_bound`; `Ok(None)` when roots persist to the bound.
fn local_obstruction(h: &IntPoly, p: u64, depth_bound: u32) -> Result<Option<u32>> {
    let res = h.residues_mod(p);
    let mut level: Vec<BigInt> = (0..p).filter(|&a| eval_mod(&res, a, p) == 0).map(BigInt::from).collect();
    let mut e = 1;
    while !level.is_empty() {
        if e >= depth_bound {
            return Ok(None);
        }
        let pe = pow_u64(p, e);
        let pe1 = &pe * p;
        let mut next = Vec::new();
        for a in &level {
            for j in 0..p {
                let b = a + &pe * j;
                if h.eval(&b).mod_floor(&pe1).is_zero() {
                    next.push(b);
                }
            }
            if next.len() > 1_000_000 {
                return Err(Error::Limit(format!("residue tree for p = {p} too large")));
            }
        }
        level = next;
        e += 1;
    }
    Ok(Some(e))
}

/// Certifies, refutes, or empirically supports intersectivity of `h`.
pub fn intersectivity_verdict(h: &IntPoly, prime_bound: u64, depth_bound: u32) -> Result<Verdict> {
    if h.degree() < 2 {
        return Err(Error::DegreeTooSmall { min: 2, got: h.degree() });
    }
    if let Some(r) = integer_roots(h).into_iter().next() {
        return Ok(Verdict::Certified { root: r.to_string() });
    }
    let kernel = h
        .squarefree_decomposition()
        .into_iter()
        .fold(IntPoly::from_i64(&[1]), |acc, (s, _)| acc.mul(&s));
    let dk = kernel.derivative();
    let primes = primes_up_to(prime_bound);
    // Prefer a prime witness: no root modulo p at all.
    let hres = |p: u64| h.residues_mod(p);
    if let Some(&p) = primes.iter().find(|&&p| {
        let r = hres(p);
        (0..p).all(|a| eval_mod(&r, a, p) != 0)
    }) {
        return Ok(Verdict::NotIntersective { p, e: 1 });
    }
    for &p in &primes {
        let res = kernel.residues_mod(p);
        let dres = dk.residues_mod(p);
        let simple = (0..p).any(|a| eval_mod(&res, a, p) == 0 && eval_mod(&dres, a, p) != 0);
        if simple {
            continue;
        }
        let cap = default_depth(&kernel, p).max(2).min(depth_bound);
        match squarefree_roots(&kernel, p, 1, cap) {
            Ok(roots) if !roots.is_empty() => continue,
            Ok(_) => {}
            Err(_) => return Err(Error::PrecisionExhausted { p, depth: cap }),
        }
        return match local_obstruction(h, p, depth_bound)? {
            Some(e) => Ok(Verdict::NotIntersective { p, e }),
            None => Err(Error::PrecisionExhausted { p, depth: depth_bound }),
        };
    }
    Ok(Verdict::EmpiricalUpTo { prime_bound })
}

/// `R_h = (k+1) 2^k max|a_i|`, bounding every coefficient of `h_l` by
/// `R_h l^(k-1)`.
pub fn coefficient_bound(h: &IntPoly) -> Result<BigInt> {
    let k = h.degree();
    if k < 2 {
        return Err(Error::DegreeTooSmall { min: 2, got: k });
    }
    Ok(BigInt::from(k + 1) * (BigInt::one() << k) * h.max_abs_coeff())
}

#[derive(Clone, Debug)]
struct ChosenRoot {
    data: LocalRootData,
}

/// Fixes one p-adic root `z_p` per prime and builds auxiliary contexts.
///
/// The default choice takes the root of least multiplicity, then the one
/// with the smallest digit expansion. Overrides pick the root closest to a
/// given integer in the p-adic metric.
#[derive(Debug)]
pub struct AuxBuilder {
    base: IntPoly,
    overrides: BTreeMap<u64, BigInt>,
    depth_bound: Option<u32>,
    cache: Mutex<HashMap<u64, ChosenRoot>>,
}

impl Clone for AuxBuilder {
    fn clone(&self) -> Self {
        AuxBuilder {
            base: self.base.clone(),
            overrides: self.overrides.clone(),
            depth_bound: self.depth_bound,
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
        }
    }
}

impl AuxBuilder {
    pub fn new(base: IntPoly) -> Result<Self> {
        if base.degree() < 2 {
            return Err(Error::DegreeTooSmall { min: 2, got: base.degree() });
        }
        Ok(AuxBuilder { base, overrides: BTreeMap::new(), depth_bound: None, cache: Mutex::new(HashMap::new()) })
    }

    pub fn with_override(mut self, p: u64, root: BigInt) -> Self {
        self.overrides.insert(p, root);
        self.cache.lock().unwrap().remove(&p);
        self
    }

    pub fn with_depth_bound(mut self, bound: u32) -> Self {
        self.depth_bound = Some(bound);
        self
    }

    pub fn base(&self) -> &IntPoly {
        &self.base
    }

    /// The chosen root `z_p` to at least the given precision.
    pub fn root_for(&self, p: u64, precision: u32) -> Result<LocalRootData> {
        if let Some(c) = self.cache.lock().unwrap().get(&p) {
            if c.data.precision >= precision {
                return Ok(c.data.truncate(precision));
            }
        }
        // Work far enough past the request that distinct roots separate.
        let mut work = precision.max(1) + 8;
        let chosen = loop {
            let roots = padic_roots_capped(&self.base, p, work, self.depth_bound)?;
            if roots.is_empty() {
                return Err(Error::NoLocalRoot { p });
            }
            let distinct = roots.windows(2).all(|w| w[0].root != w[1].root || w[0].multiplicity != w[1].multiplicity);
            if distinct || work > 256 {
                break self.select(roots, p);
            }
            work *= 2;
        };
        self.cache.lock().unwrap().insert(p, ChosenRoot { data: chosen.clone() });
        Ok(chosen.truncate(precision))
    }

    fn select(&self, roots: Vec<LocalRootData>, p: u64) -> LocalRootData {
        match self.overrides.get(&p) {
            None => roots.into_iter().next().unwrap(),
            Some(target) => {
                let agree = |r: &LocalRootData| valuation(&(&r.root - target), p).unwrap_or(u32::MAX);
                let best = roots.iter().map(agree).max().unwrap();
                roots.into_iter().find(|r| agree(r) == best).unwrap()
            }
        }
    }

    /// `lambda(l) = prod p^(a m_p)` over `p^a || l`.
    pub fn lambda_of(&self, ell: u64) -> Result<BigInt> {
        let mut lam = BigInt::one();
        for (p, a) in factor_u64(ell) {
            let m = self.root_for(p, 1)?.multiplicity;
            lam *= pow_u64(p, a * m);
        }
        Ok(lam)
    }

    /// The integer `r_l` in `(-l, 0]` congruent to `z_p` modulo `p^v_p(l)`.
    pub fn root_residue(&self, ell: u64) -> Result<BigInt> {
        if ell == 0 {
            return Err(Error::InvalidInput("ell must be positive".into()));
        }
        let mut parts = Vec::new();
        for (p, a) in factor_u64(ell) {
            let z = self.root_for(p, a)?;
            parts.push((z.root, pow_u64(p, a)));
        }
        let (x, _) = crt(&parts);
        Ok(if x.is_zero() { x } else { x - BigInt::from(ell) })
    }

    pub fn context(&self, ell: u64) -> Result<AuxiliaryContext> {
        let r = self.root_residue(ell)?;
        let lam = self.lambda_of(ell)?;
        let composed = self.base.compose_affine(&r, &BigInt::from(ell));
        let aux = composed.div_exact_scalar(&lam).ok_or(Error::NonIntegral { ell })?;
        let mut roots = BTreeMap::new();
        for (p, a) in factor_u64(ell) {
            roots.insert(p, self.root_for(p, a)?);
        }
        Ok(AuxiliaryContext { base: self.base.clone(), ell, r_ell: r, lambda_ell: lam, aux, roots })
    }
}

/// One level of the tower: `h_l` together with the data that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryContext {
    pub base: IntPoly,
    pub ell: u64,
    pub r_ell: BigInt,
    pub lambda_ell: BigInt,
    pub aux: IntPoly,
    pub roots: BTreeMap<u64, LocalRootData>,
}

impl AuxiliaryContext {
    /// The trivial level `l = 1`, where `h_1 = h`.
    pub fn identity(base: IntPoly) -> Self {
        AuxiliaryContext {
            aux: base.clone(),
            base,
            ell: 1,
            r_ell: BigInt::zero(),
            lambda_ell: BigInt::one(),
            roots: BTreeMap::new(),
        }
    }

    /// Wraps an arbitrary polynomial as a level-one context.
    pub fn from_poly(poly: IntPoly) -> Self {
        Self::identity(poly)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "ell": self.ell,
            "r_ell": int_json(&self.r_ell),
            "lambda_ell": int_json(&self.lambda_ell),
            "aux": serde_json::to_value(&self.aux).unwrap(),
            "roots": self.roots.values().map(LocalRootData::to_json).collect::<Vec<_>>(),
        })
    }

    /// Checks the structural invariants of the level.
    pub fn check_invariants(&self) -> Result<()> {
        let ell = BigInt::from(self.ell);
        if !(self.base.eval(&self.r_ell) % &ell).is_zero() {
            return Err(Error::InvalidInput(format!("l = {} does not divide h(r_l)", self.ell)));
        }
        if !(&self.lambda_ell % &ell).is_zero() {
            return Err(Error::InvalidInput("l does not divide lambda(l)".into()));
        }
        let lk = num_traits::pow(ell.clone(), self.base.degree());
        if !(&lk % &self.lambda_ell).is_zero() {
            return Err(Error::InvalidInput("lambda(l) does not divide l^k".into()));
        }
        if !self.aux.leading().is_positive() {
            return Err(Error::NonPositiveLeading);
        }
        let bound = coefficient_bound(&self.base)? * num_traits::pow(ell, self.base.degree() - 1);
        if self.aux.coeffs().iter().any(|c| c.abs() > bound) {
            return Err(Error::InvalidInput("coefficient bound exceeded".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InheritanceReport {
    pub ell: u64,
    pub q: u64,
    pub divisibility_ok: bool,
    pub checked: usize,
    pub violations: Vec<i64>,
}

impl InheritanceReport {
    pub fn ok(&self) -> bool {
        self.divisibility_ok && self.violations.is_empty()
    }
}

/// Checks `lambda(q) h_{ql}(n) = h_l((r_{ql} - r_l)/l + q n)` exactly.
pub fn inheritance_check(builder: &AuxBuilder, ell: u64, q: u64, samples: usize) -> Result<InheritanceReport> {
    let lo = builder.context(ell)?;
    let hi = builder.context(ell * q)?;
    let lq = builder.lambda_of(q)?;
    let diff = &hi.r_ell - &lo.r_ell;
    let (shift, rem) = diff.div_rem(&BigInt::from(ell));
    let divisibility_ok = rem.is_zero();
    let mut violations = Vec::new();
    if divisibility_ok {
        for n in 1..=samples as i64 {
            let left = &lq * hi.aux.eval_i64(n);
            let right = lo.aux.eval(&(&shift + BigInt::from(q) * n));
            if left != right {
                violations.push(n);
            }
        }
    }
    Ok(InheritanceReport { ell, q, divisibility_ok, checked: samples, violations })
}
