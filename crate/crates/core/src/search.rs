//! Difference-avoiding sets: verification, greedy construction and exact
//! maximum search.

use std::cell::Cell;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intersective::AuxiliaryContext;
use crate::sieve::SieveTable;

/// Largest `X` accepted by the exact search.
pub const EXACT_CAP: usize = 2000;

/// Fixed-size bitset over `0..len`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitSet {
    len: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn clear(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    /// Word `k` of the set shifted down by `s` bits.
    fn shifted_word(&self, k: usize, s: usize) -> u64 {
        let (q, r) = (s / 64, s % 64);
        let lo = self.words.get(k + q).copied().unwrap_or(0);
        if r == 0 {
            return lo;
        }
        let hi = self.words.get(k + q + 1).copied().unwrap_or(0);
        (lo >> r) | (hi << (64 - r))
    }

    /// Smallest `i` with both `i` and `i + s` in the set.
    pub fn first_pair_at_distance(&self, s: usize) -> Option<usize> {
        for k in 0..self.words.len() {
            let w = self.words[k] & self.shifted_word(k, s);
            if w != 0 {
                return Some(k * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Removes `{base + i : i in other}` from `self`.
    fn remove_shifted(&mut self, other: &BitSet, base: usize) {
        let (q, r) = (base / 64, base % 64);
        for (k, &w) in other.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let idx = k + q;
            if idx < self.words.len() {
                self.words[idx] &= !(w << r);
            }
            if r != 0 && idx + 1 < self.words.len() {
                self.words[idx + 1] &= !(w >> (64 - r));
            }
        }
    }

    /// Clears every bit `<= i`.
    fn clear_through(&mut self, i: usize) {
        let k = i / 64;
        for w in &mut self.words[..k] {
            *w = 0;
        }
        if k < self.words.len() {
            let keep = if i % 64 == 63 { 0 } else { !0u64 << (i % 64 + 1) };
            self.words[k] &= keep;
        }
    }
}

/// A subset of `[1, X]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AvoidingSet {
    x: usize,
    bits: BitSet,
}

impl AvoidingSet {
    pub fn empty(x: usize) -> Self {
        AvoidingSet { x, bits: BitSet::new(x + 1) }
    }

    pub fn from_members(x: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::empty(x);
        for m in members {
            if m == 0 || m > x {
                return Err(Error::InvalidInput(format!("{m} is outside [1, {x}]")));
            }
            s.bits.set(m);
        }
        Ok(s)
    }

    pub fn full(x: usize) -> Self {
        Self::from_members(x, 1..=x).unwrap()
    }

    pub fn x(&self) -> usize {
        self.x
    }

    pub fn contains(&self, n: usize) -> bool {
        self.bits.get(n)
    }

    pub fn insert(&mut self, n: usize) {
        assert!((1..=self.x).contains(&n));
        self.bits.set(n);
    }

    pub fn len(&self) -> usize {
        self.bits.count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn density(&self) -> f64 {
        if self.x == 0 {
            0.0
        } else {
            self.len() as f64 / self.x as f64
        }
    }

    pub fn members(&self) -> Vec<usize> {
        self.bits.iter().collect()
    }

    pub fn bits(&self) -> &BitSet {
        &self.bits
    }
}

impl Serialize for AvoidingSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.members().serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ForbiddenMode {
    All,
    Sieved {
        #[serde(rename = "U")]
        u: f64,
    },
}

/// Positive values `h_l(n) <= X` for `n >= 1`, ascending; in sieved mode
/// only `n` in `W(U)` contribute.
pub fn forbidden_values(ctx: &AuxiliaryContext, x: u64, mode: ForbiddenMode) -> Result<Vec<u64>> {
    let h = &ctx.aux;
    if h.degree() < 1 || !h.derivative().positive_on_naturals() {
        return Err(Error::InvalidInput(format!("{h} is not increasing on the naturals")));
    }
    let table = match mode {
        ForbiddenMode::All => None,
        ForbiddenMode::Sieved { u } => Some(SieveTable::new(ctx, u)?),
    };
    let limit = BigInt::from(x);
    let mut out = Vec::new();
    for n in 1u64.. {
        let v = h.eval(&BigInt::from(n));
        if v > limit {
            break;
        }
        if !v.is_positive() {
            continue;
        }
        if table.as_ref().is_none_or(|t| t.in_w(n, None)) {
            out.push(v.to_u64().unwrap());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub ok: bool,
    /// A violating pair `(a, b)` with `b - a` forbidden.
    pub violation: Option<(usize, usize)>,
}

/// Checks that no two members differ by a forbidden value, one shifted
/// intersection per forbidden value.
pub fn verify_avoiding(a: &AvoidingSet, forbidden: &[u64]) -> Verification {
    let mut best: Option<(usize, usize)> = None;
    for &f in forbidden {
        let f = f as usize;
        if f == 0 || f >= a.x {
            continue;
        }
        if let Some(i) = a.bits.first_pair_at_distance(f) {
            if best.is_none_or(|(bi, bj)| (i, i + f) < (bi, bj)) {
                best = Some((i, i + f));
            }
        }
    }
    Verification { ok: best.is_none(), violation: best }
}

/// Left-to-right greedy: admit `n` unless some member lies at a forbidden
/// distance below it.
pub fn greedy_avoiding(forbidden: &[u64], x: usize) -> AvoidingSet {
    let mut fs: Vec<usize> = forbidden.iter().map(|&f| f as usize).filter(|&f| f > 0 && f < x).collect();
    fs.sort_unstable();
    fs.dedup();
    let mut set = AvoidingSet::empty(x);
    for n in 1..=x {
        let blocked = fs.iter().take_while(|&&f| f < n).any(|&f| set.bits.get(n - f));
        if !blocked {
            set.bits.set(n);
        }
    }
    set
}

/// One row of the table of maxima.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactRow {
    pub x: usize,
    pub d: usize,
    pub witness: Vec<usize>,
}

/// Maximum sizes `D(F, n)` for every `n <= x` with lexicographically first
/// witnesses.
///
/// The search grows `n` one step at a time. Since `D(n) <= D(n-1) + 1`, and
/// a set of size `D(n-1) + 1` in `[1, n]` must contain both `1` and `n`,
/// each step is a single decision problem. Elements are chosen in
/// increasing order; once the next element is at least `v`, the rest of the
/// set sits in `[v, n]`, which bounds the branch by the already-known
/// maxima of shorter windows.
pub fn exact_table(forbidden: &[u64], x: usize) -> Result<Vec<ExactRow>> {
    table_rows(forbidden, x, None)
}

/// [`exact_table`] under a time budget. The rows returned are exact but
/// stop at the last `n` finished before the budget ran out.
pub fn exact_table_within(forbidden: &[u64], x: usize, budget: Duration) -> Result<Vec<ExactRow>> {
    table_rows(forbidden, x, Some(Instant::now() + budget))
}

fn table_rows(forbidden: &[u64], x: usize, deadline: Option<Instant>) -> Result<Vec<ExactRow>> {
    if x > EXACT_CAP {
        return Err(Error::Limit(format!("exact search is capped at X = {EXACT_CAP}")));
    }
    let mut fmask = BitSet::new(x + 1);
    for &f in forbidden {
        if f > 0 && (f as usize) <= x {
            fmask.set(f as usize);
        }
    }
    let mis = mis_table(&fmask);
    let mut d = vec![0usize; x + 1];
    let mut witness: Vec<Vec<usize>> = vec![Vec::new(); x + 1];
    let mut rows = Vec::with_capacity(x);
    for n in 1..=x {
        let target = d[n - 1] + 1;
        let found = if n == 1 {
            Some(vec![1])
        } else if fmask.get(n - 1) {
            None
        } else {
            // candidates for the members strictly between 1 and n
            let mut cand = BitSet::new(n + 1);
            for i in 2..n {
                cand.set(i);
            }
            cand.remove_shifted(&fmask, 1);
            for f in fmask.iter().filter(|&f| f < n) {
                cand.clear(n - f);
            }
            let search = Decision { n, target, d: &d, fmask: &fmask, mis: &mis, deadline, nodes: Cell::new(0) };
            let mut chosen = vec![1];
            match search.run(&mut chosen, cand) {
                None => break,
                Some(found) => found.then(|| {
                    chosen.push(n);
                    chosen
                }),
            }
        };
        match found {
            Some(s) => {
                d[n] = target;
                witness[n] = s;
            }
            None => {
                d[n] = d[n - 1];
                witness[n] = witness[n - 1].clone();
            }
        }
        rows.push(ExactRow { x: n, d: d[n], witness: witness[n].clone() });
    }
    Ok(rows)
}

/// Longest window used by [`suffix_bounds`].
const WINDOW: usize = 48;

/// Pairing partners tried by the greedy cover in [`suffix_bounds`].
const COVER_REACH: usize = 16;

/// Width of the windows whose independence number is tabulated.
const MIS_WIDTH: usize = 20;

/// Independence number of every pattern of positions `0..MIS_WIDTH`, the
/// pattern given as a bit mask. Only the pattern matters, not where the
/// window sits.
fn mis_table(fmask: &BitSet) -> Vec<u8> {
    let conflicts: Vec<u32> = (0..MIS_WIDTH)
        .map(|t| (1..MIS_WIDTH - t).filter(|&f| fmask.get(f)).fold(0u32, |m, f| m | 1 << (t + f)))
        .collect();
    let mut mis = vec![0u8; 1 << MIS_WIDTH];
    for m in 1..mis.len() {
        let t = m.trailing_zeros() as usize;
        let rest = m & (m - 1);
        mis[m] = mis[rest].max(1 + mis[rest & !(conflicts[t] as usize)]);
    }
    mis
}

/// `best[i]` bounds how many members of `cand` can be taken together from
/// `[first + i, end]`. The candidates are covered greedily by pairs at a
/// forbidden distance and singletons, each group holding at most one
/// member. A split of the range into windows charges a short window its
/// tabulated independence number and a longer one the smaller of the
/// groups meeting it and `d[width]`; `best` is the cheapest split.
fn suffix_bounds(cand: &BitSet, first: usize, end: usize, d: &[usize], fmask: &BitSet, mis: &[u8]) -> Vec<usize> {
    let span = end - first + 1;
    // groups by their lowest and highest position
    let mut lo = vec![0usize; span + 1];
    let mut hi = vec![0usize; span + 1];
    let mut used = vec![false; span];
    for i in 0..span {
        if used[i] || !cand.get(first + i) {
            continue;
        }
        used[i] = true;
        lo[i] += 1;
        let mate = (1..=COVER_REACH.min(span - 1 - i)).find(|&f| fmask.get(f) && !used[i + f] && cand.get(first + i + f));
        match mate {
            Some(f) => {
                used[i + f] = true;
                hi[i + f] += 1;
            }
            None => hi[i] += 1,
        }
    }
    // suffix counts: groups with highest position >= i, lowest >= j
    for i in (0..span).rev() {
        lo[i] += lo[i + 1];
        hi[i] += hi[i + 1];
    }
    let mut best = vec![0usize; span + 1];
    for i in (0..span).rev() {
        let top = (i + WINDOW).min(span);
        let short = (i + MIS_WIDTH).min(top);
        let pattern = cand.shifted_word(0, first + i) as usize & ((1 << MIS_WIDTH) - 1);
        let exact = (i + 1..=short).map(|j| best[j] + mis[pattern & ((1 << (j - i)) - 1)] as usize);
        let long = (short + 1..=top).map(|j| best[j] + (hi[i] - lo[j]).min(d[j - i]));
        best[i] = exact.chain(long).min().unwrap();
    }
    best
}

/// Whether some avoiding set of size `target` holds `1`, `n` and the
/// members chosen so far, with the rest drawn from the candidates.
struct Decision<'a> {
    n: usize,
    target: usize,
    d: &'a [usize],
    fmask: &'a BitSet,
    mis: &'a [u8],
    deadline: Option<Instant>,
    nodes: Cell<u64>,
}

impl Decision<'_> {
    /// `None` once the deadline has passed.
    fn run(&self, chosen: &mut Vec<usize>, mut cand: BitSet) -> Option<bool> {
        // `n` itself is the final member, still to be added
        if chosen.len() + 1 == self.target {
            return Some(true);
        }
        let Some(first) = cand.first() else { return Some(false) };
        if chosen.len() + 1 + cand.count() < self.target {
            return Some(false);
        }
        self.nodes.set(self.nodes.get() + 1);
        if self.nodes.get().is_multiple_of(4096) && self.deadline.is_some_and(|t| Instant::now() > t) {
            return None;
        }
        let mut all = cand.clone();
        all.set(self.n);
        let best = suffix_bounds(&all, first, self.n, self.d, self.fmask, self.mis);
        while let Some(v) = cand.first() {
            // the rest of the set lies in [v, n]
            if chosen.len() + self.d[self.n - v + 1].min(best[v - first]) < self.target {
                return Some(false);
            }
            let mut next = cand.clone();
            next.clear_through(v);
            next.remove_shifted(self.fmask, v);
            chosen.push(v);
            if self.run(chosen, next)? {
                return Some(true);
            }
            chosen.pop();
            cand.clear(v);
        }
        Some(false)
    }
}

/// Maximum size of a subset of `[1, X]` with no difference in `forbidden`,
/// with a witness.
pub fn exact_max_avoiding(forbidden: &[u64], x: usize) -> Result<(usize, AvoidingSet)> {
    if x == 0 {
        return Ok((0, AvoidingSet::empty(0)));
    }
    let rows = exact_table(forbidden, x)?;
    let last = rows.last().unwrap();
    Ok((last.d, AvoidingSet::from_members(x, last.witness.iter().copied())?))
}

/// Least-squares slope of `log size` against `log X`.
pub fn fit_exponent(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
