//! Partitions, module shapes, and the counts built on them.
//!
//! A partition `λ` names the module `N_{λ'} = ⊕_j R/m^{λ'_j}` over a local
//! ring with residue field of size `q`, so `λ_j` is the rank of the
//! `p^{j-1}`-torsion layer. Every count here is per component; multi-component
//! counts are products.

mod oracle;

pub use oracle::{
    oracle_sur_count, oracle_sur_count_by_kernel, CyclicSum, KernelCounts, OracleError,
    ORACLE_MAX_ORDER,
};

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::decomp::{DecompData, Orbit};
use crate::qexact::{binom2, int, pochhammer, q_pow, QNum, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("parts {0:?} are not non-increasing")]
    NotPartition(Vec<u32>),
    #[error("unknown component id {0}")]
    UnknownComponent(u32),
    #[error("shape lists {got} components but the decomposition has {expected}")]
    ComponentCount { got: usize, expected: usize },
    #[error("malformed shape: {0}")]
    Malformed(String),
    #[error("|(∧²V)^Γ[p^r]| came out non-integral ({0}); check ε and the shape")]
    NonIntegral(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Partition(Vec<u32>);

static EMPTY: Partition = Partition(Vec::new());

impl Partition {
    /// Trailing zeros are dropped; anything else out of order is rejected.
    pub fn new(mut parts: Vec<u32>) -> Result<Self, ShapeError> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) || parts.contains(&0) {
            return Err(ShapeError::NotPartition(parts));
        }
        Ok(Partition(parts))
    }

    /// Sorts and drops zeros, for exponent lists in arbitrary order.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.retain(|&x| x > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition(parts)
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    pub fn row(n: u32) -> Self {
        if n == 0 {
            Self::empty()
        } else {
            Partition(vec![n])
        }
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `λ_j`, 1-indexed, zero past the end.
    pub fn part(&self, j: usize) -> u32 {
        if j == 0 {
            panic!("partition parts are 1-indexed");
        }
        self.0.get(j - 1).copied().unwrap_or(0)
    }

    pub fn size(&self) -> u64 {
        self.0.iter().map(|&x| x as u64).sum()
    }

    pub fn conjugate(&self) -> Partition {
        let top = self.part(1);
        Partition(
            (1..=top)
                .map(|j| self.0.iter().filter(|&&x| x >= j).count() as u32)
                .collect(),
        )
    }

    /// `w(λ) = Σ_i (i-1)λ_i`.
    pub fn w(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &x)| i as u64 * x as u64)
            .sum()
    }

    /// All partitions of `n`, largest first part first.
    pub fn all_of_size(n: u32) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fill(n, n, &mut cur, &mut out);
        out
    }

    /// All partitions of size at most `n`, by size.
    pub fn all_up_to(n: u32) -> Vec<Partition> {
        (0..=n).flat_map(Self::all_of_size).collect()
    }
}

fn fill(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
    if rem == 0 {
        out.push(Partition(cur.clone()));
        return;
    }
    for x in (1..=max.min(rem)).rev() {
        cur.push(x);
        fill(rem - x, x, cur, out);
        cur.pop();
    }
}

impl TryFrom<Vec<u32>> for Partition {
    type Error = ShapeError;
    fn try_from(v: Vec<u32>) -> Result<Self, ShapeError> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Vec<u32> {
        p.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// One partition per nontrivial component; absent means empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ModuleShape {
    parts: BTreeMap<u32, Partition>,
}

impl ModuleShape {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(id: u32, lambda: Partition) -> Self {
        let mut s = Self::empty();
        s.set(id, lambda);
        s
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, Partition)>) -> Self {
        let mut s = Self::empty();
        for (id, p) in pairs {
            s.set(id, p);
        }
        s
    }

    pub fn get(&self, id: u32) -> &Partition {
        self.parts.get(&id).unwrap_or(&EMPTY)
    }

    pub fn set(&mut self, id: u32, lambda: Partition) {
        if lambda.is_empty() {
            self.parts.remove(&id);
        } else {
            self.parts.insert(id, lambda);
        }
    }

    /// Nonempty components only.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &Partition)> {
        self.parts.iter().map(|(&id, p)| (id, p))
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn check(&self, decomp: &DecompData) -> Result<(), ShapeError> {
        for id in self.parts.keys() {
            if decomp.component(*id).is_none() {
                return Err(ShapeError::UnknownComponent(*id));
            }
        }
        Ok(())
    }

    /// Array-of-arrays text form ordered by component id, e.g. `[[2,1],[1]]`.
    pub fn parse(decomp: &DecompData, text: &str) -> Result<Self, ShapeError> {
        let raw: Vec<Vec<u32>> =
            serde_json::from_str(text).map_err(|e| ShapeError::Malformed(e.to_string()))?;
        Self::from_lists(decomp, raw)
    }

    pub fn from_lists(decomp: &DecompData, raw: Vec<Vec<u32>>) -> Result<Self, ShapeError> {
        let ids = decomp.ids();
        if raw.len() != ids.len() {
            return Err(ShapeError::ComponentCount {
                got: raw.len(),
                expected: ids.len(),
            });
        }
        let mut s = Self::empty();
        for (id, parts) in ids.into_iter().zip(raw) {
            s.set(id, Partition::new(parts)?);
        }
        Ok(s)
    }

    pub fn to_lists(&self, decomp: &DecompData) -> Vec<Vec<u32>> {
        decomp
            .ids()
            .into_iter()
            .map(|id| self.get(id).parts().to_vec())
            .collect()
    }

    pub fn to_json(&self, decomp: &DecompData) -> String {
        serde_json::to_string(&self.to_lists(decomp)).expect("plain integer lists serialize")
    }

    /// Sort key: component ids ascending, partitions compared as sequences.
    fn key(&self, ids: &[u32]) -> Vec<Partition> {
        ids.iter().map(|&id| self.get(id).clone()).collect()
    }
}

impl fmt::Display for ModuleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self
            .parts
            .iter()
            .map(|(id, p)| format!("{id}:{p}"))
            .collect();
        write!(f, "{{{}}}", s.join(", "))
    }
}

fn integral(r: Rational, what: &str) -> BigInt {
    assert!(r.is_integer(), "{what} should be an integer, got {r}");
    r.to_integer()
}

fn to_nat(x: BigInt, what: &str) -> BigUint {
    x.to_biguint()
        .unwrap_or_else(|| panic!("{what} should be non-negative"))
}

/// `|Aut(N_{λ'})| = q^{Σλ_j²} ∏_j η(λ_j - λ_{j+1})`.
pub fn aut_order(q: u64, lambda: &Partition) -> BigUint {
    let mut r = q_pow(
        q,
        lambda
            .parts()
            .iter()
            .map(|&x| (x as i64) * (x as i64))
            .sum(),
    );
    for j in 1..=lambda.len() {
        r *= pochhammer(q, (lambda.part(j) - lambda.part(j + 1)) as u64);
    }
    to_nat(integral(r, "|Aut|"), "|Aut|")
}

fn interlaces(rho: &Partition, lambda: &Partition) -> bool {
    let n = rho.len().max(lambda.len()) + 1;
    (1..=n).all(|j| rho.part(j) >= lambda.part(j) && lambda.part(j) >= rho.part(j + 1))
}

/// Surjections `N_{ρ'} → N_{λ'}` with kernel `(R/m)^e`, up to `Aut(N_{λ'})`.
pub fn elem_kernel_sur_count(q: u64, rho: &Partition, lambda: &Partition, e: u64) -> BigUint {
    if rho.size() != lambda.size() + e || !interlaces(rho, lambda) {
        return BigUint::zero();
    }
    let b = |x: u32| binom2(x as i64);
    let expo: i64 = rho.parts().iter().map(|&x| b(x)).sum::<i64>()
        - lambda.parts().iter().map(|&x| b(x)).sum::<i64>()
        - binom2(e as i64);
    let mut r = q_pow(q, expo);
    for j in 1..=rho.len() {
        let (rj, rn, lj) = (rho.part(j), rho.part(j + 1), lambda.part(j));
        r *= pochhammer(q, (rj - rn) as u64);
        r /= pochhammer(q, (rj - lj) as u64) * pochhammer(q, (lj - rn) as u64);
    }
    to_nat(
        integral(r, "elementary-kernel count"),
        "elementary-kernel count",
    )
}

/// `μ̂(N_{λ'}, N_{ρ'})`.
pub fn mu_hat(q: u64, lambda: &Partition, rho: &Partition) -> BigInt {
    if rho.size() < lambda.size() {
        return BigInt::zero();
    }
    let e = rho.size() - lambda.size();
    let count = BigInt::from(elem_kernel_sur_count(q, rho, lambda, e));
    let sign = if e.is_multiple_of(2) {
        BigInt::one()
    } else {
        -BigInt::one()
    };
    sign * BigInt::from(q).pow(binom2(e as i64) as u32) * count
}

/// `|Sur(N_{ρ'}, N_{λ'})|`.
///
/// A map is onto iff it is onto mod `m`. A generator of order `m^a` can hit
/// exactly the residue coordinates whose cyclic factor has exponent `<= a`,
/// so the images mod `m` form a block upper-triangular matrix; count its
/// full-row-rank fillings and multiply by the (uniform) fiber size.
pub fn sur_count(q: u64, rho: &Partition, lambda: &Partition) -> BigUint {
    let src = rho.conjugate();
    let dst = lambda.conjugate();
    let hom: i64 = (1..=rho.len().min(lambda.len()))
        .map(|k| rho.part(k) as i64 * lambda.part(k) as i64)
        .sum();
    let reach = |a: u32| dst.parts().iter().filter(|&&b| b <= a).count() as i64;
    let image: i64 = src.parts().iter().map(|&a| reach(a)).sum();

    let mut levels: Vec<(u32, usize)> = Vec::new();
    for &b in dst.parts().iter().rev() {
        match levels.last_mut() {
            Some((v, c)) if *v == b => *c += 1,
            _ => levels.push((b, 1)),
        }
    }
    let qb = BigInt::from(q);
    let mut spanning = BigInt::one();
    let mut above = 0usize;
    for &(beta, c) in levels.iter().rev() {
        let cols = src.parts().iter().filter(|&&a| a >= beta).count();
        for i in 0..c {
            let f = qb.pow(cols as u32) - qb.pow((above + i) as u32);
            if !f.is_positive() {
                return BigUint::zero();
            }
            spanning *= f;
        }
        above += c;
    }
    let fiber = q_pow(q, hom - image);
    to_nat(integral(fiber * int(spanning), "|Sur|"), "|Sur|")
}

/// `|V|` for a shape: `∏_i q_i^{n_i|λ^i|}`.
pub fn module_size(decomp: &DecompData, shape: &ModuleShape) -> Result<BigUint, ShapeError> {
    shape.check(decomp)?;
    let mut out = BigUint::one();
    for (id, p) in shape.iter() {
        let c = decomp.component(id).expect("checked");
        out *= BigUint::from(c.q).pow((c.n as u64 * p.size()) as u32);
    }
    Ok(out)
}

/// `|Aut(V)|`, the product of the component automorphism counts.
pub fn module_aut_order(decomp: &DecompData, shape: &ModuleShape) -> Result<BigUint, ShapeError> {
    shape.check(decomp)?;
    let mut out = BigUint::one();
    for (id, p) in shape.iter() {
        out *= aut_order(decomp.component(id).expect("checked").q, p);
    }
    Ok(out)
}

/// `|Sur(V, N)|` as a product over components.
pub fn module_sur_count(
    decomp: &DecompData,
    v: &ModuleShape,
    n: &ModuleShape,
) -> Result<BigUint, ShapeError> {
    v.check(decomp)?;
    n.check(decomp)?;
    let mut out = BigUint::one();
    for c in &decomp.components {
        out *= sur_count(c.q, v.get(c.id), n.get(c.id));
        if out.is_zero() {
            break;
        }
    }
    Ok(out)
}

/// `|(∧²_{Z_p} V_{λ'})^Γ[p^r]|`.
pub fn wedge2_invariant_order(
    decomp: &DecompData,
    shape: &ModuleShape,
    r: u32,
) -> Result<BigUint, ShapeError> {
    shape.check(decomp)?;
    let r = r as usize;
    // q -> running product, so half-integer powers of one base can pair up
    let mut by_base: BTreeMap<u64, QNum> = BTreeMap::new();
    for orbit in decomp.orbits() {
        let (q, twice) = match orbit {
            Orbit::SelfDual(c) => {
                let lam = shape.get(c.id);
                let eps = c.epsilon.unwrap_or(0) as i64;
                let t: i64 = (1..=r.min(lam.len()))
                    .map(|j| lam.part(j) as i64)
                    .map(|x| 2 * binom2(x) + (1 - eps) * x)
                    .sum();
                (c.q, t)
            }
            Orbit::Pair(a, b) => {
                let (la, lb) = (shape.get(a.id), shape.get(b.id));
                let t: i64 = (1..=r).map(|j| la.part(j) as i64 * lb.part(j) as i64).sum();
                (a.q, 2 * t)
            }
        };
        let f = QNum::q_half_pow(q, twice);
        let slot = by_base.entry(q).or_insert_with(|| QNum::one(q));
        *slot = &*slot * &f;
    }
    let mut out = BigUint::one();
    for v in by_base.values() {
        let x = v
            .to_rational()
            .ok_or_else(|| ShapeError::NonIntegral(v.to_string()))?;
        if !x.is_integer() {
            return Err(ShapeError::NonIntegral(x.to_string()));
        }
        out *= x.to_integer().to_biguint().expect("positive");
    }
    Ok(out)
}

/// Every shape with `|V| <= max_order`, by size, ties broken by component id
/// then partition order.
pub fn enumerate_shapes(decomp: &DecompData, max_order: u64) -> Vec<ModuleShape> {
    let ids = decomp.ids();
    let mut per_component: Vec<Vec<(u128, Partition)>> = Vec::new();
    for &id in &ids {
        let c = decomp.component(id).expect("listed");
        let unit = (c.q as u128).pow(c.n);
        let mut max_size = 0u32;
        let mut acc = unit;
        while acc <= max_order as u128 {
            max_size += 1;
            acc = acc.saturating_mul(unit);
        }
        let list = Partition::all_up_to(max_size)
            .into_iter()
            .map(|p| (unit.pow(p.size() as u32), p))
            .collect();
        per_component.push(list);
    }
    let mut out: Vec<(u128, ModuleShape)> = Vec::new();
    let mut cur = ModuleShape::empty();
    combine(
        &ids,
        &per_component,
        0,
        1,
        max_order as u128,
        &mut cur,
        &mut out,
    );
    out.sort_by(|(sa, a), (sb, b)| sa.cmp(sb).then_with(|| a.key(&ids).cmp(&b.key(&ids))));
    out.into_iter().map(|(_, s)| s).collect()
}

fn combine(
    ids: &[u32],
    lists: &[Vec<(u128, Partition)>],
    i: usize,
    size: u128,
    max: u128,
    cur: &mut ModuleShape,
    out: &mut Vec<(u128, ModuleShape)>,
) {
    if i == ids.len() {
        out.push((size, cur.clone()));
        return;
    }
    for (s, p) in &lists[i] {
        let total = size * s;
        if total > max {
            continue;
        }
        cur.set(ids[i], p.clone());
        combine(ids, lists, i + 1, total, max, cur, out);
    }
    cur.set(ids[i], Partition::empty());
}

/// Partitions `ρ` with at most `k` parts, `ρ_j >= λ_j >= ρ_{j+1}`, and
/// `|ρ| - |λ| <= e_max`: the `P` with `μ̂(N_{λ'}, P) != 0`.
pub fn interlacing_extensions(lambda: &Partition, k: u32, e_max: u64) -> Vec<Partition> {
    let k = k as usize;
    if lambda.len() > k {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    extend(lambda, k, e_max, 1, &mut cur, &mut out);
    out
}

fn extend(
    lambda: &Partition,
    k: usize,
    budget: u64,
    j: usize,
    cur: &mut Vec<u32>,
    out: &mut Vec<Partition>,
) {
    if j > k {
        out.push(Partition::new(cur.clone()).expect("interlacing keeps order"));
        return;
    }
    let lo = lambda.part(j);
    let hi = if j == 1 {
        lo as u64 + budget
    } else {
        (lambda.part(j - 1) as u64).min(lo as u64 + budget)
    };
    for x in lo as u64..=hi {
        cur.push(x as u32);
        extend(lambda, k, budget - (x - lo as u64), j + 1, cur, out);
        cur.pop();
    }
}

/// `log_q` of an exact power of `q`, if it is one.
pub fn q_log(q: u64, x: &BigUint) -> Option<u32> {
    let qb = BigUint::from(q);
    let mut acc = BigUint::one();
    let mut e = 0u32;
    while &acc < x {
        acc *= &qb;
        e += 1;
    }
    (&acc == x).then_some(e)
}
