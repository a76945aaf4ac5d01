//! Brute-force surjection counts over Galois rings, used as ground truth for
//! the closed forms.

use std::collections::HashMap;

use crate::galois::{GaloisRing, GrElem};

use super::Partition;

/// Largest `|M|·|N|` the oracle will enumerate.
pub const ORACLE_MAX_ORDER: u64 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("|M|·|N| = {0} exceeds the oracle bound {ORACLE_MAX_ORDER}")]
    TooLarge(u128),
    #[error("modules live over different rings")]
    RingMismatch,
}

/// `⊕_i GR(p^K, d)/p^{a_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicSum {
    pub p: u64,
    pub d: usize,
    pub exps: Vec<u32>,
}

impl CyclicSum {
    pub fn new(p: u64, d: usize, exps: Vec<u32>) -> Self {
        CyclicSum {
            p,
            d,
            exps: exps.into_iter().filter(|&a| a > 0).collect(),
        }
    }

    /// The module `N_{λ'}`.
    pub fn from_partition(p: u64, d: usize, lambda: &Partition) -> Self {
        Self::new(p, d, lambda.conjugate().parts().to_vec())
    }

    pub fn order(&self) -> u128 {
        let q = (self.p as u128).pow(self.d as u32);
        self.exps.iter().map(|&a| q.pow(a)).product()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KernelCounts {
    pub surjections: u64,
    /// Surjections whose kernel is killed by `p`.
    pub semisimple_kernel: u64,
}

struct Setup {
    ring: GaloisRing,
    src: Vec<u32>,
    dst: Vec<u32>,
}

fn setup(m: &CyclicSum, n: &CyclicSum, bound: u64) -> Result<Setup, OracleError> {
    if m.p != n.p || m.d != n.d {
        return Err(OracleError::RingMismatch);
    }
    let total = m.order() * n.order();
    if total > bound as u128 {
        return Err(OracleError::TooLarge(total));
    }
    let k = m
        .exps
        .iter()
        .chain(&n.exps)
        .copied()
        .max()
        .unwrap_or(1)
        .max(1);
    Ok(Setup {
        ring: GaloisRing::new(m.p, k, m.d),
        src: m.exps.clone(),
        dst: n.exps.clone(),
    })
}

/// Every element of `N`, as one ring element per summand.
fn elements(ring: &GaloisRing, exps: &[u32]) -> Vec<Vec<GrElem>> {
    let mut out = vec![Vec::new()];
    for &b in exps {
        let sub = ring.p().pow(b);
        let per = sub.pow(ring.d() as u32);
        let mut next = Vec::with_capacity(out.len() * per as usize);
        for prefix in &out {
            for idx in 0..per {
                let mut e = ring.zero();
                let mut rest = idx;
                for c in e.iter_mut() {
                    *c = rest % sub;
                    rest /= sub;
                }
                let mut v = prefix.clone();
                v.push(e);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn reduce(ring: &GaloisRing, x: &[u64], b: u32) -> GrElem {
    let m = ring.p().pow(b);
    x.iter().map(|&c| c % m).collect()
}

/// `p^a x = 0` in `⊕ GR/p^{b_j}`.
fn killed_by(ring: &GaloisRing, x: &[GrElem], exps: &[u32], a: u32) -> bool {
    let pa = ring.p().pow(a);
    x.iter()
        .zip(exps)
        .all(|(c, &b)| ring.is_zero(&reduce(ring, &ring.scale(pa, c), b)))
}

/// `F_p`-coordinates of `y^t x mod p` for `t < d`, all summands concatenated.
fn residue_span(ring: &GaloisRing, x: &[GrElem]) -> Vec<Vec<u64>> {
    let y = ring.gen();
    let mut cur: Vec<GrElem> = x.to_vec();
    let mut rows = Vec::with_capacity(ring.d());
    for _ in 0..ring.d() {
        rows.push(cur.iter().flat_map(|c| ring.residue(c)).collect());
        cur = cur.iter().map(|c| ring.mul(&y, c)).collect();
    }
    rows
}

/// Row echelon basis over `F_p`, grown one vector at a time.
#[derive(Clone)]
struct Echelon {
    p: u64,
    rows: Vec<(usize, Vec<u64>)>,
}

impl Echelon {
    fn new(p: u64) -> Self {
        Echelon {
            p,
            rows: Vec::new(),
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn insert(&mut self, mut v: Vec<u64>) {
        let p = self.p;
        for (piv, row) in &self.rows {
            let c = v[*piv];
            if c != 0 {
                for (x, r) in v.iter_mut().zip(row) {
                    *x = (*x + p * p - (c * r) % p) % p;
                }
            }
        }
        if let Some(piv) = v.iter().position(|&x| x != 0) {
            let inv = inverse_mod(v[piv], p);
            for x in v.iter_mut() {
                *x = (*x * inv) % p;
            }
            self.rows.push((piv, v));
        }
    }
}

fn inverse_mod(a: u64, p: u64) -> u64 {
    (1..p)
        .find(|&x| (a * x) % p == 1)
        .expect("nonzero residue mod a prime")
}

/// `|Sur(M, N)|`: generator images range over `N[p^{a_i}]`, and a choice is
/// onto iff the images span `N/pN` over `F_p` together with their `y`-multiples.
pub fn oracle_sur_count(m: &CyclicSum, n: &CyclicSum) -> Result<u64, OracleError> {
    let s = setup(m, n, ORACLE_MAX_ORDER)?;
    let ring = &s.ring;
    let all = elements(ring, &s.dst);
    let target = ring.d() * s.dst.len();
    // per generator: residue span of each admissible image, with multiplicity
    let mut choices: Vec<Vec<(Vec<Vec<u64>>, u64)>> = Vec::new();
    for &a in &s.src {
        let mut by_residue: HashMap<Vec<Vec<u64>>, u64> = HashMap::new();
        for x in all.iter().filter(|x| killed_by(ring, x, &s.dst, a)) {
            *by_residue.entry(residue_span(ring, x)).or_default() += 1;
        }
        let mut v: Vec<_> = by_residue.into_iter().collect();
        v.sort();
        choices.push(v);
    }
    Ok(count_spanning(
        &choices,
        0,
        &Echelon::new(ring.p()),
        target,
        ring.d(),
    ))
}

fn count_spanning(
    choices: &[Vec<(Vec<Vec<u64>>, u64)>],
    i: usize,
    basis: &Echelon,
    target: usize,
    d: usize,
) -> u64 {
    if basis.rank() + d * (choices.len() - i) < target {
        return 0;
    }
    if i == choices.len() {
        return 1;
    }
    let mut total = 0;
    for (rows, mult) in &choices[i] {
        let mut next = basis.clone();
        for r in rows {
            next.insert(r.clone());
        }
        total += mult * count_spanning(choices, i + 1, &next, target, d);
    }
    total
}

/// Surjection count together with the number whose kernel is semisimple,
/// enumerating every tuple of generator images.
pub fn oracle_sur_count_by_kernel(
    m: &CyclicSum,
    n: &CyclicSum,
    bound: u64,
) -> Result<KernelCounts, OracleError> {
    let s = setup(m, n, bound.min(ORACLE_MAX_ORDER))?;
    if m.order() < n.order() {
        return Ok(KernelCounts::default());
    }
    let ring = &s.ring;
    let all = elements(ring, &s.dst);
    let target = ring.d() * s.dst.len();
    let log_p = |o: u128| (o as f64).log(ring.p() as f64).round() as usize;
    let kernel_dim = log_p(m.order()) - log_p(n.order());
    let admissible: Vec<Vec<&Vec<GrElem>>> = s
        .src
        .iter()
        .map(|&a| {
            all.iter()
                .filter(|x| killed_by(ring, x, &s.dst, a))
                .collect()
        })
        .collect();
    let mut counts = KernelCounts::default();
    let mut pick = vec![0usize; s.src.len()];
    loop {
        let images: Vec<&Vec<GrElem>> = pick
            .iter()
            .enumerate()
            .map(|(i, &j)| admissible[i][j])
            .collect();
        let mut span = Echelon::new(ring.p());
        for x in &images {
            for r in residue_span(ring, x) {
                span.insert(r);
            }
        }
        if span.rank() == target {
            counts.surjections += 1;
            if socle_kernel_dim(ring, &s.src, &s.dst, &images) == kernel_dim {
                counts.semisimple_kernel += 1;
            }
        }
        // odometer
        let mut i = 0;
        loop {
            if i == pick.len() {
                return Ok(counts);
            }
            pick[i] += 1;
            if pick[i] < admissible[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

/// `dim_{F_p} ker(φ|_{M[p]})`, read off from `φ(p^{a_i-1} y^t g_i)` in the
/// `N[p] ≅ F_q^s` coordinates.
fn socle_kernel_dim(ring: &GaloisRing, src: &[u32], dst: &[u32], images: &[&Vec<GrElem>]) -> usize {
    let y = ring.gen();
    let mut span = Echelon::new(ring.p());
    for (&a, x) in src.iter().zip(images) {
        let lifted: Vec<GrElem> = x
            .iter()
            .map(|c| ring.scale(ring.p().pow(a - 1), c))
            .collect();
        let mut cur = lifted;
        for _ in 0..ring.d() {
            let coords: Vec<u64> = cur
                .iter()
                .zip(dst)
                .flat_map(|(c, &b)| {
                    let c = reduce(ring, c, b);
                    let unit = ring.p().pow(b - 1);
                    c.into_iter().map(move |v| (v / unit) % ring.p())
                })
                .collect();
            span.insert(coords);
            cur = cur.iter().map(|c| ring.mul(&y, c)).collect();
        }
    }
    src.len() * ring.d() - span.rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(p: u64, d: usize, e: &[u32]) -> CyclicSum {
        CyclicSum::new(p, d, e.to_vec())
    }

    #[test]
    fn small_counts() {
        assert_eq!(
            oracle_sur_count(&cs(2, 1, &[2]), &cs(2, 1, &[1])).unwrap(),
            1
        );
        assert_eq!(
            oracle_sur_count(&cs(2, 1, &[1, 1]), &cs(2, 1, &[1])).unwrap(),
            3
        );
        assert_eq!(oracle_sur_count(&cs(2, 1, &[]), &cs(2, 1, &[])).unwrap(), 1);
        assert_eq!(
            oracle_sur_count(&cs(3, 1, &[1]), &cs(3, 1, &[1])).unwrap(),
            2
        );
        // GL_2(F_2)
        assert_eq!(
            oracle_sur_count(&cs(2, 1, &[1, 1]), &cs(2, 1, &[1, 1])).unwrap(),
            6
        );
        // units of F_4
        assert_eq!(
            oracle_sur_count(&cs(2, 2, &[1]), &cs(2, 2, &[1])).unwrap(),
            3
        );
        // units of Z/4[y]/(y^2+y+1)
        assert_eq!(
            oracle_sur_count(&cs(2, 2, &[2]), &cs(2, 2, &[2])).unwrap(),
            12
        );
    }

    #[test]
    fn kernel_filter() {
        let k =
            oracle_sur_count_by_kernel(&cs(2, 1, &[2]), &cs(2, 1, &[1]), ORACLE_MAX_ORDER).unwrap();
        assert_eq!(
            k,
            KernelCounts {
                surjections: 1,
                semisimple_kernel: 1
            }
        );
        let k = oracle_sur_count_by_kernel(&cs(2, 1, &[1, 1]), &cs(2, 1, &[1]), ORACLE_MAX_ORDER)
            .unwrap();
        assert_eq!(
            k,
            KernelCounts {
                surjections: 3,
                semisimple_kernel: 3
            }
        );
        // Z/8 -> Z/2 has kernel Z/4
        let k =
            oracle_sur_count_by_kernel(&cs(2, 1, &[3]), &cs(2, 1, &[1]), ORACLE_MAX_ORDER).unwrap();
        assert_eq!(
            k,
            KernelCounts {
                surjections: 1,
                semisimple_kernel: 0
            }
        );
    }

    #[test]
    fn bound_enforced() {
        assert!(matches!(
            oracle_sur_count(&cs(2, 1, &[7]), &cs(2, 1, &[6])),
            Err(OracleError::TooLarge(_))
        ));
    }
}
