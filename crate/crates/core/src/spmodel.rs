//! Random matrix model: cokernels of `A - I` for `A` uniform among matrices
//! over `Z/p^k` that are symplectic mod `p^r`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::measure::{dvr_selfdual_factored, MeasureError};
use crate::partmod::{sur_count, Partition};
use crate::qexact::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpError {
    #[error("truncation level k = {k} is below the symplectic level r = {r}")]
    LevelBelowR { k: u32, r: u32 },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Square matrix over `Z/p^k`, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixModPk {
    p: u64,
    k: u32,
    n: usize,
    data: Vec<u64>,
}

impl MatrixModPk {
    pub fn zero(p: u64, k: u32, n: usize) -> Self {
        MatrixModPk {
            p,
            k,
            n,
            data: vec![0; n * n],
        }
    }

    pub fn identity(p: u64, k: u32, n: usize) -> Self {
        let mut m = Self::zero(p, k, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Entries are reduced mod `p^k`.
    pub fn from_rows(p: u64, k: u32, rows: Vec<Vec<i64>>) -> Self {
        let n = rows.len();
        let modulus = p.pow(k) as i64;
        let data = rows
            .into_iter()
            .flat_map(|r| {
                assert_eq!(r.len(), n, "matrix must be square");
                r.into_iter().map(move |x| x.rem_euclid(modulus) as u64)
            })
            .collect();
        MatrixModPk { p, k, n, data }
    }

    /// `[[0, I], [-I, 0]]`.
    pub fn standard_form(p: u64, k: u32, g: usize) -> Self {
        let mut m = Self::zero(p, k, 2 * g);
        let minus_one = m.modulus() - 1;
        for i in 0..g {
            m.set(i, g + i, 1);
            m.set(g + i, i, minus_one);
        }
        m
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.k)
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        let m = self.modulus();
        self.data[i * self.n + j] = v % m;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// The same integer entries read mod `p^j`.
    pub fn reduce(&self, j: u32) -> Self {
        let m = self.p.pow(j);
        MatrixModPk {
            p: self.p,
            k: j,
            n: self.n,
            data: self.data.iter().map(|x| x % m).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                t.data[j * self.n + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let m = self.modulus() as u128;
        let mut out = Self::zero(self.p, self.k, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut acc = 0u128;
                for t in 0..self.n {
                    acc += self.get(i, t) as u128 * other.get(t, j) as u128;
                }
                out.data[i * self.n + j] = (acc % m) as u64;
            }
        }
        out
    }

    pub fn sub_identity(&self) -> Self {
        let mut out = self.clone();
        let m = self.modulus();
        for i in 0..self.n {
            out.data[i * self.n + i] = (self.get(i, i) + m - 1) % m;
        }
        out
    }

    /// `AᵀJA = J` mod `p^j`.
    pub fn is_symplectic_mod(&self, j: u32) -> bool {
        if !self.n.is_multiple_of(2) {
            return false;
        }
        let a = self.reduce(j);
        let jm = Self::standard_form(self.p, j, self.n / 2);
        a.transpose().mul(&jm).mul(&a) == jm
    }
}

fn omega(x: &[i64], y: &[i64], g: usize, p: i64) -> i64 {
    (0..g)
        .map(|i| x[i] * y[g + i] - x[g + i] * y[i])
        .sum::<i64>()
        .rem_euclid(p)
}

fn inverse_mod(a: i64, p: i64) -> i64 {
    (1..p)
        .find(|&x| (a * x).rem_euclid(p) == 1)
        .expect("nonzero residue mod a prime")
}

/// Uniform on `Sp_{2g}(F_p)`: a uniformly random symplectic basis, built one
/// hyperbolic pair at a time inside the orthogonal complement of the pairs
/// already chosen.
fn sample_sp_fp(p: u64, g: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<i64>> {
    let pi = p as i64;
    let dim = 2 * g;
    let mut es: Vec<Vec<i64>> = Vec::with_capacity(g);
    let mut fs: Vec<Vec<i64>> = Vec::with_capacity(g);
    // projection onto the complement of span(e_j, f_j)
    let project = |x: Vec<i64>, es: &[Vec<i64>], fs: &[Vec<i64>]| -> Vec<i64> {
        let mut y = x.clone();
        for (e, f) in es.iter().zip(fs) {
            let a = omega(&x, f, g, pi);
            let b = omega(&x, e, g, pi);
            for t in 0..dim {
                y[t] = (y[t] - a * e[t] + b * f[t]).rem_euclid(pi);
            }
        }
        y
    };
    let uniform =
        |rng: &mut ChaCha8Rng| -> Vec<i64> { (0..dim).map(|_| rng.gen_range(0..pi)).collect() };
    for _ in 0..g {
        let e = loop {
            let x = project(uniform(rng), &es, &fs);
            if x.iter().any(|&c| c != 0) {
                break x;
            }
        };
        let f = loop {
            let y = project(uniform(rng), &es, &fs);
            let c = omega(&e, &y, g, pi);
            if c != 0 {
                let inv = inverse_mod(c, pi);
                break y
                    .into_iter()
                    .map(|v| (v * inv).rem_euclid(pi))
                    .collect::<Vec<_>>();
            }
        };
        es.push(e);
        fs.push(f);
    }
    // columns e_1..e_g, f_1..f_g
    let cols: Vec<&Vec<i64>> = es.iter().chain(fs.iter()).collect();
    (0..dim)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect()
}

/// One uniform lift of a symplectic matrix mod `p^j` to one mod `p^{j+1}`.
///
/// Writing a lift as `Ã + p^j ÃY`, the condition is `S - Sᵀ = -E` for
/// `S = JY`, where `ÃᵀJÃ = J + p^j E`. The solutions are a fixed `S_0` plus
/// an arbitrary symmetric matrix, which is drawn uniformly.
fn hensel_step(a: &[Vec<i64>], p: i64, j: u32, g: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<i64>> {
    let n = 2 * g;
    let pj = p.pow(j) as i128;
    let next = pj * p as i128;
    let jmat = |i: usize, t: usize| -> i128 {
        if t == i + g && i < g {
            1
        } else if i == t + g && t < g {
            -1
        } else {
            0
        }
    };
    // E = (ÃᵀJÃ - J) / p^j mod p
    let mut ja = vec![vec![0i128; n]; n];
    for i in 0..n {
        for t in 0..n {
            ja[i][t] = (0..n).map(|s| jmat(i, s) * a[s][t] as i128).sum();
        }
    }
    let mut e = vec![vec![0i64; n]; n];
    for i in 0..n {
        for t in 0..n {
            let v: i128 = (0..n).map(|s| a[s][i] as i128 * ja[s][t]).sum::<i128>() - jmat(i, t);
            debug_assert_eq!(v.rem_euclid(pj), 0);
            e[i][t] = ((v / pj).rem_euclid(p as i128)) as i64;
        }
    }
    // S = -strict_lower(E) + symmetric
    let mut s = vec![vec![0i64; n]; n];
    for i in 0..n {
        for t in 0..=i {
            let sym = rng.gen_range(0..p);
            s[i][t] = sym;
            s[t][i] = sym;
        }
    }
    for i in 0..n {
        for t in 0..i {
            s[i][t] = (s[i][t] - e[i][t]).rem_euclid(p);
        }
    }
    // Y = J^{-1} S = -J S
    let mut y = vec![vec![0i64; n]; n];
    for i in 0..n {
        for t in 0..n {
            let v: i128 = (0..n).map(|u| -jmat(i, u) * s[u][t] as i128).sum();
            y[i][t] = v.rem_euclid(p as i128) as i64;
        }
    }
    let mut out = vec![vec![0i64; n]; n];
    for i in 0..n {
        for t in 0..n {
            let x: i128 = (0..n).map(|u| a[i][u] as i128 * y[u][t] as i128).sum();
            out[i][t] = ((a[i][t] as i128 + pj * x).rem_euclid(next)) as i64;
        }
    }
    out
}

/// Uniform on `Sp_{2g}(Z/p^r)`.
pub fn sample_sp(p: u64, r: u32, g: usize, rng: &mut ChaCha8Rng) -> MatrixModPk {
    assert!(g >= 1 && r >= 1, "need g >= 1 and r >= 1");
    let mut a = sample_sp_fp(p, g, rng);
    for j in 1..r {
        a = hensel_step(&a, p as i64, j, g, rng);
    }
    MatrixModPk::from_rows(p, r, a)
}

/// Uniform on matrices over `Z/p^k` that are symplectic mod `p^r`.
pub fn sample_sp_r(
    p: u64,
    r: u32,
    k: u32,
    g: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MatrixModPk, SpError> {
    if k < r {
        return Err(SpError::LevelBelowR { k, r });
    }
    let base = sample_sp(p, r, g, rng);
    let pr = p.pow(r);
    let span = p.pow(k - r);
    let mut out = MatrixModPk::zero(p, k, 2 * g);
    for i in 0..2 * g {
        for j in 0..2 * g {
            let lift = if span > 1 { rng.gen_range(0..span) } else { 0 };
            out.set(i, j, base.get(i, j) + pr * lift);
        }
    }
    Ok(out)
}

fn valuation(p: u64, x: u64, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    let (mut x, mut v) = (x, 0);
    while x % p == 0 && v < cap {
        x /= p;
        v += 1;
    }
    v
}

/// Exponents `a_i` with `coker(B) ≅ ⊕ Z/p^{a_i}` over `Z/p^k`, descending.
///
/// Elimination pivots on an entry of least valuation, which divides every
/// other entry in the local ring, so no gcd steps are needed.
pub fn smith_exponents(b: &MatrixModPk) -> Vec<u32> {
    let (p, k, n) = (b.p, b.k, b.n);
    let m = b.modulus() as u128;
    let mut a: Vec<Vec<u128>> = b
        .rows()
        .into_iter()
        .map(|r| r.into_iter().map(u128::from).collect())
        .collect();
    let mut exps = Vec::with_capacity(n);
    for step in 0..n {
        let mut best: Option<(u32, usize, usize)> = None;
        for (i, row) in a.iter().enumerate().skip(step) {
            for (j, &x) in row.iter().enumerate().skip(step) {
                let v = valuation(p, x as u64, k);
                if best.is_none_or(|(bv, _, _)| v < bv) {
                    best = Some((v, i, j));
                }
            }
        }
        let (v, pi, pj) = best.expect("nonempty block");
        if v == k {
            // the remaining block is zero
            exps.extend(std::iter::repeat_n(k, n - step));
            break;
        }
        a.swap(step, pi);
        for row in a.iter_mut() {
            row.swap(step, pj);
        }
        exps.push(v);
        // pivot = p^v·w with w a unit
        let pv = p.pow(v) as u128;
        let w = (a[step][step] / pv) % m;
        let w_inv = unit_inverse(w, p, m);
        for i in step + 1..n {
            let x = a[i][step];
            if x == 0 {
                continue;
            }
            let c = (x / pv) % m * w_inv % m;
            for j in step..n {
                a[i][j] = (a[i][j] + m - c * a[step][j] % m) % m;
            }
        }
        for j in step + 1..n {
            let x = a[step][j];
            if x == 0 {
                continue;
            }
            let c = (x / pv) % m * w_inv % m;
            for row in a.iter_mut().skip(step) {
                row[j] = (row[j] + m - c * row[step] % m) % m;
            }
        }
    }
    let mut out: Vec<u32> = exps.into_iter().filter(|&e| e > 0).collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

fn unit_inverse(w: u128, p: u64, m: u128) -> u128 {
    // w^{φ(m) - 1}
    let phi = m / p as u128 * (p as u128 - 1);
    let mut e = phi - 1;
    let (mut base, mut acc) = (w % m, 1u128);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc
}

/// Exponent partition of `coker(A - I)` over `Z/p^k`.
pub fn cokernel_shape(a: &MatrixModPk) -> Partition {
    Partition::new(smith_exponents(&a.sub_identity())).expect("sorted descending")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub p: u64,
    pub r: u32,
    pub k: u32,
    pub g: usize,
    pub seed: u64,
    pub samples: u64,
    /// Keyed by cokernel exponent partitions.
    pub counts: BTreeMap<Partition, u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("histogram serializes")
    }
}

impl Serialize for Histogram {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out {
            p: u64,
            r: u32,
            k: u32,
            g: usize,
            seed: u64,
            samples: u64,
            counts: BTreeMap<String, u64>,
        }
        let counts = self
            .counts
            .iter()
            .map(|(lam, &c)| (serde_json::to_string(lam.parts()).expect("list"), c))
            .collect();
        Out {
            p: self.p,
            r: self.r,
            k: self.k,
            g: self.g,
            seed: self.seed,
            samples: self.samples,
            counts,
        }
        .serialize(ser)
    }
}

/// The generator for one sample: `seed` picks the key, the index the stream.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_experiment(
    p: u64,
    r: u32,
    k: u32,
    g: usize,
    samples: u64,
    seed: u64,
) -> Result<Histogram, SpError> {
    if k < r {
        return Err(SpError::LevelBelowR { k, r });
    }
    if samples == 0 || g == 0 || r == 0 {
        return Err(SpError::Invalid("samples, g and r must be positive".into()));
    }
    if !crate::decomp::is_prime(p) {
        return Err(SpError::Invalid(format!("{p} is not prime")));
    }
    let counts = (0..samples)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<Partition, u64>, i| {
            let mut rng = sample_rng(seed, i);
            let a = sample_sp_r(p, r, k, g, &mut rng).expect("k >= r checked");
            if cfg!(debug_assertions) || i % 100 == 0 {
                assert!(
                    a.is_symplectic_mod(r),
                    "sample {i} is not symplectic mod p^r"
                );
            }
            *acc.entry(cokernel_shape(&a)).or_default() += 1;
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (key, c) in b {
                *a.entry(key).or_default() += c;
            }
            a
        });
    Ok(Histogram {
        p,
        r,
        k,
        g,
        seed,
        samples,
        counts,
    })
}

/// Limit probability of the level-`k` class with exponent partition `exps`.
pub fn limit_probability(
    p: u64,
    r: u32,
    k: u32,
    exps: &Partition,
    tol: &Rational,
) -> Result<f64, SpError> {
    let lam = exps.conjugate();
    let f = dvr_selfdual_factored(p, &Rational::zero(), &Rational::zero(), Some(r), k, &lam)?;
    Ok(f.eval(tol).map_err(MeasureError::from)?.to_f64())
}

#[derive(Clone, Debug, Serialize)]
pub struct BinReport {
    /// Exponent partition, or `None` for the pooled remainder.
    pub shape: Option<Vec<u32>>,
    pub observed: u64,
    pub expected: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitComparison {
    pub bins: Vec<BinReport>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Shapes whose expected count fell below 5, folded into the last bin.
    pub pooled: Vec<Vec<u32>>,
    /// `½ Σ |empirical - limit|` over the bins.
    pub total_variation: f64,
}

impl LimitComparison {
    pub fn max_abs_z(&self, min_expected: f64) -> f64 {
        self.bins
            .iter()
            .filter(|b| b.shape.is_some() && b.expected >= min_expected)
            .map(|b| b.z.abs())
            .fold(0.0, f64::max)
    }
}

/// Exponent partitions with parts `<= k` and total at most `max_size`.
fn level_shapes(k: u32, max_size: u32) -> Vec<Partition> {
    Partition::all_up_to(max_size)
        .into_iter()
        .filter(|p| p.part(1) <= k)
        .collect()
}

/// Chi-square and per-shape z-scores of a histogram against the limit law.
pub fn compare_to_limit(h: &Histogram, tol: &Rational) -> Result<LimitComparison, SpError> {
    let n = h.total() as f64;
    let expected_of = |shape: &Partition| -> Result<f64, SpError> {
        Ok(n * limit_probability(h.p, h.r, h.k, shape, tol)?)
    };
    compare_with(h, expected_of)
}

/// Same as `compare_to_limit` with caller-supplied expected counts.
pub fn compare_with(
    h: &Histogram,
    expected_of: impl Fn(&Partition) -> Result<f64, SpError>,
) -> Result<LimitComparison, SpError> {
    let n = h.total() as f64;
    let max_size = 2 * h.g as u32 * h.k;
    let mut shapes = level_shapes(h.k, max_size.min(12));
    for s in h.counts.keys() {
        if !shapes.contains(s) {
            shapes.push(s.clone());
        }
    }
    let mut bins = Vec::new();
    let mut pooled = Vec::new();
    let (mut rest_obs, mut listed_exp) = (0u64, 0.0);
    let mut pooled_exp = 0.0;
    for s in shapes {
        let e = expected_of(&s)?;
        let o = h.counts.get(&s).copied().unwrap_or(0);
        listed_exp += e;
        if e >= 5.0 {
            let z = (o as f64 - e) / (e * (1.0 - e / n)).sqrt();
            bins.push(BinReport {
                shape: Some(s.parts().to_vec()),
                observed: o,
                expected: e,
                z,
            });
        } else {
            if o > 0 || e > 0.0 {
                pooled.push(s.parts().to_vec());
            }
            rest_obs += o;
            pooled_exp += e;
        }
    }
    // mass beyond the enumerated shapes goes to the pooled bin too
    pooled_exp += (n - listed_exp).max(0.0);
    if pooled_exp > 0.0 || rest_obs > 0 {
        let z = if pooled_exp > 0.0 {
            (rest_obs as f64 - pooled_exp) / (pooled_exp * (1.0 - pooled_exp / n)).sqrt()
        } else {
            f64::INFINITY
        };
        bins.push(BinReport {
            shape: None,
            observed: rest_obs,
            expected: pooled_exp,
            z,
        });
    }
    let chi_square: f64 = bins
        .iter()
        .filter(|b| b.expected > 0.0)
        .map(|b| (b.observed as f64 - b.expected).powi(2) / b.expected)
        .sum();
    let dof = bins.len().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64)
        .map(|d| 1.0 - d.cdf(chi_square))
        .unwrap_or(f64::NAN);
    let total_variation = bins
        .iter()
        .map(|b| (b.observed as f64 - b.expected).abs())
        .sum::<f64>()
        / (2.0 * n);
    Ok(LimitComparison {
        bins,
        chi_square,
        dof,
        p_value,
        pooled,
        total_variation,
    })
}

/// Sample mean and its standard error of `|Sur(coker, N)|`, `N` given by its
/// exponent partition.
pub fn sur_moment(h: &Histogram, target_exps: &Partition) -> (f64, f64) {
    let target = target_exps.conjugate();
    let n = h.total() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (shape, &c) in &h.counts {
        let v = BigInt::from(sur_count(h.p, &shape.conjugate(), &target))
            .to_f64()
            .unwrap_or(f64::INFINITY);
        s1 += c as f64 * v;
        s2 += c as f64 * v * v;
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `|∧²N[p^r]|`, the limit moment, for `N` given by its exponent partition.
pub fn limit_moment(p: u64, r: u32, target_exps: &Partition) -> Rational {
    let lam = target_exps.conjugate();
    let e: i64 = (1..=(r as usize).min(lam.len()))
        .map(|j| crate::qexact::binom2(lam.part(j) as i64))
        .sum();
    crate::qexact::q_pow(p, e)
}
