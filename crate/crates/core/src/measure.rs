//! The conjectured measures: the q-series factors `Pf`, `Qf`, `Q̄f`, `D`,
//! the one- and two-factor measures on vector spaces and DVR modules, and
//! their products over a decomposition.
//!
//! Every measure is first assembled as a [`Factored`] value, an exact
//! coefficient times a list of infinite products, and only then enclosed.
//! Keeping the infinite products symbolic lets two routes to the same
//! number be compared exactly and lets ratios cancel them outright.

use std::collections::BTreeMap;
use std::ops::Mul;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::decomp::{validate, ComponentData, DecompData, Orbit, Violation};
use crate::partmod::{aut_order, ModuleShape, Partition, ShapeError};
use crate::qexact::{
    binom2, bits_for, eta_inf, gauss_binom, inf_product, int, pochhammer, q_pow, CertValue, QError,
    QNum, Rational,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error(transparent)]
    Arithmetic(#[from] QError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid decomposition: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Decomp(Vec<Violation>),
    #[error("outside the formula's domain: {0}")]
    Domain(String),
    #[error("component {id}: partition {lambda} has more than k = {k} parts")]
    LevelTooSmall { id: u32, k: u32, lambda: Partition },
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

fn domain(msg: impl Into<String>) -> MeasureError {
    MeasureError::Domain(msg.into())
}

/// `2x` as an integer, for a half-integer `x`.
fn twice(x: &Rational, what: &str) -> Result<i64, MeasureError> {
    let t = x * int(2);
    if !t.is_integer() {
        return Err(domain(format!("{what} = {x} is not a half-integer")));
    }
    t.to_integer()
        .to_i64()
        .ok_or_else(|| domain(format!("{what} = {x} is too large")))
}

/// An infinite product left unevaluated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InfFactor {
    /// `η_q(∞)`.
    Eta { q: u64 },
    /// `∏_{ℓ≥0} (1 + q^{-a-ℓ})^{-1}` with `a = twice_a / 2 > 0`.
    OnePlusInv { q: u64, twice_a: i64 },
}

impl InfFactor {
    pub fn enclose(&self, tol: &Rational) -> Result<CertValue, QError> {
        match *self {
            InfFactor::Eta { q } => eta_inf(q, tol),
            InfFactor::OnePlusInv { q, twice_a } => {
                inf_product(q, &Rational::new(twice_a.into(), 2.into()), 1, -1, tol)
            }
        }
    }
}

/// `coeff · ∏ inf`, with `coeff` exact. A zero coefficient is an exact zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factored {
    coeff: QNum,
    inf: Vec<InfFactor>,
}

impl Factored {
    pub fn new(coeff: QNum, mut inf: Vec<InfFactor>) -> Self {
        if coeff.is_zero() {
            inf.clear();
        }
        inf.sort();
        Factored { coeff, inf }
    }

    pub fn exact(coeff: QNum) -> Self {
        Self::new(coeff, Vec::new())
    }

    pub fn one(base: u64) -> Self {
        Self::exact(QNum::one(base))
    }

    pub fn zero(base: u64) -> Self {
        Self::exact(QNum::zero(base))
    }

    pub fn coeff(&self) -> &QNum {
        &self.coeff
    }

    pub fn inf(&self) -> &[InfFactor] {
        &self.inf
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    pub fn scale(&self, r: &QNum) -> Self {
        Self::new(&self.coeff * r, self.inf.clone())
    }

    /// Enclosure of width at most `tol`. Every infinite factor lies in
    /// `(0, 1]`, so splitting the budget by the coefficient's size suffices.
    pub fn eval(&self, tol: &Rational) -> Result<CertValue, QError> {
        if !tol.is_positive() {
            return Err(QError::NonPositiveTolerance);
        }
        if self.coeff.is_zero() {
            return Ok(CertValue::zero());
        }
        let rough = self.coeff.enclose(32);
        let mag = rough.lo().abs().max(rough.hi().abs()) + Rational::one();
        let mut t = tol / (mag * int(4 * (self.inf.len() as u64 + 2)));
        let bits = bits_for(tol) + 6;
        for _ in 0..6 {
            let mut acc = self.coeff.to_cert(&t);
            for f in &self.inf {
                acc = &acc * &f.enclose(&t)?;
            }
            let out = acc.round_outward(bits);
            if &out.width() <= tol {
                return Ok(out);
            }
            t /= int(64);
        }
        Err(QError::Precision)
    }

    /// Enclosure of width at most `rel` times the coefficient's size, so
    /// tiny nonzero values still come out with a sign.
    pub fn eval_relative(&self, rel: &Rational) -> Result<CertValue, QError> {
        if self.coeff.is_zero() {
            return self.eval(rel);
        }
        let rough = self.coeff.enclose(64);
        let mag = rough.lo().abs().min(rough.hi().abs());
        if mag.is_zero() {
            return self.eval(rel);
        }
        self.eval(&(rel * mag))
    }
}

impl Mul<&Factored> for &Factored {
    type Output = Factored;
    fn mul(self, rhs: &Factored) -> Factored {
        let mut inf = self.inf.clone();
        inf.extend(rhs.inf.iter().cloned());
        Factored::new(&self.coeff * &rhs.coeff, inf)
    }
}

/// Rewrites an element of `Q(√q)`, `q = p^d`, over `Q(√p)`.
fn rebase(x: &QNum, p: u64, d: u32) -> QNum {
    if d.is_multiple_of(2) || x.b().is_zero() {
        // QNum already folds √q when q is a square
        return QNum::from_rational(p, x.a().clone());
    }
    QNum::new(p, x.a().clone(), x.b() * q_pow(p, (d as i64 - 1) / 2))
}

fn rebase_factored(f: &Factored, p: u64, d: u32) -> Factored {
    Factored::new(rebase(&f.coeff, p, d), f.inf.clone())
}

fn rat(q: u64, r: Rational) -> QNum {
    QNum::from_rational(q, r)
}

/// `Pf_q(t, m)` for a half-integer `t`, any sign.
pub(crate) fn pf_signed(q: u64, twice_t: i64, m: u64) -> QNum {
    let mut acc = QNum::zero(q);
    for e in 0..=m {
        let term =
            QNum::q_half_pow(q, -(twice_t + 2) * e as i64).scale(&gauss_binom(q, m, e as i64));
        acc = if e % 2 == 0 {
            &acc + &term
        } else {
            &acc - &term
        };
    }
    acc
}

/// `Pf_q(t, m) = Σ_{e=0}^m (-1)^e q^{-(t+1)e} η(m)/(η(e)η(m-e))` for a
/// half-integer `t >= 0`.
pub fn pf(q: u64, t: &Rational, m: u64) -> Result<QNum, MeasureError> {
    if q < 2 {
        return Err(QError::InvalidBase(q).into());
    }
    if t.is_negative() {
        return Err(domain(format!("Pf needs t >= 0, got {t}")));
    }
    Ok(pf_signed(q, twice(t, "t")?, m))
}

/// `∏_{j=1}^{⌈m/2⌉} (1 - q^{-(2j-1)})`, the closed form of `Pf_q(0, m)`.
pub fn pf_closed_zero(q: u64, m: u64) -> Rational {
    let mut acc = Rational::one();
    for j in 1..=m.div_ceil(2) {
        acc *= Rational::one() - q_pow(q, -(2 * j as i64 - 1));
    }
    acc
}

fn eta_i(q: u64, k: i64) -> Rational {
    assert!(k >= 0, "η of a negative index");
    pochhammer(q, k as u64)
}

fn check_qf(lp: i64, l: i64, fp: i64, f: i64, s1: i64, s2: i64) -> Result<(), MeasureError> {
    if l < 0 || f < 0 || lp < l || fp < f {
        return Err(domain(format!(
            "Qf needs λ_prev >= λ >= 0 and φ_prev >= φ >= 0, got ({lp},{l},{fp},{f})"
        )));
    }
    if fp - lp > s1 || lp - fp > s2 {
        return Err(domain(format!(
            "Qf needs φ_prev - λ_prev <= s1 and λ_prev - φ_prev <= s2, got ({lp},{l},{fp},{f},{s1},{s2})"
        )));
    }
    Ok(())
}

/// The double sum `Qf_q(λ_prev, λ, φ_prev, φ, s1, s2)`.
pub fn qf(
    q: u64,
    lp: i64,
    l: i64,
    fp: i64,
    f: i64,
    s1: i64,
    s2: i64,
) -> Result<Rational, MeasureError> {
    check_qf(lp, l, fp, f, s1, s2)?;
    let mut acc = Rational::zero();
    for e in 0..=lp - l {
        for g in 0..=fp - f {
            let (a, b) = (l + e, f + g);
            let expo = binom2(a) - binom2(l) - s1 * a + binom2(b) - binom2(f) - s2 * b + a * b
                - a * a
                - b * b;
            let den = eta_i(q, e) * eta_i(q, lp - l - e) * eta_i(q, g) * eta_i(q, fp - f - g);
            let term = q_pow(q, expo) / den;
            if (e + g) % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
    }
    Ok(acc)
}

/// `Q̄f`, the normalization of [`qf`] with its leading monomial and
/// η-factors divided out.
pub fn qbar(
    q: u64,
    lp: i64,
    l: i64,
    fp: i64,
    f: i64,
    s1: i64,
    s2: i64,
) -> Result<Rational, MeasureError> {
    let value = qf(q, lp, l, fp, f, s1, s2)?;
    let pre =
        q_pow(q, -l * l - s1 * l - f * f - s2 * f + l * f) / (eta_i(q, lp - l) * eta_i(q, fp - f));
    Ok(value / pre)
}

fn d_factored(q: u64, l: i64, f: i64, s1: i64, s2: i64) -> Result<Factored, MeasureError> {
    if s1 + s2 < 0 {
        return Err(domain(format!("D needs s1 + s2 >= 0, got {s1} + {s2}")));
    }
    if l < 0 || f < 0 {
        return Err(domain("D needs non-negative ranks"));
    }
    if !(-s1 <= l - f && l - f <= s2) {
        return Ok(Factored::zero(q));
    }
    let c = q_pow(q, -l * l - f * f + l * f - s1 * l - s2 * f) * eta_i(q, s1 + s2)
        / (eta_i(q, l) * eta_i(q, f) * eta_i(q, s2 - l + f) * eta_i(q, s1 + l - f));
    Ok(Factored::new(rat(q, c), vec![InfFactor::Eta { q }]))
}

/// `D_q(λ, φ, s1, s2)`: the dual-pair measure on pairs of vector spaces.
pub fn d_factor(
    q: u64,
    l: u64,
    f: u64,
    s1: i64,
    s2: i64,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    Ok(d_factored(q, l as i64, f as i64, s1, s2)?.eval(tol)?)
}

/// `q^{-binom(λ,2) - tλ} / (η(λ) ∏_{i≥0}(1 + q^{-i-t}))` for half-integer `t > 0`.
pub fn nu_vs_selfdual(
    q: u64,
    t: &Rational,
    lambda: u64,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    let tt = twice(t, "t")?;
    if tt <= 0 {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    let l = lambda as i64;
    let c = QNum::q_half_pow(q, -2 * binom2(l) - tt * l).scale(&pochhammer(q, lambda).recip());
    Ok(Factored::new(c, vec![InfFactor::OnePlusInv { q, twice_a: tt }]).eval(tol)?)
}

fn check_level(id: u32, k: u32, lambda: &Partition) -> Result<(), MeasureError> {
    if lambda.len() > k as usize {
        return Err(MeasureError::LevelTooSmall {
            id,
            k,
            lambda: lambda.clone(),
        });
    }
    Ok(())
}

/// The self-dual DVR measure of `{P : P^{≤k} ≅ N_{λ'}}`, symbolic. `r = None`
/// means `r = ∞`.
pub fn dvr_selfdual_factored(
    q: u64,
    s: &Rational,
    eps: &Rational,
    r: Option<u32>,
    k: u32,
    lambda: &Partition,
) -> Result<Factored, MeasureError> {
    let ts = twice(s, "s")?;
    let te = twice(eps, "ε")?;
    if ts < 0 || ts - te < 0 {
        return Err(domain(format!(
            "need s >= 0 and s - ε >= 0, got s = {s}, ε = {eps}"
        )));
    }
    if k == 0 {
        return Err(domain("k must be positive"));
    }
    check_level(0, k, lambda)?;
    let top = r.map_or(lambda.len(), |r| r as usize);
    let mut moment_twice = -ts * lambda.size() as i64;
    for j in 1..=top.min(lambda.len()) {
        let x = lambda.part(j) as i64;
        moment_twice += 2 * binom2(x) + te * x;
    }
    let mut c = QNum::q_half_pow(q, moment_twice).scale(&recip_nat(aut_order(q, lambda)));
    let lim = r.map_or(k, |r| r.min(k)) as usize;
    for j in 2..=lim {
        c = &c * &pf_signed(q, ts - te, (lambda.part(j - 1) - lambda.part(j)) as u64);
    }
    for i in lambda.part(k as usize) + 1..=lambda.part(lim) {
        c = &c * &(QNum::one(q) - QNum::q_half_pow(q, -ts - 2 * i as i64));
    }
    Ok(Factored::new(
        c,
        vec![InfFactor::OnePlusInv {
            q,
            twice_a: ts - te + 2,
        }],
    ))
}

/// `1/x`.
fn recip_nat(x: num_bigint::BigUint) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(x))
}

/// Certified value of the self-dual DVR level-set measure.
#[allow(clippy::too_many_arguments)]
pub fn nu_dvr_selfdual(
    q: u64,
    s: &Rational,
    eps: &Rational,
    r: Option<u32>,
    k: u32,
    lambda: &Partition,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    Ok(dvr_selfdual_factored(q, s, eps, r, k, lambda)?.eval(tol)?)
}

/// The dual-pair DVR measure of `{P : P^{≤(k1,k2)} ≅ (N_{λ'}, N_{φ'})}`, symbolic.
#[allow(clippy::too_many_arguments)]
pub fn dvr_dualpair_factored(
    q: u64,
    s1: i64,
    s2: i64,
    r: u32,
    k1: u32,
    k2: u32,
    lambda: &Partition,
    phi: &Partition,
) -> Result<Factored, MeasureError> {
    if s1 < 0 || s2 < 0 {
        return Err(domain(format!("need s1, s2 >= 0, got {s1}, {s2}")));
    }
    if r == 0 || k1 == 0 || k2 == 0 {
        return Err(domain("r, k1, k2 must be positive"));
    }
    check_level(0, k1, lambda)?;
    check_level(0, k2, phi)?;
    let part = |p: &Partition, j: usize| p.part(j) as i64;
    let delta = part(lambda, 1) - part(phi, 1);
    if !(-s1 <= delta && delta <= s2) {
        return Ok(Factored::zero(q));
    }
    let cross: i64 = (1..=r as usize)
        .map(|j| part(lambda, j) * part(phi, j))
        .sum();
    let expo = cross - s1 * lambda.size() as i64 - s2 * phi.size() as i64;
    let mut c = q_pow(q, expo) * recip_nat(aut_order(q, lambda)) * recip_nat(aut_order(q, phi));
    c *= eta_i(q, s1 + s2) / (eta_i(q, s2 - delta) * eta_i(q, s1 + delta));
    let lim = r.min(k1).min(k2) as usize;
    for j in 2..=lim {
        let factor = qbar(
            q,
            part(lambda, j - 1),
            part(lambda, j),
            part(phi, j - 1),
            part(phi, j),
            s1,
            s2,
        )?;
        if factor.is_zero() {
            return Ok(Factored::zero(q));
        }
        c *= factor;
    }
    for i in part(lambda, k1 as usize) + 1..=part(lambda, lim) {
        c *= Rational::one() - q_pow(q, -s1 - i);
    }
    for i in part(phi, k2 as usize) + 1..=part(phi, lim) {
        c *= Rational::one() - q_pow(q, -s2 - i);
    }
    Ok(Factored::new(rat(q, c), vec![InfFactor::Eta { q }]))
}

/// Certified value of the dual-pair DVR level-set measure.
#[allow(clippy::too_many_arguments)]
pub fn nu_dvr_dualpair(
    q: u64,
    s1: i64,
    s2: i64,
    r: u32,
    k1: u32,
    k2: u32,
    lambda: &Partition,
    phi: &Partition,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    Ok(dvr_dualpair_factored(q, s1, s2, r, k1, k2, lambda, phi)?.eval(tol)?)
}

/// Level sets of the measure with moments `q^{-s|ρ|}`, which is what one
/// side of a dual pair looks like when the other side is left free.
pub fn untwisted_factored(
    q: u64,
    s: i64,
    k: u32,
    lambda: &Partition,
) -> Result<Factored, MeasureError> {
    if s < 0 || k == 0 {
        return Err(domain("need s >= 0 and k >= 1"));
    }
    check_level(0, k, lambda)?;
    let c = q_pow(q, -s * lambda.size() as i64) * recip_nat(aut_order(q, lambda))
        / eta_i(q, s + lambda.part(k as usize) as i64);
    Ok(Factored::new(rat(q, c), vec![InfFactor::Eta { q }]))
}

/// Truncation levels `k_i`; a missing component has `k_i = 0`, i.e. no
/// condition on it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelSpec {
    levels: BTreeMap<u32, u32>,
}

impl LevelSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uniform(decomp: &DecompData, k: u32) -> Self {
        Self::from_pairs(decomp.ids().into_iter().map(|id| (id, k)))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        LevelSpec {
            levels: pairs.into_iter().filter(|&(_, k)| k > 0).collect(),
        }
    }

    pub fn get(&self, id: u32) -> u32 {
        self.levels.get(&id).copied().unwrap_or(0)
    }

    pub fn set(&mut self, id: u32, k: u32) {
        if k == 0 {
            self.levels.remove(&id);
        } else {
            self.levels.insert(id, k);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.levels.iter().map(|(&a, &b)| (a, b))
    }
}

fn check_decomp(decomp: &DecompData) -> Result<(), MeasureError> {
    validate(decomp).map_err(MeasureError::Decomp)
}

fn s_of(decomp: &DecompData, c: &ComponentData) -> i64 {
    decomp.u as i64 * c.n as i64
}

/// One σ-orbit's factor of the level-set measure, over `Q(√p)`.
fn orbit_factor(
    decomp: &DecompData,
    orbit: Orbit<'_>,
    k: &LevelSpec,
    shape: &ModuleShape,
) -> Result<Factored, MeasureError> {
    let p = decomp.p;
    let r = decomp.r;
    match orbit {
        Orbit::SelfDual(c) => {
            let kc = k.get(c.id);
            let lam = shape.get(c.id);
            check_level(c.id, kc, lam)?;
            if kc == 0 {
                return Ok(Factored::one(p));
            }
            let s = int(s_of(decomp, c));
            let eps = Rational::new((1 - c.epsilon.unwrap_or(0) as i64).into(), 2.into());
            let f = dvr_selfdual_factored(c.q, &s, &eps, Some(r), kc, lam)?;
            Ok(rebase_factored(&f, p, c.d))
        }
        Orbit::Pair(a, b) => {
            let (ka, kb) = (k.get(a.id), k.get(b.id));
            let (la, lb) = (shape.get(a.id), shape.get(b.id));
            check_level(a.id, ka, la)?;
            check_level(b.id, kb, lb)?;
            let s = s_of(decomp, a);
            let f = match (ka, kb) {
                (0, 0) => return Ok(Factored::one(p)),
                (0, _) => untwisted_factored(a.q, s, kb, lb)?,
                (_, 0) => untwisted_factored(a.q, s, ka, la)?,
                _ => dvr_dualpair_factored(a.q, s, s, r, ka, kb, la, lb)?,
            };
            Ok(rebase_factored(&f, p, a.d))
        }
    }
}

/// `ν({V : V^{≤k} ≅ V_{λ'}})`, symbolic.
pub fn level_factored(
    decomp: &DecompData,
    k: &LevelSpec,
    shape: &ModuleShape,
) -> Result<Factored, MeasureError> {
    check_decomp(decomp)?;
    shape.check(decomp)?;
    for (id, _) in k.iter() {
        if decomp.component(id).is_none() {
            return Err(ShapeError::UnknownComponent(id).into());
        }
    }
    let mut acc = Factored::one(decomp.p);
    for orbit in decomp.orbits() {
        let f = orbit_factor(decomp, orbit, k, shape)?;
        if f.is_zero() {
            return Ok(Factored::zero(decomp.p));
        }
        acc = &acc * &f;
    }
    Ok(acc)
}

pub fn nu_level(
    decomp: &DecompData,
    k: &LevelSpec,
    shape: &ModuleShape,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    Ok(level_factored(decomp, k, shape)?.eval(tol)?)
}

/// Levels `k_i = max(r, λ^i'_1 + 1)`, deep enough to pin down the module.
pub fn exact_levels(decomp: &DecompData, shape: &ModuleShape) -> LevelSpec {
    LevelSpec::from_pairs(
        decomp
            .components
            .iter()
            .map(|c| (c.id, decomp.r.max(shape.get(c.id).len() as u32 + 1))),
    )
}

/// `ν({V_{λ'}})`, symbolic.
pub fn module_factored(decomp: &DecompData, shape: &ModuleShape) -> Result<Factored, MeasureError> {
    level_factored(decomp, &exact_levels(decomp, shape), shape)
}

pub fn nu_module(
    decomp: &DecompData,
    shape: &ModuleShape,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    Ok(module_factored(decomp, shape)?.eval(tol)?)
}

/// The `p`-torsion law written out directly: one-row shapes, no `Pf` or
/// `Q̄f` factors.
fn ptors_direct(decomp: &DecompData, ranks: &BTreeMap<u32, u32>) -> Factored {
    let p = decomp.p;
    let mut acc = Factored::one(p);
    let rank = |id: u32| ranks.get(&id).copied().unwrap_or(0) as i64;
    for orbit in decomp.orbits() {
        let f = match orbit {
            Orbit::SelfDual(c) => {
                let (q, f, s) = (c.q, rank(c.id), s_of(decomp, c));
                let eps = c.epsilon.unwrap_or(0) as i64;
                let twice_expo = 2 * binom2(f) + (1 - eps) * f - 2 * s * f - 2 * f * f;
                let coeff = QNum::q_half_pow(q, twice_expo).scale(&eta_i(q, f).recip());
                Factored::new(
                    coeff,
                    vec![InfFactor::OnePlusInv {
                        q,
                        twice_a: 2 * s + eps + 1,
                    }],
                )
            }
            Orbit::Pair(a, b) => {
                let (q, fa, fb, s) = (a.q, rank(a.id), rank(b.id), s_of(decomp, a));
                if (fa - fb).abs() > s {
                    Factored::zero(q)
                } else {
                    let c = q_pow(q, fa * fb - s * (fa + fb) - fa * fa - fb * fb) * eta_i(q, 2 * s)
                        / (eta_i(q, fa)
                            * eta_i(q, fb)
                            * eta_i(q, s - fa + fb)
                            * eta_i(q, s + fa - fb));
                    Factored::new(rat(q, c), vec![InfFactor::Eta { q }])
                }
            }
        };
        let d = match orbit {
            Orbit::SelfDual(c) | Orbit::Pair(c, _) => c.d,
        };
        acc = &acc * &rebase_factored(&f, p, d);
    }
    acc
}

/// `ν({V : V/pV ≅ ⊕ F_{q_i}^{f_i}})`, symbolic; both the direct formula and
/// the `k = 1` level set are built and must agree exactly.
pub fn ptors_factored(
    decomp: &DecompData,
    ranks: &BTreeMap<u32, u32>,
) -> Result<Factored, MeasureError> {
    check_decomp(decomp)?;
    for &id in ranks.keys() {
        if decomp.component(id).is_none() {
            return Err(ShapeError::UnknownComponent(id).into());
        }
    }
    let direct = ptors_direct(decomp, ranks);
    let shape = ModuleShape::from_pairs(ranks.iter().map(|(&id, &f)| (id, Partition::row(f))));
    let via_level = level_factored(decomp, &LevelSpec::uniform(decomp, 1), &shape)?;
    if direct != via_level {
        return Err(MeasureError::Inconsistent(format!(
            "p-torsion formula {direct:?} differs from the k = 1 level set {via_level:?}"
        )));
    }
    Ok(direct)
}

pub fn nu_ptors(
    decomp: &DecompData,
    ranks: &BTreeMap<u32, u32>,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    Ok(ptors_factored(decomp, ranks)?.eval(tol)?)
}

/// `|λ^i_ℓ - λ^j_ℓ| <= u n_i` for every dual pair and `ℓ <= min(depth, r)`.
pub fn support(decomp: &DecompData, shape: &ModuleShape, depth: u32) -> bool {
    let top = depth.min(decomp.r) as usize;
    decomp.orbits().into_iter().all(|o| match o {
        Orbit::SelfDual(_) => true,
        Orbit::Pair(a, b) => {
            let s = s_of(decomp, a);
            let (la, lb) = (shape.get(a.id), shape.get(b.id));
            (1..=top).all(|l| (la.part(l) as i64 - lb.part(l) as i64).abs() <= s)
        }
    })
}
