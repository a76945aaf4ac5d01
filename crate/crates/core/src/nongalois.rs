//! The measure pushed forward to `Γ'`-invariants, its absolutely irreducible
//! special case, and the comparison with Malle's weights.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::Serialize;

use crate::decomp::{validate, ComponentData, DecompData, GroupSpec};
use crate::measure::{level_factored, module_factored, InfFactor, LevelSpec, MeasureError};
use crate::partmod::{
    aut_order, module_aut_order, module_size, ModuleShape, Partition, ShapeError,
};
use crate::qexact::{binom2, int, q_pow, CertValue, QNum, Rational};

/// An `𝔬`-module `U`: one partition per component in `ℳ`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvariantShape {
    parts: BTreeMap<u32, Partition>,
}

impl InvariantShape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, Partition)>) -> Self {
        let mut s = Self::new();
        for (id, p) in pairs {
            s.set(id, p);
        }
        s
    }

    pub fn set(&mut self, id: u32, lambda: Partition) {
        if lambda.is_empty() {
            self.parts.remove(&id);
        } else {
            self.parts.insert(id, lambda);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Partition)> {
        self.parts.iter().map(|(&id, p)| (id, p))
    }

    /// `𝓘(U)` as a shape: the same partitions, zero outside `ℳ`.
    pub fn extend_by_zero(&self, decomp: &DecompData) -> Result<ModuleShape, MeasureError> {
        for (id, _) in self.iter() {
            match decomp.component(id) {
                None => return Err(ShapeError::UnknownComponent(id).into()),
                Some(c) if c.m == 0 => {
                    return Err(MeasureError::Domain(format!(
                        "component {id} is outside ℳ but carries a partition"
                    )))
                }
                _ => {}
            }
        }
        Ok(ModuleShape::from_pairs(self.parts.clone()))
    }

    /// `|U| = ∏_{i∈ℳ} q_i^{m_i|λ^i|}`, so that `|e_iV| = |e_iU|^{n_i/m_i}`.
    pub fn order(&self, decomp: &DecompData) -> Result<BigInt, MeasureError> {
        let mut out = BigInt::from(1);
        for (id, p) in self.iter() {
            let c = decomp
                .component(id)
                .ok_or(ShapeError::UnknownComponent(id))?;
            out *= BigInt::from(c.q).pow((c.m as u64 * p.size()) as u32);
        }
        Ok(out)
    }

    /// `|Aut_𝔬(U)|`, transported from `|Aut(𝓘(U))|`.
    pub fn aut_order(&self, decomp: &DecompData) -> Result<BigInt, MeasureError> {
        Ok(module_aut_order(decomp, &self.extend_by_zero(decomp)?)?.into())
    }
}

fn in_m(c: &ComponentData) -> bool {
    c.m >= 1
}

fn check_m(decomp: &DecompData) -> Result<(), MeasureError> {
    validate(decomp).map_err(MeasureError::Decomp)?;
    if !decomp.components.iter().any(in_m) {
        return Err(MeasureError::Domain(
            "ℳ is empty: no component has m ≥ 1".into(),
        ));
    }
    Ok(())
}

/// `ν_{Γ'}({U})`: the level set with `k_i = 0` off `ℳ`, i.e. the individual
/// module formula with its product restricted to `ℳ`.
pub fn pushforward_prob(
    decomp: &DecompData,
    inv: &InvariantShape,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    check_m(decomp)?;
    let shape = inv.extend_by_zero(decomp)?;
    let k = LevelSpec::from_pairs(decomp.components.iter().map(|c| {
        let depth = if in_m(c) {
            decomp.r.max(shape.get(c.id).len() as u32 + 1)
        } else {
            0
        };
        (c.id, depth)
    }));
    Ok(level_factored(decomp, &k, &shape)?.eval(tol)?)
}

/// The single-component data of an absolutely irreducible pair.
pub fn ai_pair_decomp(p: u64, n2: u32, u: u32) -> DecompData {
    DecompData {
        p,
        r: 1,
        u,
        components: vec![ComponentData {
            id: 2,
            d: 1,
            n: n2,
            q: p,
            epsilon: Some(1),
            dual_id: 2,
            m: 1,
        }],
    }
}

fn ai_inf(p: u64, s: i64) -> InfFactor {
    InfFactor::OnePlusInv {
        q: p,
        twice_a: 2 * (s + 1),
    }
}

/// `p^{C(λ_1,2)} / (|U|^{un_2}|Aut U|) ∏_{ℓ≥0}(1+p^{-un_2-1-ℓ})^{-1} ∏_{ℓ=1}^{λ_1}(1-p^{-un_2-ℓ})`,
/// with `U = ⊕ Z/p^{λ'_i}`.
pub fn ai_pair_prob(
    p: u64,
    n2: u32,
    u: u32,
    lambda: &Partition,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    let s = u as i64 * n2 as i64;
    let l1 = lambda.part(1) as i64;
    let mut c =
        q_pow(p, binom2(l1) - s * lambda.size() as i64) / int(BigInt::from(aut_order(p, lambda)));
    for l in 1..=l1 {
        c *= int(1) - q_pow(p, -s - l);
    }
    let inf = ai_inf(p, s).enclose(tol)?;
    Ok(inf.scale(&c))
}

/// `ν_{Γ'}(rk_p U = λ)`.
pub fn ai_rank_prob(
    p: u64,
    n2: u32,
    u: u32,
    rank: u32,
    tol: &Rational,
) -> Result<CertValue, MeasureError> {
    let s = u as i64 * n2 as i64;
    let f = rank as i64;
    let c = q_pow(p, binom2(f) - s * f) / int(BigInt::from(aut_order(p, &Partition::row(rank))));
    Ok(ai_inf(p, s).enclose(tol)?.scale(&c))
}

fn prefactor(q: u64, n2: u32, u: u32, lambda: &Partition) -> Rational {
    let s = u as i64 * n2 as i64;
    let l1 = lambda.part(1) as i64;
    let mut c = q_pow(q, -s * lambda.size() as i64) / int(BigInt::from(aut_order(q, lambda)));
    for l in 1..=l1 {
        c *= int(1) - q_pow(q, -s - l);
    }
    c
}

/// Malle's weight without its constant: `d^{λ_1} q^{C(λ_1,2)} / (|U|^{n_2u}|Aut U|) ∏_{ℓ=1}^{λ_1}(1-q^{-un_2-ℓ})`.
pub fn malle_weight(q: u64, d: u32, n2: u32, u: u32, lambda: &Partition) -> QNum {
    let l1 = lambda.part(1);
    let c =
        prefactor(q, n2, u, lambda) * q_pow(q, binom2(l1 as i64)) * int(BigInt::from(d).pow(l1));
    QNum::from_rational(q, c)
}

/// The matching unnormalized weight of our measure, `ε` the component's invariant:
/// `q^{C(λ_1,2) + (1-ε)λ_1/2} / (|U|^{n_2u}|Aut U|) ∏_{ℓ=1}^{λ_1}(1-q^{-un_2-ℓ})`.
pub fn our_weight(q: u64, epsilon: i8, n2: u32, u: u32, lambda: &Partition) -> QNum {
    let l1 = lambda.part(1) as i64;
    let twice = 2 * binom2(l1) + (1 - epsilon as i64) * l1;
    QNum::q_half_pow(q, twice).scale(&prefactor(q, n2, u, lambda))
}

/// Whether the two weights are proportional: `p^{(1-ε)d/2} = d`.
pub fn malle_agrees(p: u64, d: u32, epsilon: i8) -> bool {
    QNum::q_half_pow(p, (1 - epsilon as i64) * d as i64) == QNum::from_rational(p, int(d))
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub module: String,
    pub shape: Vec<Vec<u32>>,
    pub ours_exact: String,
    pub ours_decimal: f64,
    pub malle_exact: Option<String>,
    pub malle_decimal: Option<f64>,
    #[serde(skip)]
    pub ours: QNum,
    #[serde(skip)]
    pub malle: Option<Rational>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub u: u32,
    pub rows: Vec<RatioRow>,
    pub agree: bool,
    pub verdict: String,
}

impl RatioReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("module,ours_exact,ours_decimal,malle_exact,malle_decimal\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{}\n",
                r.module,
                r.ours_exact,
                r.ours_decimal,
                r.malle_exact.clone().unwrap_or_default(),
                r.malle_decimal.map(|x| x.to_string()).unwrap_or_default()
            );
        }
        out
    }

    pub fn ours(&self) -> Vec<QNum> {
        self.rows.iter().map(|r| r.ours.clone()).collect()
    }
}

/// `ν({V})|V|^u|Aut V|` for `1, R_1/2, R_2/2, R_1/2 × R_2/2` over `C_7` at
/// `p = 2`, `r = 1`, as exact ratios to the first, next to Malle's rank-0 to
/// rank-1 ratio `1 : 6(1 - 2^{-6(u+1)})`.
pub fn ip_ratio_report(u: u32) -> Result<RatioReport, MeasureError> {
    if u < 1 {
        return Err(MeasureError::Domain("u must be at least 1".into()));
    }
    let decomp = DecompData::abelian(&GroupSpec::cyclic(7).expect("7 > 1"), 2, 1, u)
        .map_err(|e| MeasureError::Domain(e.to_string()))?;
    let one = Partition::row(1);
    let none = Partition::empty();
    let modules = [
        ("1", none.clone(), none.clone()),
        ("R1/2", one.clone(), none.clone()),
        ("R2/2", none.clone(), one.clone()),
        ("R1/2 x R2/2", one.clone(), one),
    ];
    let mut normalized: Vec<(QNum, Vec<InfFactor>)> = Vec::new();
    for (_, a, b) in &modules {
        let shape = ModuleShape::from_pairs([(2, a.clone()), (3, b.clone())]);
        let f = module_factored(&decomp, &shape)?;
        let scale = int(BigInt::from(module_size(&decomp, &shape)?.pow(u)))
            * int(BigInt::from(module_aut_order(&decomp, &shape)?));
        normalized.push((f.coeff().scale(&scale), f.inf().to_vec()));
    }
    let (first, first_inf) = normalized[0].clone();
    let first_inv = first.inv()?;
    let mut ratios = Vec::new();
    for (c, inf) in &normalized {
        if inf != &first_inf {
            return Err(MeasureError::Inconsistent(
                "infinite products do not cancel in the ratio".into(),
            ));
        }
        ratios.push(c * &first_inv);
    }
    let malle_last = int(6) * (int(1) - q_pow(2, -6 * (u as i64 + 1)));
    let malle = [Some(int(1)), None, None, Some(malle_last.clone())];
    let rows = modules
        .iter()
        .zip(ratios.iter().zip(malle))
        .map(|((name, a, b), (ours, m))| RatioRow {
            module: name.to_string(),
            shape: vec![a.parts().to_vec(), b.parts().to_vec()],
            ours_exact: ours.to_string(),
            ours_decimal: ours.to_f64(),
            malle_exact: m.as_ref().map(|x| x.to_string()),
            malle_decimal: m.as_ref().map(rational_to_f64),
            ours: ours.clone(),
            malle: m,
        })
        .collect();
    let agree = ratios[3].to_rational().as_ref() == Some(&malle_last);
    let verdict = if agree { "agree" } else { "disagree" }.to_string();
    Ok(RatioReport {
        u,
        rows,
        agree,
        verdict,
    })
}

fn rational_to_f64(x: &Rational) -> f64 {
    QNum::from_rational(2, x.clone()).to_f64()
}

#[derive(Clone, Debug, Serialize)]
pub struct AipReport {
    pub p: u64,
    pub d: u32,
    pub epsilon: i8,
    /// `(ours / Malle)` per unit of `λ_1`, i.e. `p^{(1-ε)d/2} / d`.
    pub ratio_exact: String,
    pub ratio_decimal: f64,
    pub agree: bool,
    pub verdict: String,
}

/// Ours against Malle for an irreducible pair with `W_p` irreducible.
pub fn aip_report(p: u64, d: u32, epsilon: i8) -> Result<AipReport, MeasureError> {
    if !crate::decomp::is_prime(p) || d == 0 || !(-1..=1).contains(&epsilon) {
        return Err(MeasureError::Domain(format!(
            "need p prime, d >= 1, ε ∈ {{-1,0,1}}; got p={p}, d={d}, ε={epsilon}"
        )));
    }
    let q = p
        .checked_pow(d)
        .ok_or_else(|| MeasureError::Domain("q = p^d overflows".into()))?;
    let one = Partition::row(1);
    let ratio = &our_weight(q, epsilon, 1, 1, &one) * &malle_weight(q, d, 1, 1, &one).inv()?;
    let agree = malle_agrees(p, d, epsilon);
    Ok(AipReport {
        p,
        d,
        epsilon,
        ratio_exact: ratio.to_string(),
        ratio_decimal: ratio.to_f64(),
        agree,
        verdict: if agree { "agree" } else { "disagree" }.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::nu_module;
    use crate::qexact::{frac, inf_product};

    fn tol() -> Rational {
        frac(1, 1 << 50)
    }

    #[test]
    fn ai_examples() {
        let inf = inf_product(3, &int(2), 1, -1, &tol()).unwrap();
        let v = ai_pair_prob(3, 1, 1, &Partition::empty(), &tol()).unwrap();
        assert!(v.overlaps(&inf));
        let v = ai_pair_prob(3, 1, 1, &Partition::row(1), &tol()).unwrap();
        assert!(v.overlaps(&inf.scale(&(frac(1, 6) * frac(8, 9)))));
        let v = ai_rank_prob(3, 1, 1, 1, &tol()).unwrap();
        assert!(v.overlaps(&inf.scale(&frac(1, 6))));
    }

    #[test]
    fn identity_pushforward() {
        let d = DecompData::abelian(&GroupSpec::cyclic(7).unwrap(), 2, 1, 1).unwrap();
        let inv = InvariantShape::from_pairs([(2, Partition::row(1))]);
        let a = pushforward_prob(&d, &inv, &tol()).unwrap();
        let b = nu_module(&d, &ModuleShape::single(2, Partition::row(1)), &tol()).unwrap();
        assert!(a.overlaps(&b));
    }

    #[test]
    fn outside_m_rejected() {
        let mut d = DecompData::abelian(&GroupSpec::new(vec![2, 2]).unwrap(), 3, 1, 1).unwrap();
        d.components[1].m = 0;
        let inv = InvariantShape::from_pairs([(3, Partition::row(1))]);
        assert!(pushforward_prob(&d, &inv, &tol()).is_err());
        for c in d.components.iter_mut() {
            c.m = 0;
        }
        assert!(pushforward_prob(&d, &InvariantShape::new(), &tol()).is_err());
    }

    #[test]
    fn malle_examples() {
        assert_eq!(malle_weight(8, 3, 1, 1, &Partition::empty()), QNum::one(8));
        let one = Partition::row(1);
        let r = &our_weight(8, 0, 1, 1, &one) * &malle_weight(8, 3, 1, 1, &one).inv().unwrap();
        assert_eq!(r, QNum::q_half_pow(8, 1).scale(&frac(1, 3)));
        assert!(malle_agrees(3, 1, 1));
        assert!(malle_agrees(2, 2, 0));
        assert!(malle_agrees(2, 4, 0));
        assert!(!malle_agrees(2, 3, 0));
        assert!(!malle_agrees(3, 2, 0));
    }

    #[test]
    fn ip_ratios() {
        let r = ip_ratio_report(1).unwrap();
        let want = [
            int(1),
            frac(7, 8),
            frac(7, 8),
            int(8) * frac(63, 64) * frac(63, 64),
        ];
        for (got, w) in r.ours().iter().zip(want) {
            assert_eq!(got.to_rational(), Some(w));
        }
        assert!(!r.agree);
        let r = ip_ratio_report(2).unwrap();
        let x = int(1) - frac(1, 64);
        let y = int(1) - frac(1, 512);
        let want = [int(1), x.clone(), x, int(8) * &y * &y];
        for (got, w) in r.ours().iter().zip(want) {
            assert_eq!(got.to_rational(), Some(w));
        }
    }
}
