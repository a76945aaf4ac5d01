//! Conjectured moments, and two ways of getting the measure back from them:
//! the alternating `v`-series and the `Σ ν(V)|Sur(V, N)|` identity.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::decomp::{validate, DecompData};
use crate::measure::{module_factored, LevelSpec, MeasureError};
use crate::partmod::{
    aut_order, enumerate_shapes, interlacing_extensions, module_size, module_sur_count, mu_hat,
    wedge2_invariant_order, ModuleShape, Partition, ShapeError,
};
use crate::qexact::{format_decimal, int, CertValue, QNum, Rational, Rounding};

/// `|(∧²V)^Γ[p^r]| / |V|^u`.
pub fn moment(decomp: &DecompData, shape: &ModuleShape) -> Result<QNum, MeasureError> {
    validate(decomp).map_err(MeasureError::Decomp)?;
    Ok(QNum::from_rational(
        decomp.p,
        moment_rational(decomp, shape)?,
    ))
}

fn moment_rational(decomp: &DecompData, shape: &ModuleShape) -> Result<Rational, ShapeError> {
    let top = wedge2_invariant_order(decomp, shape, decomp.r)?;
    let size = module_size(decomp, shape)?;
    Ok(Rational::new(
        BigInt::from(top),
        BigInt::from(size.pow(decomp.u)),
    ))
}

/// Truncations of `v_{k,N}`: `partial[e]` sums the `P` whose every component
/// exceeds `N` by at most `e` in size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VSeries {
    pub partial: Vec<Rational>,
}

impl VSeries {
    pub fn value(&self) -> &Rational {
        self.partial.last().expect("at least the zeroth truncation")
    }

    /// `|partial[e] - partial[e-1]|` for `e >= 1`.
    pub fn differences(&self) -> Vec<Rational> {
        self.partial
            .windows(2)
            .map(|w| num_traits::Signed::abs(&(&w[1] - &w[0])))
            .collect()
    }

    /// Size of the last correction; a convergence diagnostic, not a bound.
    pub fn residual(&self) -> Rational {
        self.differences().pop().unwrap_or_else(Rational::zero)
    }
}

/// `Σ_P μ̂(N, P) M_P / |Aut P|` over `R/m^k`-modules `P` near `N`.
pub fn v_reconstruct(
    decomp: &DecompData,
    k: &LevelSpec,
    shape: &ModuleShape,
    e_max: u64,
) -> Result<VSeries, MeasureError> {
    validate(decomp).map_err(MeasureError::Decomp)?;
    shape.check(decomp)?;
    // per component: (excess, ρ, μ̂/|Aut ρ|)
    let mut per: Vec<(u32, Vec<(u64, Partition, Rational)>)> = Vec::new();
    for c in &decomp.components {
        let lam = shape.get(c.id);
        let kc = k.get(c.id);
        if lam.len() > kc as usize {
            return Err(MeasureError::LevelTooSmall {
                id: c.id,
                k: kc,
                lambda: lam.clone(),
            });
        }
        let terms = interlacing_extensions(lam, kc, e_max)
            .into_iter()
            .map(|rho| {
                let w = Rational::new(mu_hat(c.q, lam, &rho), BigInt::from(aut_order(c.q, &rho)));
                (rho.size() - lam.size(), rho, w)
            })
            .filter(|(_, _, w)| !w.is_zero())
            .collect();
        per.push((c.id, terms));
    }

    let mut combos: Vec<(u64, ModuleShape, Rational)> =
        vec![(0, ModuleShape::empty(), Rational::one())];
    for (id, terms) in &per {
        let mut next = Vec::with_capacity(combos.len() * terms.len());
        for (e0, s0, w0) in &combos {
            for (e, rho, w) in terms {
                let mut s = s0.clone();
                s.set(*id, rho.clone());
                next.push(((*e0).max(*e), s, w0 * w));
            }
        }
        combos = next;
    }
    let contributions: Vec<(u64, Rational)> = combos
        .into_par_iter()
        .map(|(e, s, w)| Ok((e, w * moment_rational(decomp, &s)?)))
        .collect::<Result<_, ShapeError>>()?;

    let mut layers = vec![Rational::zero(); e_max as usize + 1];
    for (e, t) in contributions {
        layers[e as usize] += t;
    }
    let mut acc = Rational::zero();
    let partial = layers
        .into_iter()
        .map(|l| {
            acc += l;
            acc.clone()
        })
        .collect();
    Ok(VSeries { partial })
}

/// `ν({V})` for every shape up to a size bound, computed once and reused
/// across targets.
pub struct MassTable {
    bound: u64,
    entries: Vec<(ModuleShape, CertValue)>,
}

impl MassTable {
    pub fn new(decomp: &DecompData, bound: u64, tol: &Rational) -> Result<Self, MeasureError> {
        validate(decomp).map_err(MeasureError::Decomp)?;
        let shapes = enumerate_shapes(decomp, bound);
        let per_shape = tol / int(shapes.len().max(1));
        let entries = shapes
            .into_par_iter()
            .map(|s| {
                let v = module_factored(decomp, &s)?.eval(&per_shape)?;
                Ok((s, v))
            })
            .collect::<Result<Vec<_>, MeasureError>>()?;
        Ok(MassTable { bound, entries })
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn entries(&self) -> &[(ModuleShape, CertValue)] {
        &self.entries
    }

    /// Total mass, i.e. the zeroth moment.
    pub fn mass(&self) -> CertValue {
        self.entries
            .iter()
            .fold(CertValue::zero(), |acc, (_, v)| &acc + v)
    }

    /// `Σ_{|V| <= bound} ν(V)|Sur(V, N)|`, summed in enumeration order.
    pub fn surjection_sum(
        &self,
        decomp: &DecompData,
        target: &ModuleShape,
    ) -> Result<CertValue, MeasureError> {
        let mut acc = CertValue::zero();
        for (s, v) in &self.entries {
            let n = module_sur_count(decomp, s, target)?;
            if !n.is_zero() {
                acc = &acc + &v.scale(&int(BigInt::from(n)));
            }
        }
        Ok(acc)
    }

    pub fn check(
        &self,
        decomp: &DecompData,
        target: &ModuleShape,
    ) -> Result<MomentReport, MeasureError> {
        let size = module_size(decomp, target)?;
        if size > self.bound.into() {
            return Err(MeasureError::Domain(format!(
                "bound {} does not include the target of order {size}",
                self.bound
            )));
        }
        let m = moment_rational(decomp, target)?;
        let partial = self.surjection_sum(decomp, target)?;
        let residual_hi = &m - partial.lo();
        Ok(MomentReport {
            target: target.to_lists(decomp),
            bound: self.bound,
            moment: m.to_string(),
            moment_exact: m,
            partial_sum: partial,
            residual_hi: residual_hi.to_string(),
            residual: residual_hi,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub target: Vec<Vec<u32>>,
    pub bound: u64,
    pub moment: String,
    #[serde(skip)]
    pub moment_exact: Rational,
    pub partial_sum: CertValue,
    pub residual_hi: String,
    /// `M_N - S(B)` using the lower end of `S(B)`.
    #[serde(skip)]
    pub residual: Rational,
}

impl MomentReport {
    pub fn residual_decimal(&self) -> String {
        format_decimal(&self.residual, 6, Rounding::Up)
    }
}

/// `M_N - S(B)`, where `S(B)` sums `ν(V)|Sur(V, N)|` over `|V| <= B`.
pub fn moment_check(
    decomp: &DecompData,
    target: &ModuleShape,
    bound: u64,
    tol: &Rational,
) -> Result<MomentReport, MeasureError> {
    MassTable::new(decomp, bound, tol)?.check(decomp, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::GroupSpec;
    use crate::measure::nu_level;
    use crate::qexact::frac;

    fn cyc(n: u64, p: u64, r: u32, u: u32) -> DecompData {
        DecompData::abelian(&GroupSpec::cyclic(n).unwrap(), p, r, u).unwrap()
    }

    fn part(x: &[u32]) -> Partition {
        Partition::new(x.to_vec()).unwrap()
    }

    #[test]
    fn moment_examples() {
        let d = cyc(3, 2, 1, 1);
        assert_eq!(moment(&d, &ModuleShape::empty()).unwrap(), QNum::one(2));
        assert_eq!(
            moment(&d, &ModuleShape::single(2, part(&[1])))
                .unwrap()
                .to_rational(),
            Some(frac(1, 2))
        );
        let d7 = cyc(7, 2, 1, 1);
        let s = ModuleShape::from_pairs([(2, part(&[1])), (3, part(&[1]))]);
        assert_eq!(moment(&d7, &s).unwrap().to_rational(), Some(frac(1, 8)));
    }

    #[test]
    fn v_series_examples() {
        let d = cyc(3, 2, 2, 1);
        let k = LevelSpec::uniform(&d, 1);
        let s = ModuleShape::empty();
        assert_eq!(
            v_reconstruct(&d, &k, &s, 0).unwrap().partial,
            vec![Rational::one()]
        );
        assert_eq!(*v_reconstruct(&d, &k, &s, 1).unwrap().value(), frac(5, 6));
        let v = v_reconstruct(&d, &k, &s, 8).unwrap();
        let want = nu_level(&d, &k, &s, &frac(1, 1 << 40)).unwrap();
        let got = CertValue::point(v.value().clone());
        assert!((&got - &want).to_f64().abs() < 1e-4);
    }

    #[test]
    fn mass_is_zeroth_moment() {
        let d = cyc(3, 2, 2, 1);
        let rep = moment_check(&d, &ModuleShape::empty(), 1 << 8, &frac(1, 1 << 40)).unwrap();
        let table = MassTable::new(&d, 1 << 8, &frac(1, 1 << 40)).unwrap();
        assert_eq!(rep.partial_sum, table.mass());
        assert!(rep.residual > Rational::zero());
    }

    #[test]
    fn bound_must_cover_target() {
        let d = cyc(3, 2, 2, 1);
        let s = ModuleShape::single(2, part(&[3]));
        assert!(moment_check(&d, &s, 16, &frac(1, 1 << 20)).is_err());
    }
}
