use std::collections::BTreeMap;

use clmeasure::decomp::{DecompData, GroupSpec};
use clmeasure::measure::{
    d_factor, level_factored, nu_level, nu_module, nu_ptors, pf, pf_closed_zero, support, LevelSpec,
};
use clmeasure::partmod::{enumerate_shapes, ModuleShape, Partition};
use clmeasure::qexact::{frac, CertValue, Rational};
use clmeasure::verify::standard_configs;
use num_traits::{One, Zero};

fn tol() -> Rational {
    frac(1, 1 << 50)
}

fn decomp(n: u64, p: u64, r: u32, u: u32) -> DecompData {
    DecompData::abelian(&GroupSpec::cyclic(n).unwrap(), p, r, u).unwrap()
}

#[test]
fn pf_is_positive() {
    for q in [2u64, 3, 4, 8, 9] {
        for twice_t in 0..=10 {
            for m in 0..=20 {
                assert_eq!(
                    pf(q, &frac(twice_t, 2), m).unwrap().signum(),
                    1,
                    "q={q} t={twice_t}/2 m={m}"
                );
            }
        }
    }
}

#[test]
fn pf_at_zero_has_a_product_form() {
    for q in [2u64, 3, 4, 8, 9] {
        for m in 0..=30 {
            assert_eq!(
                pf(q, &Rational::zero(), m).unwrap().to_rational(),
                Some(pf_closed_zero(q, m))
            );
        }
    }
}

fn truncate(s: &ModuleShape, k: usize) -> ModuleShape {
    ModuleShape::from_pairs(s.iter().map(|(id, p)| {
        (
            id,
            Partition::new(p.parts()[..p.len().min(k)].to_vec()).unwrap(),
        )
    }))
}

/// Summing `nu_module` over the shapes in a level set approaches the level
/// probability from below.
#[test]
fn marginals_approach_levels() {
    let d = decomp(3, 2, 2, 1);
    for k in [1usize, 2] {
        let level = LevelSpec::uniform(&d, k as u32);
        let heads: Vec<ModuleShape> = enumerate_shapes(&d, 1 << 6)
            .into_iter()
            .filter(|s| truncate(s, k) == *s)
            .collect();
        for head in heads {
            let target = nu_level(&d, &level, &head, &tol()).unwrap();
            let mut deficits = Vec::new();
            for bound in [1u64 << 8, 1 << 12, 1 << 16] {
                let mut sum = CertValue::zero();
                for s in enumerate_shapes(&d, bound)
                    .iter()
                    .filter(|s| truncate(s, k) == head)
                {
                    sum = &sum + &nu_module(&d, s, &tol()).unwrap();
                }
                assert!(sum.lo() <= target.hi(), "k={k} {head}");
                deficits.push((target.hi() - sum.lo()).clone());
            }
            assert!(
                deficits.windows(2).all(|w| w[1] <= w[0]),
                "k={k} {head}: {deficits:?}"
            );
            let rel = &deficits[2] / target.lo();
            assert!(rel < frac(1, 100), "k={k} {head}: relative tail {rel}");
        }
    }
}

#[test]
fn ptors_equals_first_level() {
    let mut decomps = standard_configs();
    decomps.push(DecompData::abelian(&GroupSpec::new(vec![2, 2]).unwrap(), 3, 1, 1).unwrap());
    decomps.push(decomp(5, 2, 1, 1));
    decomps.push(decomp(5, 11, 2, 1));
    for d in decomps {
        let ids = d.ids();
        let mut rank_lists: Vec<Vec<u32>> = vec![vec![]];
        for _ in &ids {
            rank_lists = rank_lists
                .into_iter()
                .flat_map(|v| (0..3).map(move |f| [v.clone(), vec![f]].concat()))
                .collect();
        }
        for ranks in rank_lists {
            let map: BTreeMap<u32, u32> = ids.iter().copied().zip(ranks.iter().copied()).collect();
            let shape =
                ModuleShape::from_pairs(map.iter().map(|(&id, &f)| (id, Partition::row(f))));
            let direct = nu_ptors(&d, &map, &tol()).unwrap();
            let level = level_factored(&d, &LevelSpec::uniform(&d, 1), &shape)
                .unwrap()
                .eval(&tol())
                .unwrap();
            assert_eq!(direct, level);
        }
    }
}

#[test]
fn mass_never_exceeds_one() {
    for d in standard_configs() {
        let mut hi = Rational::zero();
        let mut lo_prev = Rational::zero();
        let mut lo = Rational::zero();
        for s in enumerate_shapes(&d, 1 << 12) {
            let v = nu_module(&d, &s, &tol()).unwrap();
            assert!(v.lo() >= &Rational::zero());
            hi += v.hi();
            lo += v.lo();
            assert!(lo >= lo_prev);
            lo_prev = lo.clone();
        }
        assert!(hi <= Rational::one(), "{d:?}");
        assert!(lo > frac(99, 100), "{d:?}");
    }
}

#[test]
fn support_matches_positivity() {
    for u in [1, 2] {
        for r in [1, 2] {
            let d = decomp(7, 2, r, u);
            for s in enumerate_shapes(&d, 1 << 9) {
                let v = nu_module(&d, &s, &tol()).unwrap();
                if support(&d, &s, r) {
                    assert!(!v.is_exact_zero(), "{s}");
                } else {
                    assert!(v.is_exact_zero(), "{s}");
                }
            }
        }
    }
}

/// With `s1 = s2 = 0` the dual-pair measure lives on the diagonal.
#[test]
fn untwisted_pair_measure_is_diagonal() {
    for q in [2u64, 3, 4, 8] {
        let mut sum = CertValue::zero();
        for l in 0..=12 {
            sum = &sum + &d_factor(q, l, l, 0, 0, &tol()).unwrap();
            assert!(d_factor(q, l, l + 1, 0, 0, &tol()).unwrap().is_exact_zero());
        }
        assert!(sum.hi() <= &(Rational::one() + tol()));
        assert!(
            sum.lo() > &(Rational::one() - frac(1, 1_000_000)),
            "q={q}: {sum}"
        );
    }
}
