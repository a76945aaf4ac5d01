use clmeasure::decomp::DecompData;
use clmeasure::measure::nu_module;
use clmeasure::nongalois::{ai_pair_prob, ai_rank_prob, pushforward_prob, InvariantShape};
use clmeasure::partmod::{sur_count, ModuleShape, Partition};
use clmeasure::qexact::{binom2, frac, int, q_pow, CertValue, Rational};
use num_bigint::BigInt;
use num_traits::{One, Zero};

fn tol() -> Rational {
    frac(1, 1 << 50)
}

/// `S_3` at `p = 5` with `Γ' = C_2`: the sign character has no
/// `Γ'`-invariants, the two-dimensional one has a line of them.
fn s3() -> DecompData {
    DecompData::from_json(
        r#"{"p":5,"r":1,"u":1,"components":[
            {"id":2,"d":1,"n":1,"q":5,"epsilon":1,"dual_id":2,"m":0},
            {"id":3,"d":1,"n":2,"q":5,"epsilon":1,"dual_id":3,"m":1}]}"#,
    )
    .unwrap()
}

#[test]
fn pushforward_collects_the_fibres() {
    let d = s3();
    for lam in Partition::all_up_to(3) {
        let inv = InvariantShape::from_pairs([(3, lam.clone())]);
        let target = pushforward_prob(&d, &inv, &tol()).unwrap();
        let mut deficits = Vec::new();
        for extra in [2u32, 4, 8] {
            let mut sum = CertValue::zero();
            for mu in Partition::all_up_to(extra) {
                let s = ModuleShape::from_pairs([(2, mu), (3, lam.clone())]);
                sum = &sum + &nu_module(&d, &s, &tol()).unwrap();
            }
            assert!(sum.lo() <= target.hi(), "{lam}");
            deficits.push(target.hi() - sum.lo());
        }
        assert!(
            deficits.windows(2).all(|w| w[1] <= w[0]),
            "{lam}: {deficits:?}"
        );
        assert!(deficits[2] < &frac(1, 1_000_000) * target.hi(), "{lam}");
    }
}

#[test]
fn invariant_orders_follow_the_size_rule() {
    let d = s3();
    let inv = InvariantShape::from_pairs([(3, Partition::new(vec![2, 1]).unwrap())]);
    // m = 1 of n = 2: |U| = 5^{|λ|} while the full module has 5^{2|λ|}
    assert_eq!(inv.order(&d).unwrap(), BigInt::from(125));
    assert!(InvariantShape::from_pairs([(2, Partition::row(1))])
        .extend_by_zero(&d)
        .is_err());
}

#[test]
fn rank_law_is_normalized() {
    for (p, n2, u) in [(2u64, 1u32, 1u32), (3, 2, 1), (5, 1, 2), (2, 3, 1)] {
        let mut sum = CertValue::zero();
        for rank in 0..=10 {
            sum = &sum + &ai_rank_prob(p, n2, u, rank, &tol()).unwrap();
        }
        assert!(sum.hi() <= &(Rational::one() + tol()), "p={p}: {sum}");
        assert!(
            sum.lo() > &(Rational::one() - frac(1, 10_000)),
            "p={p}: {sum}"
        );
    }
}

#[test]
fn rank_law_is_the_sum_over_modules() {
    for (p, n2, u) in [(3u64, 2u32, 1u32), (2, 1, 1)] {
        for rank in 0..=3u32 {
            let want = ai_rank_prob(p, n2, u, rank, &tol()).unwrap();
            let mut sum = CertValue::zero();
            for lam in Partition::all_up_to(14)
                .into_iter()
                .filter(|l| l.part(1) == rank)
            {
                sum = &sum + &ai_pair_prob(p, n2, u, &lam, &tol()).unwrap();
            }
            assert!(sum.lo() <= want.hi());
            assert!(
                (want.to_f64() - sum.to_f64()).abs() < 1e-4 * want.to_f64().max(1e-12),
                "rank {rank}"
            );
        }
    }
}

/// Moments of the absolutely irreducible law against `p^{C(N_1,2)}/|N|^{un_2}`.
#[test]
fn pair_law_moments_converge() {
    let (p, n2, u) = (3u64, 2u32, 1u32);
    for target in [vec![1], vec![1, 1], vec![2], vec![2, 1]] {
        let n = Partition::new(target).unwrap();
        let moment = q_pow(
            p,
            binom2(n.part(1) as i64) - (u * n2) as i64 * n.size() as i64,
        );
        let mut residuals = Vec::new();
        for max in [4u32, 6, 8] {
            let mut sum = Rational::zero();
            for lam in Partition::all_up_to(max) {
                let c = sur_count(p, &lam, &n);
                if c.is_zero() {
                    continue;
                }
                sum += ai_pair_prob(p, n2, u, &lam, &tol()).unwrap().lo() * int(BigInt::from(c));
            }
            residuals.push(&moment - sum);
        }
        assert!(
            residuals.windows(2).all(|w| w[1] < w[0]),
            "{n}: {residuals:?}"
        );
        assert!(residuals[2] > Rational::zero());
        assert!(residuals[2] < (&moment / int(100)), "{n}: {residuals:?}");
    }
}
