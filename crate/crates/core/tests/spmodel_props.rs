use std::collections::BTreeMap;

use clmeasure::partmod::Partition;
use clmeasure::qexact::Rational;
use clmeasure::spmodel::{
    cokernel_shape, limit_moment, run_experiment, sample_rng, sample_sp, sample_sp_r,
    smith_exponents, sur_moment, MatrixModPk,
};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::Rng;

/// Diagonalizes `[B | p^k I]` over `Z` and reads off the `p`-adic
/// valuations of the diagonal.
fn integer_cokernel_exponents(b: &MatrixModPk) -> Vec<u32> {
    let (n, p, k) = (b.size(), b.p(), b.k());
    let pk = BigInt::from(p).pow(k);
    let mut a: Vec<Vec<BigInt>> = b
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<BigInt> = row.into_iter().map(BigInt::from).collect();
            r.extend((0..n).map(|j| if i == j { pk.clone() } else { BigInt::zero() }));
            r
        })
        .collect();
    let cols = 2 * n;
    let mut diag = Vec::new();
    for t in 0..n {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..cols {
                    if !a[i][j].is_zero()
                        && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = best else {
                return finish(diag, p);
            };
            a.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            let piv = a[t][t].clone();
            let mut clean = true;
            for i in t + 1..n {
                let q = a[i][t].div_floor(&piv);
                if !q.is_zero() {
                    for j in t..cols {
                        let x = &a[t][j] * &q;
                        a[i][j] -= x;
                    }
                }
                clean &= a[i][t].is_zero();
            }
            for j in t + 1..cols {
                let q = a[t][j].div_floor(&piv);
                if !q.is_zero() {
                    for row in a.iter_mut() {
                        let x = &row[t] * &q;
                        row[j] -= x;
                    }
                }
                clean &= a[t][j].is_zero();
            }
            if clean {
                diag.push(piv);
                break;
            }
        }
    }
    finish(diag, p)
}

fn finish(diag: Vec<BigInt>, p: u64) -> Vec<u32> {
    let pb = BigInt::from(p);
    let mut out: Vec<u32> = diag
        .into_iter()
        .map(|mut d| {
            let mut v = 0;
            while (&d % &pb).is_zero() {
                d /= &pb;
                v += 1;
            }
            assert_eq!(d.abs(), BigInt::from(1), "cokernel is a p-group");
            v
        })
        .filter(|&v| v > 0)
        .collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

fn random_matrix(p: u64, k: u32, n: usize, seed: u64) -> MatrixModPk {
    let mut rng = sample_rng(seed, 0);
    let m = p.pow(k) as i64;
    // bias towards p-divisible entries so that large exponents show up
    let rows = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(0..m)
                    } else {
                        p as i64 * rng.gen_range(0..m) % m
                    }
                })
                .collect()
        })
        .collect();
    MatrixModPk::from_rows(p, k, rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn local_smith_form_matches_integer_diagonalization(
        (p, k) in prop_oneof![Just((2u64, 3u32)), Just((3, 2)), Just((5, 2)), Just((2, 1))],
        n in 1usize..7,
        seed in any::<u64>(),
    ) {
        let b = random_matrix(p, k, n, seed);
        prop_assert_eq!(smith_exponents(&b), integer_cokernel_exponents(&b));
    }
}

fn kernel_size(b: &MatrixModPk) -> u64 {
    let n = b.size();
    let m = b.modulus();
    let total = m.pow(n as u32);
    let rows = b.rows();
    (0..total)
        .filter(|&idx| {
            let x: Vec<u64> = (0..n).map(|i| idx / m.pow(i as u32) % m).collect();
            rows.iter()
                .all(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum::<u64>() % m == 0)
        })
        .count() as u64
}

#[test]
fn kernel_and_cokernel_have_the_same_order() {
    for (p, r, k, g) in [(3u64, 1u32, 2u32, 1usize), (2, 1, 2, 2), (2, 2, 2, 1)] {
        for i in 0..10_000u64 {
            let a = sample_sp_r(p, r, k, g, &mut sample_rng(11, i)).unwrap();
            let coker: u32 = cokernel_shape(&a).size() as u32;
            assert_eq!(
                kernel_size(&a.sub_identity()),
                p.pow(coker),
                "p={p} k={k} g={g} sample {i}"
            );
        }
    }
}

#[test]
fn histograms_do_not_depend_on_thread_count() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(3, 1, 2, 3, 3000, 99).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.to_json(), run(3).to_json());
    assert_eq!(one.total(), 3000);
}

/// Chi-square of observed counts against a uniform law, with a loose cutoff.
fn assert_uniform(counts: &BTreeMap<Vec<Vec<u64>>, u64>, classes: usize, samples: u64) {
    assert_eq!(counts.len(), classes);
    let e = samples as f64 / classes as f64;
    let chi: f64 = counts.values().map(|&o| (o as f64 - e).powi(2) / e).sum();
    let dof = (classes - 1) as f64;
    assert!(
        chi < dof + 6.0 * (2.0 * dof).sqrt(),
        "chi-square {chi} on {dof} dof"
    );
}

#[test]
fn small_symplectic_groups_are_sampled_uniformly() {
    // |Sp_2(F_2)| = 6, |Sp_2(Z/4)| = 48, |Sp_2(F_3)| = 24
    for (p, r, order) in [(2u64, 1u32, 6usize), (2, 2, 48), (3, 1, 24)] {
        let samples = 500 * order as u64;
        let mut counts: BTreeMap<Vec<Vec<u64>>, u64> = BTreeMap::new();
        let mut trivial = 0u64;
        for i in 0..samples {
            let a = sample_sp(p, r, 1, &mut sample_rng(5, i));
            assert!(a.is_symplectic_mod(r));
            if cokernel_shape(&a).is_empty() {
                trivial += 1;
            }
            *counts.entry(a.rows()).or_default() += 1;
        }
        assert_uniform(&counts, order, samples);
        if (p, r) == (2, 1) {
            // the two elements of order 3 have no fixed vector
            let frac = trivial as f64 / samples as f64;
            let sd = (2.0 / 9.0 / samples as f64).sqrt();
            assert!((frac - 1.0 / 3.0).abs() < 4.0 * sd, "{frac}");
        }
    }
}

#[test]
fn sample_moments_match_wedge_squares() {
    let h = run_experiment(3, 1, 2, 5, 20_000, 2024).unwrap();
    for exps in [vec![1], vec![1, 1], vec![2]] {
        let target = Partition::new(exps).unwrap();
        let (mean, se) = sur_moment(&h, &target);
        let want = limit_moment(3, 1, &target);
        let want = want.numer().to_f64().unwrap() / want.denom().to_f64().unwrap();
        assert!(
            (mean - want).abs() < 3.0 * se,
            "{target}: {mean} ± {se} vs {want}"
        );
    }
    assert_eq!(
        limit_moment(3, 1, &Partition::new(vec![1, 1]).unwrap()),
        Rational::from_integer(3.into())
    );
}
