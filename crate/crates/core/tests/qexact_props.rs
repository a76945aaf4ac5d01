use clmeasure::qexact::{eta, eta_inf, frac, inf_product, int, q_pow, qbinom, CertValue, Rational};
use num_traits::{One, Zero};
use proptest::prelude::*;

#[test]
fn finite_q_binomial_theorem() {
    let points = [frac(0, 1), frac(1, 1), frac(-1, 2), frac(3, 7), frac(-5, 3)];
    for q in [2u64, 3, 4, 8] {
        for n in 0..=12u64 {
            for t in &points {
                let mut lhs = Rational::zero();
                let mut tk = Rational::one();
                for k in 0..=n as i64 {
                    lhs += q_pow(q, -(k * (k - 1) / 2)) * qbinom(q, n, k).unwrap() * &tk;
                    tk *= t;
                }
                let rhs = (0..n as i64).fold(Rational::one(), |acc, k| {
                    acc * (Rational::one() + q_pow(q, -k) * t)
                });
                assert_eq!(lhs, rhs, "q={q} n={n} t={t}");
            }
        }
    }
}

#[test]
fn negative_q_binomial_partial_sums() {
    let tol = frac(1, 1 << 50);
    for q in [2u64, 3, 4, 8, 9] {
        for (v, a) in [(-q_pow(q, -1), 1), (-q_pow(q, -2), 2)] {
            let target = inf_product(q, &int(a), 1, -1, &tol).unwrap();
            let mut sum = Rational::zero();
            let mut ve = Rational::one();
            for e in 0..60u64 {
                sum += &ve / eta(q, e).unwrap();
                ve *= &v;
            }
            let widened = CertValue::new(
                target.lo() - frac(1, 1 << 40),
                target.hi() + frac(1, 1 << 40),
            );
            assert!(widened.contains(&sum), "q={q} a={a}");
        }
    }
}

#[test]
fn eta_decreases_to_its_limit() {
    let tol = frac(1, 1 << 60);
    for q in [2u64, 3, 4, 8, 9] {
        let lim = eta_inf(q, &tol).unwrap();
        let mut prev = eta(q, 0).unwrap();
        for k in 1..40 {
            let e = eta(q, k).unwrap();
            assert!(e < prev);
            assert!(&e - lim.lo() >= Rational::zero());
            prev = e;
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Add(i64, i64),
    Sub(i64, i64),
    Mul(i64, i64),
    Scale(i64, i64),
    Recip,
    Neg,
}

fn op() -> impl Strategy<Value = Op> {
    let r = || (-20i64..20, 1i64..20);
    prop_oneof![
        r().prop_map(|(a, b)| Op::Add(a, b)),
        r().prop_map(|(a, b)| Op::Sub(a, b)),
        r().prop_map(|(a, b)| Op::Mul(a, b)),
        r().prop_map(|(a, b)| Op::Scale(a, b)),
        Just(Op::Recip),
        Just(Op::Neg),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Exact evaluation stays inside the enclosure through any chain of
    /// operations on widened operands.
    #[test]
    fn intervals_are_sound(start in (-20i64..20, 1i64..20), ops in prop::collection::vec(op(), 1..8), slack in 1i64..1000) {
        let w = |x: &Rational| CertValue::new(x - frac(1, slack * 1000), x + frac(1, slack * 1000));
        let mut exact = frac(start.0, start.1);
        let mut enc = w(&exact);
        for o in ops {
            match o {
                Op::Add(a, b) => { let y = frac(a, b); enc = &enc + &w(&y); exact += y; }
                Op::Sub(a, b) => { let y = frac(a, b); enc = &enc - &w(&y); exact -= y; }
                Op::Mul(a, b) => { let y = frac(a, b); enc = &enc * &w(&y); exact *= y; }
                Op::Scale(a, b) => { let y = frac(a, b); enc = enc.scale(&y); exact *= y; }
                Op::Recip => {
                    match enc.recip() {
                        Ok(r) => { exact = exact.recip(); enc = r; }
                        Err(_) => prop_assert!(enc.contains(&Rational::zero())),
                    }
                }
                Op::Neg => { enc = -&enc; exact = -exact; }
            }
            prop_assert!(enc.contains(&exact), "{exact} not in {enc}");
        }
    }
}
