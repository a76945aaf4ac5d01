//! Self-checks runnable from the command line: closed forms against direct
//! evaluation, combinatorics against brute force, and the measure against
//! its moments.

use num_bigint::BigUint;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::decomp::{DecompData, GroupSpec};
use crate::measure::{module_factored, nu_level, pf, pf_closed_zero, LevelSpec, MeasureError};
use crate::moments::{v_reconstruct, MassTable};
use crate::partmod::{
    aut_order, elem_kernel_sur_count, enumerate_shapes, oracle_sur_count_by_kernel, sur_count,
    CyclicSum, ModuleShape, Partition,
};
use crate::qexact::{frac, Rational};

pub const SUITES: [&str; 5] = ["pf-identity", "oracle", "support", "reconstruct", "moments"];

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub case: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checked: usize,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport {
            suite: suite.into(),
            passed: true,
            checked: 0,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, case: impl FnOnce() -> String, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.passed = false;
            self.failures.push(Failure {
                case: case(),
                detail: detail(),
            });
        }
    }

    fn merge(&mut self, other: SuiteReport) {
        self.checked += other.checked;
        self.passed &= other.passed;
        self.failures.extend(other.failures);
        self.notes.extend(other.notes);
    }
}

/// The `(Γ, p, r, u)` configurations the moment-based suites run over.
pub fn standard_configs() -> Vec<DecompData> {
    let mut out = Vec::new();
    let c3 = GroupSpec::cyclic(3).expect("valid");
    for r in [1, 2] {
        for u in [1, 2] {
            out.push(DecompData::abelian(&c3, 2, r, u).expect("valid"));
        }
    }
    out.push(DecompData::abelian(&GroupSpec::cyclic(7).expect("valid"), 2, 1, 1).expect("valid"));
    out.push(DecompData::abelian(&GroupSpec::cyclic(2).expect("valid"), 3, 1, 1).expect("valid"));
    out
}

pub fn describe(d: &DecompData) -> String {
    let qs: Vec<String> = d.components.iter().map(|c| c.q.to_string()).collect();
    format!("p={} r={} u={} q=[{}]", d.p, d.r, d.u, qs.join(","))
}

/// `Pf_q(0, m)` against its product form.
pub fn pf_identity(qs: &[u64], m_max: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("pf-identity");
    for &q in qs {
        for m in 0..=m_max {
            let direct = pf(q, &Rational::zero(), m)
                .ok()
                .and_then(|x| x.to_rational());
            let closed = pf_closed_zero(q, m);
            rep.check(
                direct.as_ref() == Some(&closed),
                || format!("q={q} m={m}"),
                || format!("{direct:?} vs {closed}"),
            );
        }
    }
    rep
}

/// Closed-form counts against enumeration for every pair `|M||N| <= bound`
/// over residue fields of the given sizes.
pub fn oracle_sweep(fields: &[(u64, usize)], bound: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("oracle");
    for &(p, d) in fields {
        let q = p.pow(d as u32);
        let max_size = (bound as f64).log(q as f64).floor() as u32;
        let parts = Partition::all_up_to(max_size);
        let pairs: Vec<(&Partition, &Partition)> = parts
            .iter()
            .flat_map(|m| parts.iter().map(move |n| (m, n)))
            .filter(|(m, n)| (q as u128).pow((m.size() + n.size()) as u32) <= bound as u128)
            .collect();
        let results: Vec<SuiteReport> = pairs
            .into_par_iter()
            .map(|(rho, lam)| {
                let mut r = SuiteReport::new("oracle");
                let m = CyclicSum::from_partition(p, d, rho);
                let n = CyclicSum::from_partition(p, d, lam);
                let brute = match oracle_sur_count_by_kernel(&m, &n, bound) {
                    Ok(b) => b,
                    Err(e) => {
                        r.check(false, || format!("q={q} {rho}->{lam}"), || e.to_string());
                        return r;
                    }
                };
                let sur = sur_count(q, rho, lam);
                r.check(
                    sur == BigUint::from(brute.surjections),
                    || format!("sur q={q} {rho}->{lam}"),
                    || format!("closed {sur}, brute {}", brute.surjections),
                );
                if rho == lam {
                    let aut = aut_order(q, lam);
                    r.check(
                        aut == BigUint::from(brute.surjections),
                        || format!("aut q={q} {lam}"),
                        || format!("closed {aut}, brute {}", brute.surjections),
                    );
                }
                if rho.size() >= lam.size() {
                    let e = rho.size() - lam.size();
                    let count = elem_kernel_sur_count(q, rho, lam, e) * aut_order(q, lam);
                    r.check(
                        count == BigUint::from(brute.semisimple_kernel),
                        || format!("elem q={q} {rho}->{lam}"),
                        || format!("closed {count}, brute {}", brute.semisimple_kernel),
                    );
                }
                r
            })
            .collect();
        for r in results {
            rep.merge(r);
        }
    }
    rep
}

/// Over `C_7` at `p = 2`: `ν(V)` is an exact zero precisely when some
/// `|λ²_ℓ - λ³_ℓ| > u` with `ℓ <= r`, and otherwise bounded away from zero.
pub fn support_characterization(bound: u64, tol: &Rational) -> SuiteReport {
    let mut rep = SuiteReport::new("support");
    let c7 = GroupSpec::cyclic(7).expect("valid");
    for u in [1, 2] {
        for r in [1, 2] {
            let d = DecompData::abelian(&c7, 2, r, u).expect("valid");
            let shapes = enumerate_shapes(&d, bound);
            let outcomes: Vec<(ModuleShape, bool, Result<bool, MeasureError>)> = shapes
                .into_par_iter()
                .map(|s| {
                    let (a, b) = (s.get(2), s.get(3));
                    let depth = a.len().max(b.len()).min(r as usize);
                    let outside =
                        (1..=depth).any(|l| (a.part(l) as i64 - b.part(l) as i64).abs() > u as i64);
                    let got = module_factored(&d, &s).and_then(|f| {
                        let v = f.eval_relative(tol)?;
                        Ok(if outside {
                            v.is_exact_zero()
                        } else {
                            v.excludes_zero()
                        })
                    });
                    (s, outside, got)
                })
                .collect();
            for (s, outside, got) in outcomes {
                let ok = matches!(got, Ok(true));
                rep.check(
                    ok,
                    || format!("u={u} r={r} {s}"),
                    || format!("outside support: {outside}, result {got:?}"),
                );
            }
        }
    }
    rep
}

/// Level sets with `k_i <= 2` and `Σ|λ^i| <= max_total`.
pub fn small_level_cases(
    d: &DecompData,
    max_k: u32,
    max_total: u32,
) -> Vec<(LevelSpec, ModuleShape)> {
    let ids = d.ids();
    let mut levels: Vec<LevelSpec> = vec![LevelSpec::new()];
    for &id in &ids {
        levels = levels
            .into_iter()
            .flat_map(|l| {
                (0..=max_k).map(move |k| {
                    let mut l = l.clone();
                    l.set(id, k);
                    l
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for k in levels {
        let mut shapes = vec![(ModuleShape::empty(), 0u32)];
        for &id in &ids {
            let mut next = Vec::new();
            for (s, used) in &shapes {
                for p in Partition::all_up_to(max_total - used) {
                    if p.len() <= k.get(id) as usize {
                        let mut t = s.clone();
                        let size = p.size() as u32;
                        t.set(id, p);
                        next.push((t, used + size));
                    }
                }
            }
            shapes = next;
        }
        out.extend(shapes.into_iter().map(|(s, _)| (k.clone(), s)));
    }
    out
}

/// Whether successive corrections shrink geometrically: from the third
/// correction on, each is at most `ratio` times the previous, or negligible.
pub fn decays_geometrically(diffs: &[Rational], ratio: &Rational, floor: &Rational) -> bool {
    diffs
        .windows(2)
        .skip(1)
        .all(|w| &w[1] <= floor || w[1] <= &w[0] * ratio)
}

/// `v_reconstruct` at `e_max` against `nu_level`.
pub fn reconstruct(configs: &[DecompData], e_max: u64, tol: &Rational) -> SuiteReport {
    let mut rep = SuiteReport::new("reconstruct");
    let level_tol = frac(1, 1 << 40);
    let floor = frac(1, 1_000_000_000_000);
    let ratio = frac(9, 10);
    for d in configs {
        let cases = small_level_cases(d, 2, 3);
        let results: Vec<_> = cases
            .into_par_iter()
            .map(|(k, s)| {
                let v = v_reconstruct(d, &k, &s, e_max);
                let want = nu_level(d, &k, &s, &level_tol);
                (k, s, v, want)
            })
            .collect();
        let mut worst = 0.0f64;
        for (k, s, v, want) in results {
            let case = || format!("{} k={:?} {s}", describe(d), k.iter().collect::<Vec<_>>());
            match (v, want) {
                (Ok(v), Ok(want)) => {
                    let lo = (want.lo() - v.value()).abs();
                    let hi = (want.hi() - v.value()).abs();
                    let err = if lo > hi { lo } else { hi };
                    worst = worst.max(err.to_f64().unwrap_or(f64::INFINITY));
                    let diffs = v.differences();
                    rep.check(&err <= tol, case, || {
                        format!("|v - ν| <= {}", err.to_f64().unwrap_or(f64::NAN))
                    });
                    rep.check(decays_geometrically(&diffs, &ratio, &floor), case, || {
                        format!(
                            "corrections {:?}",
                            diffs
                                .iter()
                                .map(|x| x.to_f64().unwrap_or(f64::NAN))
                                .collect::<Vec<_>>()
                        )
                    });
                }
                (v, w) => rep.check(false, case, || format!("{:?} / {:?}", v.err(), w.err())),
            }
        }
        rep.notes
            .push(format!("{}: worst |v - ν| = {worst:.3e}", describe(d)));
    }
    rep
}

/// `Σ_{|V| <= B} ν(V)|Sur(V, N)|` against `M_N` for every target with
/// `|N| <= target_bound`: the gap must be below `rel · M_N` at the last
/// bound and non-increasing along `bounds`.
pub fn moment_suite(
    configs: &[DecompData],
    target_bound: u64,
    bounds: &[u64],
    rel: &Rational,
    tol: &Rational,
) -> SuiteReport {
    let mut rep = SuiteReport::new("moments");
    for d in configs {
        let tables: Result<Vec<MassTable>, _> =
            bounds.iter().map(|&b| MassTable::new(d, b, tol)).collect();
        let tables = match tables {
            Ok(t) => t,
            Err(e) => {
                rep.check(false, || describe(d), || e.to_string());
                continue;
            }
        };
        let mut worst = 0.0f64;
        for target in enumerate_shapes(d, target_bound) {
            let reports: Result<Vec<_>, _> = tables.iter().map(|t| t.check(d, &target)).collect();
            let reports = match reports {
                Ok(r) => r,
                Err(e) => {
                    rep.check(
                        false,
                        || format!("{} {target}", describe(d)),
                        || e.to_string(),
                    );
                    continue;
                }
            };
            let m = reports[0].moment_exact.clone();
            let res: Vec<Rational> = reports.iter().map(|r| r.residual.clone()).collect();
            let last = res.last().expect("at least one bound").clone();
            worst = worst.max((&last / &m).to_f64().unwrap_or(f64::INFINITY));
            let case = || format!("{} N={target}", describe(d));
            rep.check(last < &m * rel, case, || {
                format!("residual {} vs M = {m}", last.to_f64().unwrap_or(f64::NAN))
            });
            rep.check(res.windows(2).all(|w| w[1] <= w[0]), case, || {
                format!(
                    "residuals {:?}",
                    res.iter()
                        .map(|x| x.to_f64().unwrap_or(f64::NAN))
                        .collect::<Vec<_>>()
                )
            });
        }
        rep.notes.push(format!(
            "{}: worst relative residual {worst:.3e}",
            describe(d)
        ));
    }
    rep
}

/// Runs a named suite with its standard parameters, `bound` and `e_max`
/// overriding the defaults where they apply.
pub fn run_suite(
    name: &str,
    bound: Option<u64>,
    e_max: Option<u64>,
    tol: &Rational,
) -> Option<SuiteReport> {
    let report = match name {
        "pf-identity" => pf_identity(&[2, 3, 4, 8, 9], 30),
        "oracle" => oracle_sweep(&[(2, 1), (3, 1), (2, 2), (2, 3)], bound.unwrap_or(1 << 10)),
        "support" => support_characterization(bound.unwrap_or(1 << 12), tol),
        "reconstruct" => reconstruct(&standard_configs(), e_max.unwrap_or(10), &frac(1, 10_000)),
        "moments" => {
            let top = bound.unwrap_or(1 << 14);
            let bounds = [top >> 4, top >> 2, top];
            moment_suite(&standard_configs(), 1 << 8, &bounds, &frac(1, 100), tol)
        }
        _ => return None,
    };
    Some(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qexact::int;

    #[test]
    fn small_suites_pass() {
        assert!(pf_identity(&[2, 3], 10).passed);
        let r = oracle_sweep(&[(2, 1), (3, 1)], 64);
        assert!(r.passed, "{:?}", r.failures);
        assert!(r.checked > 10);
    }

    #[test]
    fn geometric_decay() {
        let d = [int(1), frac(1, 2), frac(1, 4), frac(1, 8)];
        assert!(decays_geometrically(&d, &frac(9, 10), &frac(0, 1)));
        let d = [int(1), frac(1, 2), frac(1, 4), frac(1, 2)];
        assert!(!decays_geometrically(&d, &frac(9, 10), &frac(0, 1)));
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", None, None, &frac(1, 2)).is_none());
    }
}
