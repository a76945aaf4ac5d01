//! Decomposition data of `Z_p[Γ]/(Σγ)`: one entry per nontrivial
//! irreducible component, with its residue degree, matrix size, duality
//! partner, ε-invariant and invariant multiplicity.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecompError {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("p = {p} divides the group order {order}")]
    PDividesOrder { p: u64, order: u64 },
    #[error("q = p^d overflows for p = {p}, d = {d}")]
    Overflow { p: u64, d: u32 },
    #[error("malformed decomposition JSON: {0}")]
    Json(String),
    #[error("decomposition data violates {} rule(s): {}", .0.len(), join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub component: Option<u32>,
    pub message: String,
}

impl Violation {
    fn global(message: impl Into<String>) -> Self {
        Violation {
            component: None,
            message: message.into(),
        }
    }

    fn at(id: u32, message: impl Into<String>) -> Self {
        Violation {
            component: Some(id),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.component {
            Some(id) => write!(f, "component {id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    n >= 2
        && (2..)
            .take_while(|i| i * i <= n)
            .all(|i| !n.is_multiple_of(i))
}

fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut f = 2;
    while f * f <= n {
        let mut e = 0;
        while n.is_multiple_of(f) {
            n /= f;
            e += 1;
        }
        if e > 0 {
            out.push((f, e));
        }
        f += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// A finite abelian group by its invariant factors `n_1 | n_2 | ...`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    factors: Vec<u64>,
}

impl GroupSpec {
    /// Any list of cyclic orders `>= 2`; it is rewritten in invariant-factor
    /// form, so the order of the list does not matter.
    pub fn new(factors: Vec<u64>) -> Result<Self, DecompError> {
        if factors.is_empty() {
            return Err(DecompError::InvalidGroup("no cyclic factors given".into()));
        }
        if let Some(bad) = factors.iter().find(|&&n| n < 2) {
            return Err(DecompError::InvalidGroup(format!(
                "cyclic factor {bad} is smaller than 2"
            )));
        }
        factors
            .iter()
            .try_fold(1u64, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| DecompError::InvalidGroup("group order overflows".into()))?;
        let mut by_prime: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for &n in &factors {
            for (l, e) in factorize(n) {
                by_prime.entry(l).or_default().push(e);
            }
        }
        let len = by_prime.values().map(Vec::len).max().unwrap_or(0);
        let mut inv = vec![1u64; len];
        for (l, mut exps) in by_prime {
            exps.sort_unstable();
            // largest exponents go to the last invariant factors
            for (slot, e) in inv.iter_mut().rev().zip(exps.iter().rev()) {
                *slot *= l.pow(*e);
            }
        }
        Ok(GroupSpec { factors: inv })
    }

    pub fn cyclic(n: u64) -> Result<Self, DecompError> {
        Self::new(vec![n])
    }

    /// `cyclic:N` or `abelian:a,b,...`.
    pub fn parse(text: &str) -> Result<Self, DecompError> {
        let bad = || {
            DecompError::InvalidGroup(format!(
                "expected cyclic:N or abelian:a,b,..., got {text:?}"
            ))
        };
        let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
        let nums: Vec<u64> = rest
            .split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        match kind.trim() {
            "cyclic" if nums.len() == 1 => Self::cyclic(nums[0]),
            "abelian" => Self::new(nums),
            _ => Err(bad()),
        }
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn order(&self) -> u64 {
        self.factors.iter().product()
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.factors.iter().map(|x| x.to_string()).collect();
        write!(f, "abelian:{}", s.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent")]
pub struct ComponentData {
    pub id: u32,
    pub d: u32,
    pub n: u32,
    pub q: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<i8>,
    pub dual_id: u32,
    /// Multiplicity of the `Γ'`-invariants; 0 marks a component outside ℳ.
    pub m: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    id: u32,
    d: u32,
    n: u32,
    q: u64,
    #[serde(default)]
    epsilon: Option<i8>,
    dual_id: u32,
    #[serde(default)]
    m: Option<u32>,
}

impl TryFrom<RawComponent> for ComponentData {
    type Error = String;
    fn try_from(r: RawComponent) -> Result<Self, String> {
        if r.dual_id == r.id && r.epsilon.is_none() {
            return Err(format!(
                "self-dual component {} is missing \"epsilon\"",
                r.id
            ));
        }
        Ok(ComponentData {
            id: r.id,
            d: r.d,
            n: r.n,
            q: r.q,
            epsilon: r.epsilon,
            dual_id: r.dual_id,
            m: r.m.unwrap_or(r.n),
        })
    }
}

impl ComponentData {
    pub fn is_self_dual(&self) -> bool {
        self.dual_id == self.id
    }
}

/// A σ-orbit of components: a self-dual one, or a dual pair with the smaller
/// id first.
#[derive(Clone, Copy, Debug)]
pub enum Orbit<'a> {
    SelfDual(&'a ComponentData),
    Pair(&'a ComponentData, &'a ComponentData),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompData {
    pub p: u64,
    pub r: u32,
    pub u: u32,
    pub components: Vec<ComponentData>,
}

impl DecompData {
    /// Decomposition of `Z_p[Γ]` for abelian `Γ`, validated.
    pub fn abelian(group: &GroupSpec, p: u64, r: u32, u: u32) -> Result<Self, DecompError> {
        let components = decompose_abelian(group, p)?;
        let data = DecompData {
            p,
            r,
            u,
            components,
        };
        validate(&data).map_err(DecompError::Invalid)?;
        Ok(data)
    }

    pub fn with_params(&self, r: u32, u: u32) -> Self {
        DecompData {
            r,
            u,
            ..self.clone()
        }
    }

    pub fn component(&self, id: u32) -> Option<&ComponentData> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.id).collect()
    }

    pub fn orbits(&self) -> Vec<Orbit<'_>> {
        let mut out = Vec::new();
        for c in &self.components {
            if c.is_self_dual() {
                out.push(Orbit::SelfDual(c));
            } else if c.id < c.dual_id {
                let partner = self.component(c.dual_id).expect("validated duality");
                out.push(Orbit::Pair(c, partner));
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, DecompError> {
        load_json(text)
    }

    pub fn to_json(&self) -> String {
        save_json(self)
    }
}

/// Orbits of the nontrivial characters under `x ↦ px`, identifying the dual
/// group with `Γ`. Elements are ordered in mixed radix with the first
/// invariant factor most significant, and components are numbered from 2 by
/// the least element of their orbit.
pub fn decompose_abelian(group: &GroupSpec, p: u64) -> Result<Vec<ComponentData>, DecompError> {
    if !is_prime(p) {
        return Err(DecompError::NotPrime(p));
    }
    let order = group.order();
    if order.is_multiple_of(p) {
        return Err(DecompError::PDividesOrder { p, order });
    }
    let f = group.factors();
    let encode = |x: &[u64]| x.iter().zip(f).fold(0u64, |acc, (&c, &n)| acc * n + c);
    let decode = |mut i: u64| {
        let mut x = vec![0u64; f.len()];
        for (c, &n) in x.iter_mut().zip(f).rev() {
            *c = i % n;
            i /= n;
        }
        x
    };
    let times = |k: u64, x: &[u64]| -> Vec<u64> {
        x.iter().zip(f).map(|(&c, &n)| (c * (k % n)) % n).collect()
    };

    let mut orbit_of = vec![usize::MAX; order as usize];
    let mut orbits: Vec<(u64, Vec<u64>)> = Vec::new(); // (least element, members)
    for i in 1..order {
        if orbit_of[i as usize] != usize::MAX {
            continue;
        }
        let idx = orbits.len();
        let mut members = Vec::new();
        let mut x = decode(i);
        loop {
            let e = encode(&x);
            if orbit_of[e as usize] != usize::MAX {
                break;
            }
            orbit_of[e as usize] = idx;
            members.push(e);
            x = times(p, &x);
        }
        orbits.push((i, members));
    }

    let mut out = Vec::with_capacity(orbits.len());
    for (idx, (least, members)) in orbits.iter().enumerate() {
        let x = decode(*least);
        let neg = encode(&times(order - 1, &x));
        let dual = orbit_of[neg as usize];
        let d = members.len() as u32;
        let q = p.checked_pow(d).ok_or(DecompError::Overflow { p, d })?;
        let epsilon = (dual == idx).then(|| {
            let two_x_zero = times(2, &x).iter().all(|&c| c == 0);
            if d == 1 && two_x_zero {
                1
            } else {
                0
            }
        });
        out.push(ComponentData {
            id: idx as u32 + 2,
            d,
            n: 1,
            q,
            epsilon,
            dual_id: dual as u32 + 2,
            m: 1,
        });
    }
    Ok(out)
}

/// Every violated rule, or `Ok` if there are none.
pub fn validate(data: &DecompData) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if !is_prime(data.p) {
        v.push(Violation::global(format!("p = {} is not prime", data.p)));
    }
    if data.r < 1 {
        v.push(Violation::global("r must be at least 1"));
    }
    if data.u < 1 {
        v.push(Violation::global("u must be at least 1"));
    }
    for (i, c) in data.components.iter().enumerate() {
        if c.id != i as u32 + 2 {
            v.push(Violation::at(
                c.id,
                format!("ids must run 2, 3, ... in order; expected {}", i + 2),
            ));
        }
        if c.d < 1 || c.n < 1 {
            v.push(Violation::at(c.id, "d and n must be positive"));
        }
        if c.m > c.n {
            v.push(Violation::at(
                c.id,
                format!("m = {} exceeds n = {}", c.m, c.n),
            ));
        }
        if data.p.checked_pow(c.d) != Some(c.q) {
            v.push(Violation::at(
                c.id,
                format!("q = {} is not p^d = {}^{}", c.q, data.p, c.d),
            ));
        }
        match (c.is_self_dual(), c.epsilon) {
            (true, None) => v.push(Violation::at(c.id, "self-dual component needs ε")),
            (false, Some(_)) => v.push(Violation::at(
                c.id,
                "ε is only defined for self-dual components",
            )),
            (true, Some(e)) if !(-1..=1).contains(&e) => v.push(Violation::at(
                c.id,
                format!("ε = {e} is not in {{-1, 0, 1}}"),
            )),
            (true, Some(-1)) if c.n == 1 => v.push(Violation::at(
                c.id,
                "ε=−1 requires ∧²≠0, which fails for a component with n = 1",
            )),
            _ => {}
        }
        if !c.is_self_dual() {
            match data.component(c.dual_id) {
                None => v.push(Violation::at(
                    c.id,
                    format!("dual_id {} does not exist", c.dual_id),
                )),
                Some(o) if o.dual_id != c.id => v.push(Violation::at(
                    c.id,
                    format!(
                        "duality is not an involution: {} -> {} -> {}",
                        c.id, o.id, o.dual_id
                    ),
                )),
                Some(o) if (o.d, o.n, o.q, o.m) != (c.d, c.n, c.q, c.m) => v.push(Violation::at(
                    c.id,
                    format!("dual pair {}/{} disagrees on d, n, q or m", c.id, o.id),
                )),
                _ => {}
            }
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

pub fn load_json(text: &str) -> Result<DecompData, DecompError> {
    let data: DecompData =
        serde_json::from_str(text).map_err(|e| DecompError::Json(e.to_string()))?;
    validate(&data).map_err(DecompError::Invalid)?;
    Ok(data)
}

pub fn save_json(data: &DecompData) -> String {
    serde_json::to_string_pretty(data).expect("decomposition data serializes")
}
