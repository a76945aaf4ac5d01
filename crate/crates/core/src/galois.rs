//! Galois rings `GR(p^k, d) = (Z/p^k)[y]/(g)` with `g` monic and irreducible
//! mod `p`, small enough to enumerate.

/// Coefficients of `1, y, ..., y^{d-1}`, each reduced mod `p^k`.
pub type GrElem = Vec<u64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaloisRing {
    p: u64,
    k: u32,
    d: usize,
    modulus: u64,
    /// Monic, low degree first, length `d + 1`.
    g: Vec<u64>,
}

impl GaloisRing {
    /// Uses the first monic irreducible of degree `d` mod `p` in
    /// lexicographic order of its low coefficients.
    pub fn new(p: u64, k: u32, d: usize) -> Self {
        assert!(p >= 2 && k >= 1 && d >= 1, "degenerate Galois ring");
        let g = first_irreducible(p, d);
        GaloisRing {
            p,
            k,
            d,
            modulus: p.pow(k),
            g,
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `p^k`.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Residue field size `p^d`.
    pub fn q(&self) -> u64 {
        self.p.pow(self.d as u32)
    }

    pub fn order(&self) -> u64 {
        self.modulus.pow(self.d as u32)
    }

    pub fn zero(&self) -> GrElem {
        vec![0; self.d]
    }

    pub fn from_int(&self, n: i64) -> GrElem {
        let mut e = self.zero();
        e[0] = n.rem_euclid(self.modulus as i64) as u64;
        e
    }

    pub fn one(&self) -> GrElem {
        self.from_int(1)
    }

    /// The class of `y`.
    pub fn gen(&self) -> GrElem {
        if self.d == 1 {
            // y = -g_0 when g is linear
            return self.from_int(-(self.g[0] as i64));
        }
        let mut e = self.zero();
        e[1] = 1;
        e
    }

    /// Mixed-radix decoding, coefficient 0 least significant.
    pub fn element(&self, mut index: u64) -> GrElem {
        let mut e = self.zero();
        for c in e.iter_mut() {
            *c = index % self.modulus;
            index /= self.modulus;
        }
        e
    }

    pub fn add(&self, x: &[u64], y: &[u64]) -> GrElem {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a + b) % self.modulus)
            .collect()
    }

    pub fn sub(&self, x: &[u64], y: &[u64]) -> GrElem {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a + self.modulus - b) % self.modulus)
            .collect()
    }

    pub fn neg(&self, x: &[u64]) -> GrElem {
        x.iter()
            .map(|a| (self.modulus - a) % self.modulus)
            .collect()
    }

    pub fn scale(&self, c: u64, x: &[u64]) -> GrElem {
        let c = (c % self.modulus) as u128;
        x.iter()
            .map(|&a| ((a as u128 * c) % self.modulus as u128) as u64)
            .collect()
    }

    pub fn mul(&self, x: &[u64], y: &[u64]) -> GrElem {
        let m = self.modulus as u128;
        let mut prod = vec![0u128; 2 * self.d - 1];
        for (i, &a) in x.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in y.iter().enumerate() {
                prod[i + j] = (prod[i + j] + a as u128 * b as u128) % m;
            }
        }
        // reduce by the monic g from the top down
        for top in (self.d..prod.len()).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for (t, &gc) in self.g[..self.d].iter().enumerate() {
                let idx = top - self.d + t;
                prod[idx] = (prod[idx] + m - (c * gc as u128) % m) % m;
            }
        }
        prod[..self.d].iter().map(|&c| c as u64).collect()
    }

    pub fn pow(&self, x: &[u64], mut e: u64) -> GrElem {
        let mut base = x.to_vec();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn is_zero(&self, x: &[u64]) -> bool {
        x.iter().all(|&c| c == 0)
    }

    /// Largest `v <= k` with `x ∈ p^v·GR`.
    pub fn valuation(&self, x: &[u64]) -> u32 {
        x.iter()
            .map(|&c| valuation_u64(self.p, c, self.k))
            .min()
            .unwrap_or(self.k)
    }

    /// Reduction mod `p` as an `F_p`-vector of length `d`.
    pub fn residue(&self, x: &[u64]) -> Vec<u64> {
        x.iter().map(|&c| c % self.p).collect()
    }
}

fn valuation_u64(p: u64, mut c: u64, cap: u32) -> u32 {
    if c == 0 {
        return cap;
    }
    let mut v = 0;
    while c.is_multiple_of(p) && v < cap {
        c /= p;
        v += 1;
    }
    v
}

fn first_irreducible(p: u64, d: usize) -> Vec<u64> {
    if d == 1 {
        return vec![0, 1];
    }
    let count = p.pow(d as u32);
    for idx in 0..count {
        let mut g: Vec<u64> = (0..d).map(|t| (idx / p.pow(t as u32)) % p).collect();
        g.push(1);
        if g[0] != 0 && irreducible_mod_p(p, &g) {
            return g;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// No monic factor of degree `1..=deg/2`, by trial division.
fn irreducible_mod_p(p: u64, g: &[u64]) -> bool {
    let deg = g.len() - 1;
    for fd in 1..=deg / 2 {
        for idx in 0..p.pow(fd as u32) {
            let mut f: Vec<u64> = (0..fd).map(|t| (idx / p.pow(t as u32)) % p).collect();
            f.push(1);
            if poly_rem_mod_p(p, g, &f).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn poly_rem_mod_p(p: u64, num: &[u64], den: &[u64]) -> Vec<u64> {
    let mut r = num.to_vec();
    let dd = den.len() - 1;
    for top in (dd..r.len()).rev() {
        let c = r[top] % p;
        if c == 0 {
            continue;
        }
        for (t, &dc) in den.iter().enumerate() {
            let idx = top - dd + t;
            r[idx] = (r[idx] + p * p - (c * dc) % p) % p;
        }
    }
    r.truncate(dd);
    r
}
