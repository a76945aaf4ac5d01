//! Exact arithmetic for the q-series appearing in the measure formulas.
//!
//! Finite factors stay exact: big rationals, or elements `a + b√q` of the
//! real quadratic field when a half-integer power of `q` shows up. Only the
//! genuinely infinite products become [`CertValue`] enclosures, and those are
//! rounded outward so the enclosed real is never lost.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QError {
    #[error("invalid base q = {0}, need q >= 2")]
    InvalidBase(u64),
    #[error("tolerance must be positive")]
    NonPositiveTolerance,
    #[error("exponent offset {0} must be a positive half-integer")]
    BadOffset(String),
    #[error("sign and power must be +1 or -1")]
    BadSign,
    #[error("division by zero")]
    DivisionByZero,
    #[error("could not reach the requested tolerance")]
    Precision,
}

/// `10^{-12}`, the tolerance used when callers do not ask for one.
pub fn default_tol() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(10u32).pow(12))
}

pub fn int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// `q^e` for any integer `e`.
pub fn q_pow(q: u64, e: i64) -> Rational {
    let m = BigInt::from(q).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rational::from_integer(m)
    } else {
        Rational::new(BigInt::one(), m)
    }
}

pub fn binom2(n: i64) -> i64 {
    n * (n - 1) / 2
}

fn check_base(q: u64) -> Result<(), QError> {
    if q < 2 {
        Err(QError::InvalidBase(q))
    } else {
        Ok(())
    }
}

fn check_tol(tol: &Rational) -> Result<(), QError> {
    if tol.is_positive() {
        Ok(())
    } else {
        Err(QError::NonPositiveTolerance)
    }
}

/// `η_q(k) = ∏_{i=1}^k (1 - q^{-i})`.
pub fn eta(q: u64, k: u64) -> Result<Rational, QError> {
    check_base(q)?;
    Ok(pochhammer(q, k))
}

pub(crate) fn pochhammer(q: u64, k: u64) -> Rational {
    let qb = BigInt::from(q);
    let mut num = BigInt::one();
    let mut qi = BigInt::one();
    for _ in 0..k {
        qi *= &qb;
        num *= &qi - 1u32;
    }
    Rational::new(num, qb.pow((k * (k + 1) / 2) as u32))
}

/// Gaussian binomial `η(n)/(η(k)η(n-k))`, zero outside `0 <= k <= n`.
pub fn qbinom(q: u64, n: u64, k: i64) -> Result<Rational, QError> {
    check_base(q)?;
    Ok(gauss_binom(q, n, k))
}

pub(crate) fn gauss_binom(q: u64, n: u64, k: i64) -> Rational {
    if k < 0 || k as u64 > n {
        return Rational::zero();
    }
    let k = k as u64;
    pochhammer(q, n) / (pochhammer(q, k) * pochhammer(q, n - k))
}

fn is_square(q: u64) -> Option<u64> {
    let s = q.sqrt();
    (s * s == q).then_some(s)
}

/// `a + b√q` with rational `a`, `b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QNum {
    base: u64,
    a: Rational,
    b: Rational,
}

impl QNum {
    pub fn new(base: u64, a: Rational, b: Rational) -> Self {
        match is_square(base) {
            Some(s) if !b.is_zero() => QNum {
                base,
                a: a + b * int(s),
                b: Rational::zero(),
            },
            _ => QNum { base, a, b },
        }
    }

    pub fn from_rational(base: u64, a: Rational) -> Self {
        QNum {
            base,
            a,
            b: Rational::zero(),
        }
    }

    pub fn zero(base: u64) -> Self {
        Self::from_rational(base, Rational::zero())
    }

    pub fn one(base: u64) -> Self {
        Self::from_rational(base, Rational::one())
    }

    /// `q^{twice/2}`.
    pub fn q_half_pow(base: u64, twice: i64) -> Self {
        if twice.rem_euclid(2) == 0 {
            Self::from_rational(base, q_pow(base, twice / 2))
        } else {
            Self::new(base, Rational::zero(), q_pow(base, (twice - 1) / 2))
        }
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn a(&self) -> &Rational {
        &self.a
    }

    pub fn b(&self) -> &Rational {
        &self.b
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn to_rational(&self) -> Option<Rational> {
        self.b.is_zero().then(|| self.a.clone())
    }

    /// Field norm `a² - b²q`.
    pub fn norm(&self) -> Rational {
        &self.a * &self.a - &self.b * &self.b * int(self.base)
    }

    pub fn inv(&self) -> Result<QNum, QError> {
        let n = self.norm();
        if n.is_zero() {
            return Err(QError::DivisionByZero);
        }
        Ok(QNum {
            base: self.base,
            a: &self.a / &n,
            b: -&self.b / &n,
        })
    }

    pub fn pow(&self, e: u32) -> QNum {
        let mut acc = QNum::one(self.base);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.a);
        let sb = sign_of(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return sb;
        }
        let a2 = &self.a * &self.a;
        let b2q = &self.b * &self.b * int(self.base);
        match a2.cmp(&b2q) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn scale(&self, r: &Rational) -> QNum {
        QNum {
            base: self.base,
            a: &self.a * r,
            b: &self.b * r,
        }
    }

    /// Enclosure using `√q` to `bits` binary places.
    pub fn enclose(&self, bits: u64) -> CertValue {
        if self.b.is_zero() {
            return CertValue::point(self.a.clone());
        }
        let (slo, shi) = sqrt_bounds(self.base, bits);
        let x = &self.b * slo;
        let y = &self.b * shi;
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        CertValue {
            lo: &self.a + lo,
            hi: &self.a + hi,
        }
    }

    pub fn to_cert(&self, tol: &Rational) -> CertValue {
        if self.b.is_zero() {
            return CertValue::point(self.a.clone());
        }
        let bits = bits_for(&(tol / self.b.abs())) + 2;
        self.enclose(bits)
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN)
            + self.b.to_f64().unwrap_or(f64::NAN) * (self.base as f64).sqrt()
    }
}

fn sign_of(x: &Rational) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Rational bounds `lo <= √q <= hi` with `hi - lo <= 2^{-bits}`.
fn sqrt_bounds(q: u64, bits: u64) -> (Rational, Rational) {
    let scaled = BigUint::from(q) << (2 * bits);
    let s = scaled.sqrt();
    let den = BigInt::one() << bits;
    let exact = &s * &s == scaled;
    let lo = Rational::new(BigInt::from(s.clone()), den.clone());
    let hi = if exact {
        lo.clone()
    } else {
        Rational::new(BigInt::from(s) + 1u32, den)
    };
    (lo, hi)
}

/// Smallest `b` with `2^{-b} <= tol` (roughly), for positive `tol`.
pub(crate) fn bits_for(tol: &Rational) -> u64 {
    let n = tol.numer().bits() as i64;
    let d = tol.denom().bits() as i64;
    (d - n + 2).max(1) as u64
}

impl fmt::Display for QNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "{}*sqrt({})", self.b, self.base),
            (false, false) => write!(f, "{} + {}*sqrt({})", self.a, self.b, self.base),
        }
    }
}

macro_rules! qnum_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&QNum> for &QNum {
            type Output = QNum;
            fn $m(self, rhs: &QNum) -> QNum {
                assert_eq!(self.base, rhs.base, "QNum bases differ");
                let f: fn(&QNum, &QNum) -> QNum = $body;
                f(self, rhs)
            }
        }
        impl $tr<QNum> for QNum {
            type Output = QNum;
            fn $m(self, rhs: QNum) -> QNum {
                (&self).$m(&rhs)
            }
        }
    };
}

qnum_binop!(Add, add, |x, y| QNum {
    base: x.base,
    a: &x.a + &y.a,
    b: &x.b + &y.b
});
qnum_binop!(Sub, sub, |x, y| QNum {
    base: x.base,
    a: &x.a - &y.a,
    b: &x.b - &y.b
});
qnum_binop!(Mul, mul, |x, y| {
    let q = int(x.base);
    QNum {
        base: x.base,
        a: &x.a * &y.a + &x.b * &y.b * q,
        b: &x.a * &y.b + &x.b * &y.a,
    }
});

impl Neg for QNum {
    type Output = QNum;
    fn neg(self) -> QNum {
        QNum {
            base: self.base,
            a: -self.a,
            b: -self.b,
        }
    }
}

/// A real number known to lie in `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertValue {
    lo: Rational,
    hi: Rational,
}

impl CertValue {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "empty interval");
        CertValue { lo, hi }
    }

    pub fn point(x: Rational) -> Self {
        CertValue {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn one() -> Self {
        Self::point(Rational::one())
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_exact_zero(&self) -> bool {
        self.lo.is_zero() && self.hi.is_zero()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn is_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo.is_positive() || self.hi.is_negative()
    }

    pub fn overlaps(&self, other: &CertValue) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn scale(&self, r: &Rational) -> CertValue {
        let x = &self.lo * r;
        let y = &self.hi * r;
        if x <= y {
            CertValue { lo: x, hi: y }
        } else {
            CertValue { lo: y, hi: x }
        }
    }

    pub fn recip(&self) -> Result<CertValue, QError> {
        if !self.excludes_zero() {
            return Err(QError::DivisionByZero);
        }
        Ok(CertValue {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        })
    }

    /// Snap endpoints outward onto the grid `2^{-bits}·Z`.
    pub fn round_outward(&self, bits: u64) -> CertValue {
        let scale = int(BigInt::one() << bits);
        let lo = (&self.lo * &scale).floor() / &scale;
        let hi = (&self.hi * &scale).ceil() / &scale;
        CertValue { lo, hi }
    }

    pub fn to_f64(&self) -> f64 {
        self.midpoint().to_f64().unwrap_or(f64::NAN)
    }

    /// Midpoint printed with at most `max_sig` significant digits, fewer if
    /// the enclosure is too wide to vouch for them.
    pub fn to_decimal(&self, max_sig: usize) -> String {
        if self.is_exact_zero() {
            return "0".into();
        }
        let mid = self.midpoint();
        let w = self.width();
        if mid.is_zero() {
            return format_decimal(&mid, 1, Rounding::Nearest);
        }
        let e = decimal_exponent(&mid.abs());
        for sig in (1..=max_sig.max(1)).rev() {
            let ulp = pow10(e - sig as i64 + 1);
            if w < ulp {
                return format_decimal(&mid, sig, Rounding::Nearest);
            }
        }
        format_decimal(&mid, 1, Rounding::Nearest)
    }
}

impl fmt::Display for CertValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}]",
            format_decimal(&self.lo, 20, Rounding::Down),
            format_decimal(&self.hi, 20, Rounding::Up)
        )
    }
}

impl Serialize for CertValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CertValue", 2)?;
        st.serialize_field("lo", &format_decimal(&self.lo, 20, Rounding::Down))?;
        st.serialize_field("hi", &format_decimal(&self.hi, 20, Rounding::Up))?;
        st.end()
    }
}

impl Add<&CertValue> for &CertValue {
    type Output = CertValue;
    fn add(self, rhs: &CertValue) -> CertValue {
        CertValue {
            lo: &self.lo + &rhs.lo,
            hi: &self.hi + &rhs.hi,
        }
    }
}

impl Sub<&CertValue> for &CertValue {
    type Output = CertValue;
    fn sub(self, rhs: &CertValue) -> CertValue {
        CertValue {
            lo: &self.lo - &rhs.hi,
            hi: &self.hi - &rhs.lo,
        }
    }
}

impl Mul<&CertValue> for &CertValue {
    type Output = CertValue;
    fn mul(self, rhs: &CertValue) -> CertValue {
        if self.is_point() {
            return rhs.scale(&self.lo);
        }
        if rhs.is_point() {
            return self.scale(&rhs.lo);
        }
        let c = [
            &self.lo * &rhs.lo,
            &self.lo * &rhs.hi,
            &self.hi * &rhs.lo,
            &self.hi * &rhs.hi,
        ];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        CertValue { lo, hi }
    }
}

impl Neg for &CertValue {
    type Output = CertValue;
    fn neg(self) -> CertValue {
        CertValue {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }
}

/// `∏_{ℓ≥0} (1 + sign·q^{-a-ℓ})^{power}` for a positive half-integer `a`.
pub fn inf_product(
    q: u64,
    a: &Rational,
    sign: i8,
    power: i8,
    tol: &Rational,
) -> Result<CertValue, QError> {
    check_base(q)?;
    check_tol(tol)?;
    if !(sign == 1 || sign == -1) || !(power == 1 || power == -1) {
        return Err(QError::BadSign);
    }
    let twice = a * int(2);
    if !twice.is_integer() || !a.is_positive() {
        return Err(QError::BadOffset(a.to_string()));
    }
    let twice_a = twice
        .to_integer()
        .to_i64()
        .ok_or_else(|| QError::BadOffset(a.to_string()))?;
    let base_bits = bits_for(tol) + 8;
    let tail_target = tol / int(16);
    let geometric = Rational::new(BigInt::from(q), BigInt::from(q - 1));
    for attempt in 0..8u64 {
        let bits = base_bits + 16 * attempt;
        let mut prod = CertValue::one();
        let mut l: i64 = 0;
        let tail_sum = loop {
            let x = QNum::q_half_pow(q, -(twice_a + 2 * l)).enclose(bits + 8);
            let s_hi = &x.hi * &geometric;
            if s_hi <= tail_target && s_hi < frac(1, 2) {
                break s_hi;
            }
            let factor = if sign > 0 {
                &CertValue::one() + &x
            } else {
                &CertValue::one() - &x
            };
            prod = (&prod * &factor).round_outward(bits + 8);
            l += 1;
        };
        let tail = if sign > 0 {
            CertValue::new(Rational::one(), (Rational::one() - &tail_sum).recip())
        } else {
            CertValue::new(Rational::one() - &tail_sum, Rational::one())
        };
        let mut out = &prod * &tail;
        if power < 0 {
            out = out.recip()?;
        }
        let out = out.round_outward(bits);
        if &out.width() <= tol {
            return Ok(out);
        }
    }
    Err(QError::Precision)
}

/// `η_q(∞) = ∏_{i≥1}(1 - q^{-i})`.
pub fn eta_inf(q: u64, tol: &Rational) -> Result<CertValue, QError> {
    inf_product(q, &Rational::one(), -1, 1, tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    Down,
    Up,
    Nearest,
}

fn pow10(e: i64) -> Rational {
    q_pow(10, e)
}

/// `floor(log10 x)` for positive `x`.
fn decimal_exponent(x: &Rational) -> i64 {
    let approx = (x.numer().bits() as f64 - x.denom().bits() as f64) * std::f64::consts::LOG10_2;
    let mut e = approx.floor() as i64;
    while &pow10(e) > x {
        e -= 1;
    }
    while &pow10(e + 1) <= x {
        e += 1;
    }
    e
}

/// Decimal string with `sig` significant digits, rounded as requested
/// (`Down` is toward -∞, `Up` toward +∞).
pub fn format_decimal(x: &Rational, sig: usize, mode: Rounding) -> String {
    if x.is_zero() {
        return "0".into();
    }
    let sig = sig.max(1) as i64;
    let neg = x.is_negative();
    let ax = x.abs();
    let e = decimal_exponent(&ax);
    let shift = sig - 1 - e;
    let scaled = &ax * pow10(shift);
    let toward_larger_magnitude = match mode {
        Rounding::Up => Some(!neg),
        Rounding::Down => Some(neg),
        Rounding::Nearest => None,
    };
    let digits: BigInt = match toward_larger_magnitude {
        Some(true) => scaled.ceil().to_integer(),
        Some(false) => scaled.floor().to_integer(),
        None => scaled.round().to_integer(),
    };
    let s = digits.to_str_radix(10);
    let body = if !(-9..=20).contains(&e) {
        let exp = s.len() as i64 - 1 - shift;
        let mant = if s.len() > 1 {
            trim_fraction(format!("{}.{}", &s[..1], &s[1..]))
        } else {
            s.clone()
        };
        format!("{mant}e{exp}")
    } else if shift <= 0 {
        format!("{}{}", s, "0".repeat((-shift) as usize))
    } else if shift as usize >= s.len() {
        trim_fraction(format!("0.{}{}", "0".repeat(shift as usize - s.len()), s))
    } else {
        let cut = s.len() - shift as usize;
        trim_fraction(format!("{}.{}", &s[..cut], &s[cut..]))
    };
    if neg && digits.sign() != Sign::NoSign {
        format!("-{body}")
    } else {
        body
    }
}

fn trim_fraction(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}
