//! The local base ring `R = Z_p[pi]` truncated at `pi^N`, and its residue field.
//!
//! An element is stored as `c_0 + c_1 pi + ... + c_{e-1} pi^{e-1}` with integer
//! digits. Because the Eisenstein relation makes the valuations of the summands
//! pairwise distinct modulo `e`, the ideal `pi^n R` is exactly the set of elements
//! with `c_i = 0 mod p^ceil((n - i) / e)` for every `i`. Canonical form reduces each
//! digit into `[0, p^ceil((n - i) / e))`, so equality is digitwise.
//!
//! Every element carries its own precision `n <= N`. Division by `pi` lowers the
//! precision by one; binary operations return the smaller of the two precisions.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaseRingError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("defining polynomial is not Eisenstein at p = {p}: {reason}")]
    NotEisenstein { p: u64, reason: String },
    #[error("precision {0} is too small (at least 2 is required)")]
    PrecisionTooSmall(u32),
    #[error("frobenius power must be positive")]
    BadFrobPower,
    #[error("p^{exp} does not fit the 62-bit digit representation")]
    Overflow { exp: u32 },
    #[error("element is not divisible by pi")]
    NotDivisible,
    #[error("precision exhausted: cannot divide an element known mod pi^{0} by pi")]
    PrecisionExhausted(u32),
    #[error("cannot reduce to pi^{requested}: element is only known mod pi^{available}")]
    PrecisionExceeded { requested: u32, available: u32 },
    #[error("elements belong to different base rings")]
    SpecMismatch,
    #[error("element is not a unit")]
    NotUnit,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Serialized form of a base ring, e.g. `{"p":2,"eisenstein":[-2,0,1],"precision":4,"frob_power":1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseRingConfig {
    pub p: u64,
    /// Coefficients of the Eisenstein polynomial, constant term first. Defaults to `x - p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eisenstein: Option<Vec<i64>>,
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default = "default_frob_power")]
    pub frob_power: u32,
}

fn default_precision() -> u32 {
    4
}

fn default_frob_power() -> u32 {
    1
}

impl BaseRingConfig {
    pub fn unramified(p: u64) -> Self {
        Self { p, eisenstein: None, precision: default_precision(), frob_power: 1 }
    }

    pub fn build(&self) -> Result<Arc<BaseRingSpec>, BaseRingError> {
        let eis = self.eisenstein.clone().unwrap_or_else(|| vec![-(self.p as i64), 1]);
        BaseRingSpec::new(self.p, eis, self.precision, self.frob_power)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseRingSpec {
    p: u64,
    eisenstein: Vec<i64>,
    e: usize,
    precision: u32,
    frob_power: u32,
    q: u64,
    /// `p^k` for `k = 0..=ceil(N/e)`.
    p_pow: Vec<i64>,
    /// Digits of the exact element `p / pi`.
    p_over_pi: Vec<i64>,
}

impl BaseRingSpec {
    pub fn new(p: u64, eisenstein: Vec<i64>, precision: u32, frob_power: u32) -> Result<Arc<Self>, BaseRingError> {
        if !is_prime(p) {
            return Err(BaseRingError::NotPrime(p));
        }
        if precision < 2 {
            return Err(BaseRingError::PrecisionTooSmall(precision));
        }
        if frob_power == 0 {
            return Err(BaseRingError::BadFrobPower);
        }
        let bad = |reason: &str| BaseRingError::NotEisenstein { p, reason: reason.to_string() };
        if eisenstein.len() < 2 {
            return Err(bad("degree must be at least 1"));
        }
        if *eisenstein.last().unwrap() != 1 {
            return Err(bad("polynomial must be monic"));
        }
        let e = eisenstein.len() - 1;
        let pi = p as i64;
        if eisenstein[..e].iter().any(|c| c % pi != 0) {
            return Err(bad("non-leading coefficients must be divisible by p"));
        }
        if eisenstein[0] % (pi * pi) == 0 {
            return Err(bad("constant term must not be divisible by p^2"));
        }
        let kmax = (precision as usize).div_ceil(e) as u32;
        let mut p_pow = vec![1i64];
        for k in 1..=kmax {
            let prev = *p_pow.last().unwrap();
            let next = (prev as i128) * (p as i128);
            if next >= (1i128 << 62) {
                return Err(BaseRingError::Overflow { exp: k });
            }
            p_pow.push(next as i64);
        }
        let q = p
            .checked_pow(frob_power)
            .filter(|&q| q <= 128)
            .ok_or(BaseRingError::Overflow { exp: frob_power })?;
        let mut spec = Self { p, eisenstein, e, precision, frob_power, q, p_pow, p_over_pi: Vec::new() };
        // p = pi * (-(pi^{e-1} + a_{e-1} pi^{e-2} + ... + a_1) / u0) where a_0 = p * u0.
        let m = spec.work_modulus();
        let u0 = spec.eisenstein[0] / pi;
        let u0_inv = mod_inverse(u0.rem_euclid(m), m).expect("u0 is a unit mod p");
        let mut digits = vec![0i64; e];
        for i in 1..=e {
            // coefficient of pi^{i-1} in -(sum_{i>=1} a_i pi^{i-1}) / u0
            let a_i = spec.eisenstein[i];
            digits[i - 1] = mulmod(-a_i, u0_inv, m);
        }
        spec.p_over_pi = digits;
        Ok(Arc::new(spec))
    }

    pub fn unramified(p: u64, precision: u32) -> Result<Arc<Self>, BaseRingError> {
        Self::new(p, vec![-(p as i64), 1], precision, 1)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn ram_degree(&self) -> usize {
        self.e
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn frob_power(&self) -> u32 {
        self.frob_power
    }

    pub fn eisenstein(&self) -> &[i64] {
        &self.eisenstein
    }

    pub fn config(&self) -> BaseRingConfig {
        BaseRingConfig {
            p: self.p,
            eisenstein: Some(self.eisenstein.clone()),
            precision: self.precision,
            frob_power: self.frob_power,
        }
    }

    /// Same ring, different `q = p^m`.
    pub fn with_frob_power(&self, m: u32) -> Result<Arc<Self>, BaseRingError> {
        Self::new(self.p, self.eisenstein.clone(), self.precision, m)
    }

    fn work_modulus(&self) -> i64 {
        *self.p_pow.last().unwrap()
    }

    /// Modulus of digit `i` at precision `n`.
    fn digit_modulus(&self, n: u32, i: usize) -> i64 {
        let n = n as usize;
        if n <= i {
            1
        } else {
            self.p_pow[(n - i).div_ceil(self.e)]
        }
    }
}

fn mulmod(a: i64, b: i64, m: i64) -> i64 {
    ((a as i128 * b as i128).rem_euclid(m as i128)) as i64
}

fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let qt = old_r / r;
        (old_r, r) = (r, old_r - qt * r);
        (old_s, s) = (s, old_s - qt * s);
    }
    if old_r != 1 && !(m == 1) {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as i64)
}

/// An element of `R / pi^n` for some `n <= N`.
#[derive(Clone)]
pub struct BaseElem {
    spec: Arc<BaseRingSpec>,
    prec: u32,
    digits: Vec<i64>,
}

impl PartialEq for BaseElem {
    fn eq(&self, other: &Self) -> bool {
        self.prec == other.prec && self.digits == other.digits && same_spec(&self.spec, &other.spec)
    }
}

impl Eq for BaseElem {}

fn same_spec(a: &Arc<BaseRingSpec>, b: &Arc<BaseRingSpec>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl BaseElem {
    fn from_raw(spec: &Arc<BaseRingSpec>, prec: u32, digits: Vec<i64>) -> Self {
        let mut out = Self { spec: spec.clone(), prec, digits };
        out.canonicalize();
        out
    }

    fn canonicalize(&mut self) {
        for i in 0..self.spec.e {
            let m = self.spec.digit_modulus(self.prec, i);
            self.digits[i] = self.digits[i].rem_euclid(m);
        }
    }

    pub fn from_int(spec: &Arc<BaseRingSpec>, n: i64) -> Self {
        let mut digits = vec![0; spec.e];
        digits[0] = n.rem_euclid(spec.work_modulus());
        Self::from_raw(spec, spec.precision, digits)
    }

    /// Builds `sum c_i pi^i` from an arbitrary list of integer coefficients.
    pub fn from_pi_poly(spec: &Arc<BaseRingSpec>, coeffs: &[i64]) -> Self {
        let pi = Self::pi(spec);
        let mut acc = Self::zero(spec);
        for c in coeffs.iter().rev() {
            acc = &(&acc * &pi) + &Self::from_int(spec, *c);
        }
        acc
    }

    pub fn zero(spec: &Arc<BaseRingSpec>) -> Self {
        Self::from_int(spec, 0)
    }

    pub fn one(spec: &Arc<BaseRingSpec>) -> Self {
        Self::from_int(spec, 1)
    }

    pub fn pi(spec: &Arc<BaseRingSpec>) -> Self {
        if spec.e == 1 {
            Self::from_int(spec, spec.p as i64)
        } else {
            let mut digits = vec![0; spec.e];
            digits[1] = 1;
            Self::from_raw(spec, spec.precision, digits)
        }
    }

    /// The exact element `p / pi`.
    pub fn p_over_pi(spec: &Arc<BaseRingSpec>) -> Self {
        Self::from_raw(spec, spec.precision, spec.p_over_pi.clone())
    }

    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn digits(&self) -> &[i64] {
        &self.digits
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(|&d| d == 0)
    }

    /// pi-adic valuation, capped at the precision (so `valuation(0) == prec`).
    pub fn valuation(&self) -> u32 {
        let p = self.spec.p as i64;
        let e = self.spec.e as u32;
        let mut best = self.prec;
        for (i, &d) in self.digits.iter().enumerate() {
            if d == 0 {
                continue;
            }
            let mut v = 0;
            let mut x = d;
            while x % p == 0 {
                x /= p;
                v += 1;
            }
            best = best.min(e * v + i as u32);
        }
        best
    }

    pub fn is_unit(&self) -> bool {
        self.prec > 0 && self.valuation() == 0
    }

    /// Drops to precision `n` (no-op if already coarser).
    pub fn truncate(&self, n: u32) -> Self {
        if n >= self.prec {
            return self.clone();
        }
        Self::from_raw(&self.spec, n, self.digits.clone())
    }

    /// Image in `R_n = R / pi^{n+1}`. `reduce(a, 0)` is the residue class.
    pub fn reduce(&self, n: u32) -> Result<Self, BaseRingError> {
        if n + 1 > self.prec {
            return Err(BaseRingError::PrecisionExceeded { requested: n + 1, available: self.prec });
        }
        Ok(self.truncate(n + 1))
    }

    pub fn residue(&self) -> Fp {
        assert!(self.prec >= 1, "residue of an element with no precision");
        Fp::new(self.digits[0].rem_euclid(self.spec.p as i64) as u64, self.spec.p as u32)
    }

    fn check(&self, other: &Self) -> Result<(), BaseRingError> {
        if same_spec(&self.spec, &other.spec) {
            Ok(())
        } else {
            Err(BaseRingError::SpecMismatch)
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, BaseRingError> {
        self.check(other)?;
        let prec = self.prec.min(other.prec);
        let m = self.spec.work_modulus();
        let digits = self.digits.iter().zip(&other.digits).map(|(a, b)| (a + b) % m).collect();
        Ok(Self::from_raw(&self.spec, prec, digits))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, BaseRingError> {
        self.check(other)?;
        let prec = self.prec.min(other.prec);
        let m = self.spec.work_modulus();
        let digits = self.digits.iter().zip(&other.digits).map(|(a, b)| (a - b) % m).collect();
        Ok(Self::from_raw(&self.spec, prec, digits))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, BaseRingError> {
        self.check(other)?;
        let spec = &self.spec;
        let e = spec.e;
        let m = spec.work_modulus() as i128;
        let prec = self.prec.min(other.prec);
        let mut t = vec![0i128; 2 * e - 1];
        for (i, &a) in self.digits.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.digits.iter().enumerate() {
                t[i + j] = (t[i + j] + a as i128 * b as i128) % m;
            }
        }
        // pi^e = -(a_{e-1} pi^{e-1} + ... + a_0)
        for k in (e..2 * e - 1).rev() {
            let c = t[k];
            if c == 0 {
                continue;
            }
            t[k] = 0;
            for i in 0..e {
                let a_i = spec.eisenstein[i] as i128;
                t[k - e + i] = (t[k - e + i] - c * a_i) % m;
            }
        }
        let digits = t[..e].iter().map(|&x| x as i64).collect();
        Ok(Self::from_raw(spec, prec, digits))
    }

    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.spec).truncate(self.prec);
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Multiplication by an integer scalar.
    pub fn scale(&self, k: i128) -> Self {
        let m = self.spec.work_modulus() as i128;
        let k = k.rem_euclid(m);
        let digits = self.digits.iter().map(|&d| ((d as i128 * k) % m) as i64).collect();
        Self::from_raw(&self.spec, self.prec, digits)
    }

    /// Returns `b` with `pi * b = self`, known modulo `pi^{prec - 1}`.
    pub fn div_pi_exact(&self) -> Result<Self, BaseRingError> {
        if self.prec < 2 {
            return Err(BaseRingError::PrecisionExhausted(self.prec));
        }
        let p = self.spec.p as i64;
        if self.digits[0] % p != 0 {
            return Err(BaseRingError::NotDivisible);
        }
        let e = self.spec.e;
        let mut shifted = vec![0i64; e];
        shifted[..(e - 1)].copy_from_slice(&self.digits[1..e]);
        let head = Self::from_raw(&self.spec, self.prec - 1, shifted);
        let c0_over_p = self.digits[0] / p;
        let tail = Self::p_over_pi(&self.spec).truncate(self.prec - 1).scale(c0_over_p as i128);
        Ok(&head + &tail)
    }

    /// The base Frobenius: the identity on `Z_p` with `phi(pi) = pi`.
    pub fn frobenius(&self) -> Self {
        self.clone()
    }

    /// `(phi(a) - a^q) / pi`, known modulo `pi^{prec - 1}`.
    pub fn base_delta(&self) -> Result<Self, BaseRingError> {
        let diff = &self.frobenius() - &self.pow(self.spec.q);
        diff.div_pi_exact()
    }

    /// Multiplicative inverse of a unit.
    pub fn inverse(&self) -> Result<Self, BaseRingError> {
        if !self.is_unit() {
            return Err(BaseRingError::NotUnit);
        }
        let p = self.spec.p as i64;
        let r0 = mod_inverse(self.digits[0].rem_euclid(p), p).ok_or(BaseRingError::NotUnit)?;
        let mut x = Self::from_int(&self.spec, r0).truncate(self.prec);
        let two = Self::from_int(&self.spec, 2);
        // Newton iteration doubles the number of correct pi-adic digits.
        let mut correct = 1;
        while correct < self.prec {
            x = &x * &(&two - &(self * &x));
            correct *= 2;
        }
        Ok(x)
    }

    /// Symmetric integer representatives of the digits, for display.
    fn balanced_digits(&self) -> Vec<i64> {
        (0..self.spec.e)
            .map(|i| {
                let m = self.spec.digit_modulus(self.prec, i);
                let d = self.digits[i];
                if d > m / 2 {
                    d - m
                } else {
                    d
                }
            })
            .collect()
    }
}

impl fmt::Debug for BaseElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod pi^{})", self, self.prec)
    }
}

impl fmt::Display for BaseElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.balanced_digits();
        let mut parts = Vec::new();
        for (i, &d) in digits.iter().enumerate() {
            if d == 0 {
                continue;
            }
            let s = match (i, d) {
                (0, d) => d.to_string(),
                (1, 1) => "pi".to_string(),
                (1, -1) => "-pi".to_string(),
                (1, d) => format!("{d}*pi"),
                (i, 1) => format!("pi^{i}"),
                (i, -1) => format!("-pi^{i}"),
                (i, d) => format!("{d}*pi^{i}"),
            };
            parts.push(s);
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        let mut out = parts[0].clone();
        for s in &parts[1..] {
            if let Some(rest) = s.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(s);
            }
        }
        write!(f, "{out}")
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $imp:ident, $ty:ty) => {
        impl $tr<&$ty> for &$ty {
            type Output = $ty;
            fn $method(self, rhs: &$ty) -> $ty {
                self.$imp(rhs).expect(concat!(stringify!($method), " on mismatched operands"))
            }
        }
        impl $tr<$ty> for $ty {
            type Output = $ty;
            fn $method(self, rhs: $ty) -> $ty {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, try_add, BaseElem);
forward_binop!(Sub, sub, try_sub, BaseElem);
forward_binop!(Mul, mul, try_mul, BaseElem);

impl Neg for &BaseElem {
    type Output = BaseElem;
    fn neg(self) -> BaseElem {
        let digits = self.digits.iter().map(|d| -d).collect();
        BaseElem::from_raw(&self.spec, self.prec, digits)
    }
}

impl Neg for BaseElem {
    type Output = BaseElem;
    fn neg(self) -> BaseElem {
        -&self
    }
}

/// An element of the prime field `F_p`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp {
    v: u32,
    p: u32,
}

impl Fp {
    pub fn new(v: u64, p: u32) -> Self {
        Self { v: (v % p as u64) as u32, p }
    }

    pub fn from_i64(v: i64, p: u32) -> Self {
        Self { v: v.rem_euclid(p as i64) as u32, p }
    }

    pub fn value(self) -> u32 {
        self.v
    }

    pub fn modulus(self) -> u32 {
        self.p
    }

    pub fn is_zero(self) -> bool {
        self.v == 0
    }

    pub fn pow(self, mut k: u64) -> Self {
        let mut base = self;
        let mut acc = Fp::new(1, self.p);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    pub fn inverse(self) -> Option<Self> {
        if self.v == 0 {
            None
        } else {
            Some(self.pow(self.p as u64 - 2))
        }
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.v, self.p)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // balanced representative reads better in printed polynomials
        if self.v > self.p / 2 {
            write!(f, "-{}", self.p - self.v)
        } else {
            write!(f, "{}", self.v)
        }
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        debug_assert_eq!(self.p, rhs.p);
        let s = self.v + rhs.v;
        Fp { v: if s >= self.p { s - self.p } else { s }, p: self.p }
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        debug_assert_eq!(self.p, rhs.p);
        Fp { v: if self.v >= rhs.v { self.v - rhs.v } else { self.v + self.p - rhs.v }, p: self.p }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        debug_assert_eq!(self.p, rhs.p);
        Fp { v: ((self.v as u64 * rhs.v as u64) % self.p as u64) as u32, p: self.p }
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        Fp { v: if self.v == 0 { 0 } else { self.p - self.v }, p: self.p }
    }
}

/// Parameters of the torsion-free model `Z` with `pi = p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntCtx {
    pub p: u64,
    pub q: u64,
}

impl IntCtx {
    pub fn new(p: u64, frob_power: u32) -> Result<Self, BaseRingError> {
        if !is_prime(p) {
            return Err(BaseRingError::NotPrime(p));
        }
        let q = p.checked_pow(frob_power).filter(|&q| q <= 128).ok_or(BaseRingError::Overflow { exp: frob_power })?;
        Ok(Self { p, q })
    }
}

/// An exact integer, viewed in the unramified torsion-free setting where `pi = p`
/// and the base pi-derivation is the Fermat quotient `(a - a^q) / p`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Integer {
    pub n: BigInt,
    pub ctx: IntCtx,
}

impl Integer {
    pub fn new(ctx: IntCtx, n: impl Into<BigInt>) -> Self {
        Self { n: n.into(), ctx }
    }

    pub fn div_pi_exact(&self) -> Result<Self, BaseRingError> {
        let p = BigInt::from(self.ctx.p);
        if (&self.n % &p).is_zero() {
            Ok(Self::new(self.ctx, &self.n / &p))
        } else {
            Err(BaseRingError::NotDivisible)
        }
    }

    pub fn fermat_quotient(&self) -> Self {
        let diff = &self.n - num_traits::Pow::pow(&self.n, self.ctx.q as u32);
        Self::new(self.ctx, diff / BigInt::from(self.ctx.p))
    }
}

impl fmt::Debug for Integer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n)
    }
}

impl fmt::Display for Integer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.n)
    }
}
