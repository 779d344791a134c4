//! Ramified Witt vectors of length two, `W_1(A) = A x A` with the pi-twisted laws.

use std::fmt;

use thiserror::Error;

use crate::base_ring::{BaseRingError, Fp};
use crate::poly::{MvPoly, PiCoeff};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WittError {
    #[error("Witt vectors live over different coefficient rings")]
    ContextMismatch,
    #[error(transparent)]
    Base(#[from] BaseRingError),
}

/// Rings that are algebras over the base, enough to carry Witt vector arithmetic.
pub trait PiAlgebra: Clone + PartialEq + fmt::Debug {
    fn q(&self) -> u64;
    fn p(&self) -> u64;
    fn compatible(&self, o: &Self) -> bool;
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn scale_int(&self, k: i128) -> Self;
    fn mul_pi(&self) -> Self;
    fn mul_p_over_pi(&self) -> Self;

    fn power(&self, k: u64) -> Self {
        let mut acc = self.one_like();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.times(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.times(&base);
            }
        }
        acc
    }
}

impl<C: PiCoeff> PiAlgebra for C {
    fn q(&self) -> u64 {
        C::q(&self.ctx())
    }
    fn p(&self) -> u64 {
        C::p(&self.ctx())
    }
    fn compatible(&self, o: &Self) -> bool {
        self.ctx() == o.ctx()
    }
    fn zero_like(&self) -> Self {
        self.czero()
    }
    fn one_like(&self) -> Self {
        self.cone()
    }
    fn plus(&self, o: &Self) -> Self {
        self.cadd(o)
    }
    fn minus(&self, o: &Self) -> Self {
        self.csub(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.cmul(o)
    }
    fn scale_int(&self, k: i128) -> Self {
        let ctx = self.ctx();
        let k = i64::try_from(k).expect("integer scalar out of range");
        self.cmul(&C::from_int(&ctx, k))
    }
    fn mul_pi(&self) -> Self {
        self.cmul(&C::pi(&self.ctx()))
    }
    fn mul_p_over_pi(&self) -> Self {
        PiCoeff::mul_p_over_pi(self, 1)
    }
    fn power(&self, k: u64) -> Self {
        self.cpow(k)
    }
}

impl<C: PiCoeff> PiAlgebra for MvPoly<C> {
    fn q(&self) -> u64 {
        C::q(self.ctx())
    }
    fn p(&self) -> u64 {
        C::p(self.ctx())
    }
    fn compatible(&self, o: &Self) -> bool {
        self.ctx() == o.ctx() && self.check_vars(o).is_ok()
    }
    fn zero_like(&self) -> Self {
        MvPoly::zero(self.ctx(), self.vars())
    }
    fn one_like(&self) -> Self {
        MvPoly::one(self.ctx(), self.vars())
    }
    fn plus(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn minus(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn times(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn scale_int(&self, k: i128) -> Self {
        let k = i64::try_from(k).expect("integer scalar out of range");
        self.scale(&C::from_int(self.ctx(), k))
    }
    fn mul_pi(&self) -> Self {
        self.scale(&C::pi(self.ctx()))
    }
    fn mul_p_over_pi(&self) -> Self {
        self.map_coeffs(self.ctx(), |c| PiCoeff::mul_p_over_pi(c, 1))
    }
    fn power(&self, k: u64) -> Self {
        self.pow(k)
    }
}

/// `binom(n, k)` exactly, for `n <= 128`.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The carry `(a^q + b^q - (a + b)^q) / pi = -sum_{0<j<q} (binom(q,j)/pi) a^{q-j} b^j`.
pub fn carry<A: PiAlgebra>(a: &A, b: &A) -> A {
    let q = a.q();
    let p = a.p() as u128;
    // a^{q-j} for j = q-1 down to 1 and b^j for j = 1..q-1
    let mut apow = vec![a.one_like(); q as usize];
    for i in 1..q as usize {
        apow[i] = apow[i - 1].times(a);
    }
    let mut sum = a.zero_like();
    let mut bj = a.one_like();
    for j in 1..q {
        bj = bj.times(b);
        let c = binomial(q, j);
        debug_assert_eq!(c % p, 0);
        let k = (c / p) as i128;
        sum = sum.plus(&apow[(q - j) as usize].times(&bj).scale_int(k));
    }
    sum.mul_p_over_pi().scale_int(-1)
}

#[derive(Clone, PartialEq)]
pub struct WittVec<A: PiAlgebra> {
    pub a0: A,
    pub a1: A,
}

impl<A: PiAlgebra> fmt::Debug for WittVec<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.a0, self.a1)
    }
}

impl<A: PiAlgebra + fmt::Display> fmt::Display for WittVec<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a0, self.a1)
    }
}

impl<A: PiAlgebra> WittVec<A> {
    pub fn new(a0: A, a1: A) -> Self {
        Self { a0, a1 }
    }

    pub fn zero(like: &A) -> Self {
        Self::new(like.zero_like(), like.zero_like())
    }

    pub fn one(like: &A) -> Self {
        Self::new(like.one_like(), like.zero_like())
    }

    fn check(&self, o: &Self) -> Result<(), WittError> {
        if self.a0.compatible(&o.a0) && self.a1.compatible(&o.a1) && self.a0.compatible(&self.a1) {
            Ok(())
        } else {
            Err(WittError::ContextMismatch)
        }
    }

    pub fn witt_add(&self, o: &Self) -> Result<Self, WittError> {
        self.check(o)?;
        let a0 = self.a0.plus(&o.a0);
        let a1 = self.a1.plus(&o.a1).plus(&carry(&self.a0, &o.a0));
        Ok(Self::new(a0, a1))
    }

    pub fn witt_mul(&self, o: &Self) -> Result<Self, WittError> {
        self.check(o)?;
        let q = self.a0.q();
        let a0 = self.a0.times(&o.a0);
        let a1 = self
            .a1
            .times(&o.a0.power(q))
            .plus(&o.a1.times(&self.a0.power(q)))
            .plus(&self.a1.times(&o.a1).mul_pi());
        Ok(Self::new(a0, a1))
    }

    /// `(a0, a0^q + pi a1)`.
    pub fn ghost(&self) -> (A, A) {
        let q = self.a0.q();
        (self.a0.clone(), self.a0.power(q).plus(&self.a1.mul_pi()))
    }
}

/// `x -> (g(x), delta(x))`.
pub fn hom_from_delta<'a, A, B>(
    g: impl Fn(&A) -> B + 'a,
    delta: impl Fn(&A) -> B + 'a,
) -> impl Fn(&A) -> WittVec<B> + 'a
where
    B: PiAlgebra,
{
    move |x| WittVec::new(g(x), delta(x))
}

/// Checks that `x -> (g(x), delta(x))` respects `+`, `*`, `0` and `1` on all pairs of samples.
pub fn is_pi_derivation<A: PiAlgebra, B: PiAlgebra>(
    samples: &[A],
    g: impl Fn(&A) -> B,
    delta: impl Fn(&A) -> B,
) -> bool {
    let Some(first) = samples.first() else {
        return true;
    };
    let f = hom_from_delta(&g, &delta);
    let like = g(first);
    if f(&first.zero_like()) != WittVec::zero(&like) || f(&first.one_like()) != WittVec::one(&like) {
        return false;
    }
    for x in samples {
        let fx = f(x);
        for y in samples {
            let fy = f(y);
            let sum_ok = fx.witt_add(&fy).map(|s| s == f(&x.plus(y))).unwrap_or(false);
            let prod_ok = fx.witt_mul(&fy).map(|s| s == f(&x.times(y))).unwrap_or(false);
            if !sum_ok || !prod_ok {
                return false;
            }
        }
    }
    true
}

/// Residue-field elements as an algebra over the base with `pi = 0` and given image of `p / pi`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ResidueElem {
    pub v: Fp,
    pub q: u64,
    pub p_over_pi: Fp,
}

impl PiAlgebra for ResidueElem {
    fn q(&self) -> u64 {
        self.q
    }
    fn p(&self) -> u64 {
        self.v.modulus() as u64
    }
    fn compatible(&self, o: &Self) -> bool {
        self.q == o.q && self.p_over_pi == o.p_over_pi
    }
    fn zero_like(&self) -> Self {
        Self { v: Fp::new(0, self.v.modulus()), ..*self }
    }
    fn one_like(&self) -> Self {
        Self { v: Fp::new(1, self.v.modulus()), ..*self }
    }
    fn plus(&self, o: &Self) -> Self {
        Self { v: self.v + o.v, ..*self }
    }
    fn minus(&self, o: &Self) -> Self {
        Self { v: self.v - o.v, ..*self }
    }
    fn times(&self, o: &Self) -> Self {
        Self { v: self.v * o.v, ..*self }
    }
    fn scale_int(&self, k: i128) -> Self {
        let p = self.v.modulus();
        Self { v: self.v * Fp::new(k.rem_euclid(p as i128) as u64, p), ..*self }
    }
    fn mul_pi(&self) -> Self {
        self.zero_like()
    }
    fn mul_p_over_pi(&self) -> Self {
        Self { v: self.v * self.p_over_pi, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_ring::{BaseElem, BaseRingSpec, IntCtx, Integer};
    use std::sync::Arc;

    fn int(ctx: IntCtx, n: i64) -> Integer {
        Integer::new(ctx, n)
    }

    fn wi(ctx: IntCtx, a: i64, b: i64) -> WittVec<Integer> {
        WittVec::new(int(ctx, a), int(ctx, b))
    }

    #[test]
    fn worked_values_p2() {
        let c = IntCtx::new(2, 1).unwrap();
        assert_eq!(wi(c, 1, 0).witt_add(&wi(c, 1, 0)).unwrap(), wi(c, 2, -1));
        assert_eq!(wi(c, 1, 1).witt_mul(&wi(c, 1, 1)).unwrap(), wi(c, 1, 4));
        assert_eq!(wi(c, 1, 1).ghost(), (int(c, 1), int(c, 3)));
    }

    #[test]
    fn worked_sum_p3_agrees_with_ghost() {
        let c = IntCtx::new(3, 1).unwrap();
        let s = wi(c, 1, 0).witt_add(&wi(c, 2, 0)).unwrap();
        assert_eq!(s, wi(c, 3, -6));
        assert_eq!(s.ghost().1, int(c, 9));
    }

    #[test]
    fn identities() {
        let spec = BaseRingSpec::new(3, vec![-3, 0, 1], 4, 1).unwrap();
        let x = BaseElem::from_int(&spec, 7);
        let v = WittVec::new(x.clone(), BaseElem::pi(&spec));
        assert_eq!(WittVec::zero(&x).witt_add(&v).unwrap(), v);
        assert_eq!(WittVec::one(&x).witt_mul(&v).unwrap(), v);
        assert_eq!(WittVec::zero(&x).witt_mul(&v).unwrap(), WittVec::zero(&x));
        assert_eq!(v.witt_add(&WittVec::zero(&x)).unwrap().ghost().0, x);
    }

    #[test]
    fn mismatch_is_reported() {
        let a = BaseRingSpec::unramified(3, 4).unwrap();
        let b = BaseRingSpec::unramified(5, 4).unwrap();
        let u = WittVec::one(&BaseElem::one(&a));
        let v = WittVec::one(&BaseElem::one(&b));
        assert_eq!(u.witt_add(&v), Err(WittError::ContextMismatch));
    }

    fn exhaustive(spec: &Arc<BaseRingSpec>) -> Vec<BaseElem> {
        let m = spec.p().pow(spec.precision()) as i64;
        (0..m).map(|n| BaseElem::from_int(spec, n)).collect()
    }

    #[test]
    fn fermat_quotient_is_a_pi_derivation() {
        let spec = BaseRingSpec::unramified(2, 4).unwrap();
        let samples = exhaustive(&spec);
        assert!(is_pi_derivation(&samples, |x| x.truncate(3), |x| x.base_delta().unwrap()));
        assert!(!is_pi_derivation(&samples, |x| x.truncate(3), |x| BaseElem::zero(x.spec()).truncate(3)));
    }

    #[test]
    fn base_delta_is_a_pi_derivation_when_ramified() {
        let spec = BaseRingSpec::new(3, vec![-3, 0, 1], 4, 1).unwrap();
        let pi = BaseElem::pi(&spec);
        let mut samples = Vec::new();
        for a in 0..9 {
            for b in 0..9 {
                samples.push(&BaseElem::from_int(&spec, a) + &(&pi * &BaseElem::from_int(&spec, b)));
            }
        }
        assert!(is_pi_derivation(&samples, |x| x.truncate(3), |x| x.base_delta().unwrap()));
    }

    #[test]
    fn residue_field_witt_vectors() {
        // over F_3 with e = 1, p / pi = 1
        let mk = |a: u64| ResidueElem { v: Fp::new(a, 3), q: 3, p_over_pi: Fp::new(1, 3) };
        let s = WittVec::new(mk(1), mk(0)).witt_add(&WittVec::new(mk(2), mk(0))).unwrap();
        assert_eq!(s, WittVec::new(mk(0), mk(0)));
    }
}
