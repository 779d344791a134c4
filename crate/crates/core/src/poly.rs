//! Sparse multivariate polynomials over a coefficient ring, with a small text grammar.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::base_ring::{BaseElem, BaseRingError, BaseRingSpec, Fp, IntCtx, Integer};

/// Coefficient rings usable in [`MvPoly`].
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    type Ctx: Clone + PartialEq + fmt::Debug + Send + Sync;

    fn ctx(&self) -> Self::Ctx;
    fn from_int(ctx: &Self::Ctx, n: i64) -> Self;
    /// The uniformizer, as it should be read by the parser.
    fn pi(ctx: &Self::Ctx) -> Self;
    fn is_zero(&self) -> bool;
    fn cadd(&self, o: &Self) -> Self;
    fn csub(&self, o: &Self) -> Self;
    fn cmul(&self, o: &Self) -> Self;
    fn cneg(&self) -> Self;
    fn inverse(&self) -> Option<Self>;

    /// Zero at the same precision as `self`.
    fn czero(&self) -> Self {
        Self::from_int(&self.ctx(), 0)
    }

    fn cone(&self) -> Self {
        Self::from_int(&self.ctx(), 1)
    }

    fn is_one(&self) -> bool {
        self.csub(&Self::from_int(&self.ctx(), 1)).is_zero()
    }

    fn cpow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::from_int(&self.ctx(), 1);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.cmul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.cmul(&base);
            }
        }
        acc
    }
}

/// Coefficient rings carrying a uniformizer and a pi-derivation.
pub trait PiCoeff: Coeff {
    fn q(ctx: &Self::Ctx) -> u64;
    fn p(ctx: &Self::Ctx) -> u64;
    fn div_pi_exact(&self) -> Result<Self, BaseRingError>;
    /// `k * (p / pi) * self`.
    fn mul_p_over_pi(&self, k: i128) -> Self;
    fn base_delta(&self) -> Result<Self, BaseRingError>;
    fn frobenius(&self) -> Self {
        self.clone()
    }
    /// Precision to which the element is known, `u32::MAX` when exact.
    fn known_precision(&self) -> u32 {
        u32::MAX
    }
    fn truncate_to(&self, _n: u32) -> Self {
        self.clone()
    }
}

impl Coeff for BaseElem {
    type Ctx = Arc<BaseRingSpec>;

    fn ctx(&self) -> Self::Ctx {
        self.spec().clone()
    }
    fn from_int(ctx: &Self::Ctx, n: i64) -> Self {
        BaseElem::from_int(ctx, n)
    }
    fn pi(ctx: &Self::Ctx) -> Self {
        BaseElem::pi(ctx)
    }
    fn is_zero(&self) -> bool {
        BaseElem::is_zero(self)
    }
    fn cadd(&self, o: &Self) -> Self {
        self + o
    }
    fn csub(&self, o: &Self) -> Self {
        self - o
    }
    fn cmul(&self, o: &Self) -> Self {
        self * o
    }
    fn cneg(&self) -> Self {
        -self
    }
    fn inverse(&self) -> Option<Self> {
        BaseElem::inverse(self).ok()
    }
    fn cpow(&self, k: u64) -> Self {
        self.pow(k)
    }
    fn czero(&self) -> Self {
        BaseElem::zero(self.spec()).truncate(self.precision())
    }
    fn cone(&self) -> Self {
        BaseElem::one(self.spec()).truncate(self.precision())
    }
}

impl PiCoeff for BaseElem {
    fn q(ctx: &Self::Ctx) -> u64 {
        ctx.q()
    }
    fn p(ctx: &Self::Ctx) -> u64 {
        ctx.p()
    }
    fn div_pi_exact(&self) -> Result<Self, BaseRingError> {
        BaseElem::div_pi_exact(self)
    }
    fn mul_p_over_pi(&self, k: i128) -> Self {
        (self * &BaseElem::p_over_pi(self.spec())).scale(k)
    }
    fn base_delta(&self) -> Result<Self, BaseRingError> {
        BaseElem::base_delta(self)
    }
    fn known_precision(&self) -> u32 {
        self.precision()
    }
    fn truncate_to(&self, n: u32) -> Self {
        self.truncate(n)
    }
}

impl Coeff for Fp {
    type Ctx = u32;

    fn ctx(&self) -> u32 {
        self.modulus()
    }
    fn from_int(ctx: &u32, n: i64) -> Self {
        Fp::from_i64(n, *ctx)
    }
    fn pi(ctx: &u32) -> Self {
        Fp::new(0, *ctx)
    }
    fn is_zero(&self) -> bool {
        Fp::is_zero(*self)
    }
    fn cadd(&self, o: &Self) -> Self {
        *self + *o
    }
    fn csub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn cmul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn cneg(&self) -> Self {
        -*self
    }
    fn inverse(&self) -> Option<Self> {
        Fp::inverse(*self)
    }
}

impl Coeff for Integer {
    type Ctx = IntCtx;

    fn ctx(&self) -> IntCtx {
        self.ctx
    }
    fn from_int(ctx: &IntCtx, n: i64) -> Self {
        Integer::new(*ctx, n)
    }
    fn pi(ctx: &IntCtx) -> Self {
        Integer::new(*ctx, ctx.p)
    }
    fn is_zero(&self) -> bool {
        self.n.is_zero()
    }
    fn cadd(&self, o: &Self) -> Self {
        Integer::new(self.ctx, &self.n + &o.n)
    }
    fn csub(&self, o: &Self) -> Self {
        Integer::new(self.ctx, &self.n - &o.n)
    }
    fn cmul(&self, o: &Self) -> Self {
        Integer::new(self.ctx, &self.n * &o.n)
    }
    fn cneg(&self) -> Self {
        Integer::new(self.ctx, -&self.n)
    }
    fn inverse(&self) -> Option<Self> {
        if self.n.is_one() || (-&self.n).is_one() {
            Some(self.clone())
        } else {
            None
        }
    }
}

impl PiCoeff for Integer {
    fn q(ctx: &IntCtx) -> u64 {
        ctx.q
    }
    fn p(ctx: &IntCtx) -> u64 {
        ctx.p
    }
    fn div_pi_exact(&self) -> Result<Self, BaseRingError> {
        Integer::div_pi_exact(self)
    }
    fn mul_p_over_pi(&self, k: i128) -> Self {
        Integer::new(self.ctx, &self.n * BigInt::from(k))
    }
    fn base_delta(&self) -> Result<Self, BaseRingError> {
        Ok(self.fermat_quotient())
    }
}

/// Exponent vector. Ordered graded-lexicographically, earlier variables first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Monomial(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn pow(&self, k: u32) -> Self {
        Monomial(self.0.iter().map(|a| a * k).collect())
    }

    pub fn divides(&self, o: &Self) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    /// `o / self`, assuming `self` divides `o`.
    pub fn quotient_of(&self, o: &Self) -> Self {
        Monomial(self.0.iter().zip(&o.0).map(|(a, b)| b - a).collect())
    }

    pub fn coprime(&self, o: &Self) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| *a == 0 || *b == 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&o.degree()).then_with(|| self.0.cmp(&o.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

pub type Vars = Arc<Vec<String>>;

pub fn vars<S: AsRef<str>>(names: &[S]) -> Vars {
    Arc::new(names.iter().map(|s| s.as_ref().to_string()).collect())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("variable mismatch: [{0}] vs [{1}]")]
    VarMismatch(String, String),
    #[error("unknown variable {0}")]
    UnknownVar(String),
}

#[derive(Clone)]
pub struct MvPoly<C: Coeff> {
    ctx: C::Ctx,
    vars: Vars,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> PartialEq for MvPoly<C> {
    fn eq(&self, o: &Self) -> bool {
        same_vars(&self.vars, &o.vars) && self.terms == o.terms
    }
}

fn same_vars(a: &Vars, b: &Vars) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl<C: Coeff> MvPoly<C> {
    pub fn zero(ctx: &C::Ctx, vars: &Vars) -> Self {
        Self { ctx: ctx.clone(), vars: vars.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(ctx: &C::Ctx, vars: &Vars, c: C) -> Self {
        let mut p = Self::zero(ctx, vars);
        p.add_term(Monomial::one(vars.len()), c);
        p
    }

    pub fn from_int(ctx: &C::Ctx, vars: &Vars, n: i64) -> Self {
        Self::constant(ctx, vars, C::from_int(ctx, n))
    }

    pub fn one(ctx: &C::Ctx, vars: &Vars) -> Self {
        Self::from_int(ctx, vars, 1)
    }

    pub fn var(ctx: &C::Ctx, vars: &Vars, i: usize) -> Self {
        Self::monomial(ctx, vars, Monomial::var(vars.len(), i), C::from_int(ctx, 1))
    }

    pub fn var_named(ctx: &C::Ctx, vars: &Vars, name: &str) -> Result<Self, PolyError> {
        let i = vars.iter().position(|v| v == name).ok_or_else(|| PolyError::UnknownVar(name.to_string()))?;
        Ok(Self::var(ctx, vars, i))
    }

    pub fn monomial(ctx: &C::Ctx, vars: &Vars, m: Monomial, c: C) -> Self {
        let mut p = Self::zero(ctx, vars);
        p.add_term(m, c);
        p
    }

    pub fn from_terms(ctx: &C::Ctx, vars: &Vars, terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = Self::zero(ctx, vars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn ctx(&self) -> &C::Ctx {
        &self.ctx
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, C> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<Monomial, C> {
        self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(|| C::from_int(&self.ctx, 0))
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Monomial::one(self.nvars()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_one())
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|m| m.0[i]).max().unwrap_or(0)
    }

    /// Adds `c * m` in place.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        debug_assert_eq!(m.0.len(), self.vars.len());
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().cadd(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn check_vars(&self, o: &Self) -> Result<(), PolyError> {
        if same_vars(&self.vars, &o.vars) {
            Ok(())
        } else {
            Err(PolyError::VarMismatch(self.vars.join(","), o.vars.join(",")))
        }
    }

    fn assert_vars(&self, o: &Self) {
        if let Err(e) = self.check_vars(o) {
            panic!("{e}");
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.assert_vars(o);
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.assert_vars(o);
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.cneg());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self { ctx: self.ctx.clone(), vars: self.vars.clone(), terms: self.terms.iter().map(|(m, c)| (m.clone(), c.cneg())).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.assert_vars(o);
        let mut acc: HashMap<Monomial, C> = HashMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let m = m1.mul(m2);
                let c = c1.cmul(c2);
                match acc.get_mut(&m) {
                    Some(x) => *x = x.cadd(&c),
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        let terms = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        Self { ctx: self.ctx.clone(), vars: self.vars.clone(), terms }
    }

    pub fn scale(&self, c: &C) -> Self {
        let terms = self.terms.iter().map(|(m, x)| (m.clone(), x.cmul(c))).filter(|(_, x)| !x.is_zero()).collect();
        Self { ctx: self.ctx.clone(), vars: self.vars.clone(), terms }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        let terms = self.terms.iter().map(|(t, x)| (t.mul(m), x.clone())).collect();
        Self { ctx: self.ctx.clone(), vars: self.vars.clone(), terms }
    }

    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.ctx, &self.vars);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Formal partial derivative in variable `i`.
    pub fn partial(&self, i: usize) -> Self {
        let mut out = Self::zero(&self.ctx, &self.vars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[i] -= 1;
            out.add_term(m2, c.cmul(&C::from_int(&self.ctx, e as i64)));
        }
        out
    }

    /// Substitutes `images[i]` for variable `i`. All images share one variable list.
    pub fn subst(&self, images: &[MvPoly<C>]) -> MvPoly<C> {
        assert_eq!(images.len(), self.nvars(), "one image per variable is required");
        let (ctx, tv) = match images.first() {
            Some(f) => (f.ctx.clone(), f.vars.clone()),
            None => (self.ctx.clone(), self.vars.clone()),
        };
        let mut cache: HashMap<(usize, u32), MvPoly<C>> = HashMap::new();
        let mut out = MvPoly::zero(&ctx, &tv);
        for (m, c) in &self.terms {
            let mut t = MvPoly::constant(&ctx, &tv, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pw = cache.entry((i, e)).or_insert_with(|| images[i].pow(e as u64)).clone();
                t = t.mul(&pw);
            }
            out = out.add(&t);
        }
        out
    }

    /// Evaluates at a point.
    pub fn eval(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.nvars());
        let mut acc = C::from_int(&self.ctx, 0);
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.0.iter().enumerate() {
                if e > 0 {
                    t = t.cmul(&point[i].cpow(e as u64));
                }
            }
            acc = acc.cadd(&t);
        }
        acc
    }

    pub fn map_coeffs<D: Coeff>(&self, ctx: &D::Ctx, f: impl Fn(&C) -> D) -> MvPoly<D> {
        MvPoly::from_terms(ctx, &self.vars, self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    /// Re-expresses in a larger variable list; `index[i]` is the new position of variable `i`.
    pub fn reindex(&self, new_vars: &Vars, index: &[usize]) -> Self {
        let n = new_vars.len();
        let terms = self.terms.iter().map(|(m, c)| {
            let mut e = vec![0; n];
            for (i, &k) in m.0.iter().enumerate() {
                e[index[i]] += k;
            }
            (Monomial(e), c.clone())
        });
        Self::from_terms(&self.ctx, new_vars, terms)
    }

    /// Re-expresses by variable name in `new_vars`, which must contain every variable of `self`.
    pub fn embed(&self, new_vars: &Vars) -> Result<Self, PolyError> {
        if same_vars(&self.vars, new_vars) {
            return Ok(self.clone());
        }
        let index = self
            .vars
            .iter()
            .map(|v| new_vars.iter().position(|w| w == v).ok_or_else(|| PolyError::UnknownVar(v.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.reindex(new_vars, &index))
    }

    /// `sum c * m^k`, the image under raising every monomial to the `k`th power.
    pub fn monomial_power(&self, k: u32) -> Self {
        let terms = self.terms.iter().map(|(m, c)| (m.pow(k), c.clone())).collect();
        Self { ctx: self.ctx.clone(), vars: self.vars.clone(), terms }
    }

    pub fn parse(ctx: &C::Ctx, vars: &Vars, text: &str) -> Result<Self, ParseError> {
        Parser::new(ctx, vars, text).parse_all()
    }
}

impl<C: PiCoeff> MvPoly<C> {
    /// Applies the base Frobenius to every coefficient.
    pub fn frob_twist(&self) -> Self {
        self.map_coeffs(&self.ctx, |c| c.frobenius())
    }
}

impl MvPoly<BaseElem> {
    pub fn truncate(&self, n: u32) -> Self {
        self.map_coeffs(&self.ctx, |c| c.truncate(n))
    }

    pub fn residue(&self) -> MvPoly<Fp> {
        let p = self.ctx.p() as u32;
        self.map_coeffs(&p, |c| c.residue())
    }

    /// Minimum precision over the coefficients.
    pub fn precision(&self) -> u32 {
        self.terms.values().map(|c| c.precision()).min().unwrap_or(self.ctx.precision())
    }
}

impl MvPoly<Fp> {
    /// Lifts residue coefficients to their least non-negative representatives.
    pub fn lift(&self, spec: &Arc<BaseRingSpec>) -> MvPoly<BaseElem> {
        self.map_coeffs(spec, |c| BaseElem::from_int(spec, c.value() as i64))
    }

    /// The q-power Frobenius of a residue polynomial.
    pub fn frobenius(&self, q: u64) -> Self {
        self.monomial_power(q as u32)
    }
}

impl<C: Coeff> fmt::Debug for MvPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn fmt_monomial(m: &Monomial, names: &[String]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in m.0.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(names[i].clone()),
            _ => parts.push(format!("{}^{}", names[i], e)),
        }
    }
    parts.join("*")
}

impl<C: Coeff> fmt::Display for MvPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let cs = c.to_string();
            let compound = cs.trim_start_matches('-').contains(' ');
            let (neg, mag) = if !compound && cs.starts_with('-') { (true, cs[1..].to_string()) } else { (false, cs) };
            let mag = if compound { format!("({mag})") } else { mag };
            let body = if m.is_one() {
                mag
            } else if mag == "1" {
                fmt_monomial(m, &self.vars)
            } else {
                format!("{}*{}", mag, fmt_monomial(m, &self.vars))
            };
            match (k, neg) {
                (0, true) => out.push_str(&format!("-{body}")),
                (0, false) => out.push_str(&body),
                (_, true) => out.push_str(&format!(" - {body}")),
                (_, false) => out.push_str(&format!(" + {body}")),
            }
        }
        write!(f, "{out}")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at position {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

struct Parser<'a, C: Coeff> {
    ctx: &'a C::Ctx,
    vars: &'a Vars,
    src: &'a [u8],
    pos: usize,
}

impl<'a, C: Coeff> Parser<'a, C> {
    fn new(ctx: &'a C::Ctx, vars: &'a Vars, text: &'a str) -> Self {
        Self { ctx, vars, src: text.as_bytes(), pos: 0 }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse_all(mut self) -> Result<MvPoly<C>, ParseError> {
        if self.peek().is_none() {
            return self.err("empty polynomial");
        }
        let p = self.expr()?;
        match self.peek() {
            None => Ok(p),
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }

    fn expr(&mut self) -> Result<MvPoly<C>, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<MvPoly<C>, ParseError> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<MvPoly<C>, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                return Ok(self.factor()?.neg());
            }
            Some(b'+') => {
                self.pos += 1;
                return self.factor();
            }
            _ => {}
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            let k = self.integer()?;
            let k = u32::try_from(k).map_err(|_| ParseError { pos: start, msg: "exponent out of range".into() })?;
            return Ok(base.pow(k as u64));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a non-negative integer");
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse::<u64>().map_err(|_| ParseError { pos: start, msg: format!("integer {s} out of range") })
    }

    fn atom(&mut self) -> Result<MvPoly<C>, ParseError> {
        let Some(c) = self.peek() else {
            return self.err("unexpected end of input");
        };
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err("expected ')'");
            }
            self.pos += 1;
            return Ok(inner);
        }
        if c.is_ascii_digit() {
            let start = self.pos;
            let n = self.integer()?;
            let n = i64::try_from(n).map_err(|_| ParseError { pos: start, msg: "integer out of range".into() })?;
            return Ok(MvPoly::from_int(self.ctx, self.vars, n));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if let Some(i) = self.vars.iter().position(|v| v == name) {
                return Ok(MvPoly::var(self.ctx, self.vars, i));
            }
            if name == "pi" {
                return Ok(MvPoly::constant(self.ctx, self.vars, C::pi(self.ctx)));
            }
            self.pos = start;
            return self.err(format!("unknown variable '{name}'"));
        }
        self.err(format!("unexpected character '{}'", c as char))
    }
}
