//! Coordinate rings `R[X]/(G)` and their reductions `F_p[X]/(G mod pi)`.
//!
//! Normal forms are computed by rewriting with the leading terms of the relations
//! under the lexicographic order in which later variables are more significant.
//! Leading monomials are required to be pairwise coprime with unit leading
//! coefficients; relations then form a Groebner basis and the normal form is canonical.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::base_ring::{BaseElem, BaseRingSpec, Fp};
use crate::linalg::LinearSystem;
use crate::poly::{Coeff, Monomial, MvPoly, Vars};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("relation {0} vanishes mod pi")]
    ZeroRelation(String),
    #[error("relation {0} has a leading coefficient that is not a unit")]
    NonUnitLead(String),
    #[error("relations {0} and {1} have leading monomials that share a variable; rewriting is not prepared for this presentation")]
    NotPrepared(String, String),
    #[error("relation {0} is a nonzero constant mod pi; the ring is zero")]
    UnitIdeal(String),
    #[error("coefficient division by pi failed while linearizing {0}")]
    NotDivisible(String),
}

/// `a > b` when the last variable where they differ has a larger exponent in `a`.
pub fn rev_lex_cmp(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    for (x, y) in a.0.iter().zip(&b.0).rev() {
        match x.cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn leading<C: Coeff>(f: &MvPoly<C>) -> Option<(Monomial, C)> {
    f.terms().iter().max_by(|a, b| rev_lex_cmp(a.0, b.0)).map(|(m, c)| (m.clone(), c.clone()))
}

/// `A[X]/(G)` with canonical normal forms, for a coefficient ring `A`.
pub struct QuotientRing<C: Coeff> {
    ctx: C::Ctx,
    vars: Vars,
    /// leading monomial and the tail it rewrites to
    rules: Vec<(Monomial, MvPoly<C>)>,
    memo: Mutex<HashMap<Monomial, MvPoly<C>>>,
}

/// The reduction `F_p[X]/(G mod pi)`.
pub type ResidueRing = QuotientRing<Fp>;

impl<C: Coeff> std::fmt::Debug for QuotientRing<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuotientRing").field("vars", &self.vars).field("rules", &self.rules).finish()
    }
}

impl<C: Coeff> QuotientRing<C> {
    pub fn new(ctx: &C::Ctx, vars: &Vars, relations: &[MvPoly<C>]) -> Result<Self, RingError> {
        let mut rules: Vec<(Monomial, MvPoly<C>)> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        for r in relations {
            let (lm, lc) = leading(r).ok_or_else(|| RingError::ZeroRelation(r.to_string()))?;
            if lm.is_one() {
                return Err(RingError::UnitIdeal(r.to_string()));
            }
            for ((other, _), name) in rules.iter().zip(&names) {
                if !lm.coprime(other) {
                    return Err(RingError::NotPrepared(name.clone(), r.to_string()));
                }
            }
            let inv = lc.inverse().ok_or_else(|| RingError::NonUnitLead(r.to_string()))?;
            let monic = r.scale(&inv);
            let lead = MvPoly::monomial(ctx, vars, lm.clone(), C::from_int(ctx, 1));
            let tail = lead.sub(&monic);
            names.push(r.to_string());
            rules.push((lm, tail));
        }
        Ok(Self { ctx: ctx.clone(), vars: vars.clone(), rules, memo: Mutex::new(HashMap::new()) })
    }

    pub fn ctx(&self) -> &C::Ctx {
        &self.ctx
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn zero(&self) -> MvPoly<C> {
        MvPoly::zero(&self.ctx, &self.vars)
    }

    pub fn one(&self) -> MvPoly<C> {
        MvPoly::one(&self.ctx, &self.vars)
    }

    pub fn var(&self, i: usize) -> MvPoly<C> {
        MvPoly::var(&self.ctx, &self.vars, i)
    }

    pub fn leads(&self) -> Vec<Monomial> {
        self.rules.iter().map(|(m, _)| m.clone()).collect()
    }

    pub fn is_normal(&self, m: &Monomial) -> bool {
        self.rules.iter().all(|(l, _)| !l.divides(m))
    }

    fn nf_monomial(&self, m: &Monomial) -> MvPoly<C> {
        if let Some(r) = self.memo.lock().unwrap().get(m) {
            return r.clone();
        }
        let out = match self.rules.iter().find(|(l, _)| l.divides(m)) {
            None => MvPoly::monomial(&self.ctx, &self.vars, m.clone(), C::from_int(&self.ctx, 1)),
            Some((l, tail)) => {
                let rest = l.quotient_of(m);
                let reduced_rest = self.nf_monomial(&rest);
                let mut acc = self.zero();
                for (t, c) in tail.mul(&reduced_rest).terms() {
                    acc = acc.add(&self.nf_monomial(t).scale(c));
                }
                acc
            }
        };
        self.memo.lock().unwrap().insert(m.clone(), out.clone());
        out
    }

    /// Canonical representative of `f` modulo the relations.
    pub fn nf(&self, f: &MvPoly<C>) -> MvPoly<C> {
        let f = f.embed(&self.vars).expect("polynomial over foreign variables");
        if self.rules.is_empty() {
            return f;
        }
        let mut acc = self.zero();
        for (m, c) in f.terms() {
            if self.is_normal(m) {
                acc.add_term(m.clone(), c.clone());
            } else {
                for (t, d) in self.nf_monomial(m).terms() {
                    acc.add_term(t.clone(), d.cmul(c));
                }
            }
        }
        acc
    }

    pub fn mul(&self, a: &MvPoly<C>, b: &MvPoly<C>) -> MvPoly<C> {
        self.nf(&a.mul(b))
    }

    pub fn pow(&self, a: &MvPoly<C>, mut k: u64) -> MvPoly<C> {
        let mut base = self.nf(a);
        let mut acc = self.one();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            k >>= 1;
            if k > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// Normal monomials of total degree at most `d`, in increasing graded order.
    pub fn basis(&self, d: u32) -> Vec<Monomial> {
        let n = self.vars.len();
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
            if i == cur.len() {
                out.push(Monomial(cur.clone()));
                return;
            }
            for e in 0..=left {
                cur[i] = e;
                rec(i + 1, left - e, cur, out);
            }
            cur[i] = 0;
        }
        rec(0, d, &mut cur, &mut out);
        out.retain(|m| self.is_normal(m));
        out.sort();
        out
    }
}

impl QuotientRing<Fp> {
    pub fn p(&self) -> u32 {
        self.ctx
    }

    /// The absolute Frobenius `a -> a^q`.
    pub fn frob(&self, a: &MvPoly<Fp>, q: u64) -> MvPoly<Fp> {
        self.nf(&a.monomial_power(q as u32))
    }

    /// Solves `u * a = 1`, searching normal forms of degree up to `max_deg`.
    pub fn inverse(&self, a: &MvPoly<Fp>, max_deg: u32) -> Option<MvPoly<Fp>> {
        let a = self.nf(a);
        if a.is_zero() {
            return None;
        }
        if a.is_constant() {
            return a.constant_term().inverse().map(|c| MvPoly::constant(&self.ctx, &self.vars, c));
        }
        let p = self.ctx;
        let mut d = 1;
        loop {
            let basis = self.basis(d);
            let mut rows: HashMap<Monomial, Vec<(usize, u32)>> = HashMap::new();
            for (k, m) in basis.iter().enumerate() {
                let prod = self.nf(&a.mul_monomial(m));
                for (t, c) in prod.terms() {
                    rows.entry(t.clone()).or_default().push((k, c.value()));
                }
            }
            let one = Monomial::one(self.vars.len());
            rows.entry(one.clone()).or_default();
            let mut sys = LinearSystem::new(p, basis.len());
            let mut keys: Vec<&Monomial> = rows.keys().collect();
            keys.sort();
            for t in keys {
                let rhs = if *t == one { 1 } else { 0 };
                sys.add_row(rows[t].iter().copied(), rhs);
            }
            if let Some(x) = sys.solve() {
                let u = MvPoly::from_terms(
                    &p,
                    &self.vars,
                    basis.iter().zip(&x).map(|(m, &c)| (m.clone(), Fp::new(c as u64, p))),
                );
                return Some(u);
            }
            if d >= max_deg {
                return None;
            }
            d = (d * 2).min(max_deg);
        }
    }
}

/// An integral presentation `R[X]/(G)` together with its reduction mod `pi`.
#[derive(Debug)]
pub struct CoordRing {
    spec: Arc<BaseRingSpec>,
    relations: Vec<MvPoly<BaseElem>>,
    integral: QuotientRing<BaseElem>,
    residue: ResidueRing,
}

impl CoordRing {
    pub fn new(spec: &Arc<BaseRingSpec>, vars: &Vars, relations: Vec<MvPoly<BaseElem>>) -> Result<Self, RingError> {
        let p = spec.p() as u32;
        let mut res_rel = Vec::new();
        for r in &relations {
            let rr = r.residue();
            let (lm, _) = leading(r).ok_or_else(|| RingError::ZeroRelation(r.to_string()))?;
            match leading(&rr) {
                None => return Err(RingError::ZeroRelation(r.to_string())),
                Some((rm, _)) if rm != lm => return Err(RingError::NonUnitLead(r.to_string())),
                _ => {}
            }
            res_rel.push(rr);
        }
        let integral = QuotientRing::new(spec, vars, &relations)?;
        let residue = ResidueRing::new(&p, vars, &res_rel)?;
        Ok(Self { spec: spec.clone(), relations, integral, residue })
    }

    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn q(&self) -> u64 {
        self.spec.q()
    }

    pub fn vars(&self) -> &Vars {
        self.integral.vars()
    }

    pub fn nvars(&self) -> usize {
        self.vars().len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars().iter().position(|v| v == name)
    }

    pub fn relations(&self) -> &[MvPoly<BaseElem>] {
        &self.relations
    }

    pub fn integral(&self) -> &QuotientRing<BaseElem> {
        &self.integral
    }

    pub fn residue(&self) -> &ResidueRing {
        &self.residue
    }

    pub fn parse(&self, text: &str) -> Result<MvPoly<BaseElem>, crate::poly::ParseError> {
        MvPoly::parse(&self.spec, self.vars(), text)
    }

    pub fn var(&self, i: usize) -> MvPoly<BaseElem> {
        MvPoly::var(&self.spec, self.vars(), i)
    }

    /// Image of an integral polynomial in the residue ring.
    pub fn reduce(&self, f: &MvPoly<BaseElem>) -> MvPoly<Fp> {
        self.residue.nf(&f.residue())
    }

    pub fn frob(&self, a: &MvPoly<Fp>) -> MvPoly<Fp> {
        self.residue.frob(a, self.q())
    }

    /// `((f^phi(X^q) - f(X)^q) / pi) mod pi`, the part of `delta f` free of jet variables.
    pub fn delta_const(&self, f: &MvPoly<BaseElem>) -> Result<MvPoly<Fp>, RingError> {
        let f = f.embed(self.vars()).expect("polynomial over foreign variables");
        Ok(self.residue.nf(&delta_const_poly(&f)?))
    }

    /// `(d f / d x_k mod pi)^q` for every variable: the coefficients of `x_k_dot` in `delta f mod pi`.
    pub fn jacobian_row(&self, f: &MvPoly<BaseElem>) -> Vec<MvPoly<Fp>> {
        let fr = f.residue().embed(self.vars()).expect("polynomial over foreign variables");
        (0..self.nvars()).map(|k| self.frob(&fr.partial(k))).collect()
    }

    /// `delta(f) mod pi` for a pi-derivation with the given values on the variables.
    pub fn delta_of(&self, values: &[MvPoly<Fp>], f: &MvPoly<BaseElem>) -> Result<MvPoly<Fp>, RingError> {
        let c = self.delta_const(f)?;
        Ok(self.residue.nf(&c.add(&self.fder_of(values, f))))
    }

    /// `D(f)` for an F-derivation `D` with the given values on the variables.
    pub fn fder_of(&self, values: &[MvPoly<Fp>], f: &MvPoly<BaseElem>) -> MvPoly<Fp> {
        let f = f.residue().embed(self.vars()).expect("polynomial over foreign variables");
        fder_residue(&self.residue, self.q(), values, &f)
    }
}

/// `((f^phi(X^q) - f(X)^q) / pi) mod pi` as a polynomial.
pub fn delta_const_poly(f: &MvPoly<BaseElem>) -> Result<MvPoly<Fp>, RingError> {
    let f2 = f.truncate(2);
    let spec = f.ctx();
    let q = spec.q();
    let diff = f2.frob_twist().monomial_power(q as u32).sub(&f2.pow(q));
    let mut out = MvPoly::zero(&(spec.p() as u32), f.vars());
    for (m, c) in diff.terms() {
        let d = c.div_pi_exact().map_err(|_| RingError::NotDivisible(f.to_string()))?;
        out.add_term(m.clone(), d.residue());
    }
    Ok(out)
}

/// `sum_k (d f / d x_k)^q D(x_k)` for a residue polynomial `f`.
pub fn fder_residue(ring: &ResidueRing, q: u64, values: &[MvPoly<Fp>], f: &MvPoly<Fp>) -> MvPoly<Fp> {
    let mut acc = ring.zero();
    for (k, v) in values.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let d = f.partial(k);
        if d.is_zero() {
            continue;
        }
        acc = acc.add(&d.monomial_power(q as u32).mul(v));
    }
    ring.nf(&acc)
}

/// Substitutes images for the variables of `f` and reduces in the target ring.
pub fn map_into<C: Coeff>(target: &QuotientRing<C>, images: &[MvPoly<C>], f: &MvPoly<C>) -> MvPoly<C> {
    if f.is_zero() {
        return target.zero();
    }
    let mut cache: HashMap<(usize, u32), MvPoly<C>> = HashMap::new();
    let mut acc = target.zero();
    for (m, c) in f.terms() {
        let mut t = MvPoly::constant(target.ctx(), target.vars(), c.clone());
        for (i, &e) in m.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let pw = cache.entry((i, e)).or_insert_with(|| target.pow(&images[i], e as u64)).clone();
            t = target.mul(&t, &pw);
        }
        acc = acc.add(&t);
    }
    target.nf(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::vars;

    fn ring(p: u64, v: &[&str], rels: &[&str]) -> CoordRing {
        let spec = BaseRingSpec::unramified(p, 4).unwrap();
        let v = vars(v);
        let rels = rels.iter().map(|r| MvPoly::parse(&spec, &v, r).unwrap()).collect();
        CoordRing::new(&spec, &v, rels).unwrap()
    }

    fn fp(r: &CoordRing, s: &str) -> MvPoly<Fp> {
        r.parse(s).unwrap().residue()
    }

    #[test]
    fn structured_reductions() {
        let r = ring(5, &["x", "c"], &["x^2 - c"]);
        // x^2 is the leading term only if x is more significant; here c is, so c -> x^2
        assert_eq!(r.residue().nf(&fp(&r, "c")), fp(&r, "x^2"));
        let r = ring(5, &["c", "x"], &["x^2 - c"]);
        assert_eq!(r.residue().nf(&fp(&r, "x^2")), fp(&r, "c"));
        let r = ring(5, &["x", "u"], &["u*x - 1"]);
        assert_eq!(r.residue().nf(&fp(&r, "u*x")), fp(&r, "1"));
        assert_eq!(r.residue().nf(&fp(&r, "u^3*x^5 + u")), fp(&r, "x^2 + u"));
        let r = ring(7, &["x", "y"], &["y^2 - x^3 - 2*x - 3"]);
        assert_eq!(r.residue().nf(&fp(&r, "y^2")), fp(&r, "x^3 + 2*x + 3"));
    }

    #[test]
    fn overlapping_leads_are_rejected() {
        let spec = BaseRingSpec::unramified(3, 4).unwrap();
        let v = vars(&["x", "y", "c"]);
        let rels = vec![
            MvPoly::parse(&spec, &v, "y^2 - x^3 - x").unwrap(),
            MvPoly::parse(&spec, &v, "c*y - 1").unwrap(),
        ];
        assert!(matches!(CoordRing::new(&spec, &v, rels), Err(RingError::NotPrepared(..))));
    }

    #[test]
    fn normal_form_is_idempotent_and_linear() {
        let r = ring(3, &["x", "c"], &["c^2*x^3 + c^2*x - 1"]);
        let res = r.residue();
        let a = fp(&r, "c^5*x^7 + x*c^2 + 2");
        let b = fp(&r, "c^3*x^4 - c");
        let na = res.nf(&a);
        assert_eq!(res.nf(&na), na);
        assert_eq!(res.nf(&a.add(&b)), na.add(&res.nf(&b)));
        assert!(na.terms().keys().all(|m| res.is_normal(m)));
    }

    #[test]
    fn inverses() {
        let r = ring(3, &["x", "u"], &["u*x - 1"]);
        let inv = r.residue().inverse(&fp(&r, "x^2"), 8).unwrap();
        assert_eq!(inv, fp(&r, "u^2"));
        assert!(r.residue().inverse(&fp(&r, "x + 1"), 8).is_none());
    }

    #[test]
    fn delta_constant_and_jacobian() {
        // u*x - 1 at p = 3: (u^3 x^3 - 1 - (u x - 1)^3) / 3 = u^2 x^2 - u x, which is 0 in the ring
        let r = ring(3, &["x", "u"], &["u*x - 1"]);
        let g = r.relations()[0].clone();
        assert!(r.delta_const(&g).unwrap().is_zero());
        let j = r.jacobian_row(&g);
        assert_eq!(j[0], fp(&r, "u^3"));
        assert_eq!(j[1], fp(&r, "x^3"));
        // delta(x^2) at p = 2 has constant part (x^4 - x^4)/2 = 0 and slope 2x... = 0 mod 2
        let a = ring(2, &["x"], &[]);
        let sq = a.parse("x^2").unwrap();
        assert!(a.delta_const(&sq).unwrap().is_zero());
        assert!(a.jacobian_row(&sq)[0].is_zero());
        let s = a.parse("x + 1").unwrap();
        // ((x^2 + 1) - (x + 1)^2) / 2 = -x
        assert_eq!(a.delta_const(&s).unwrap(), fp(&a, "x"));
    }
}
