//! pi-derivations on polynomial rings: the carry polynomial, prolongation to jet
//! variables, and the dictionary between pi-derivations and Frobenius lifts.

use std::collections::HashMap;

use thiserror::Error;

use crate::base_ring::BaseRingError;
use crate::poly::{Monomial, MvPoly, PiCoeff, PolyError, Vars};
use crate::witt::carry;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeltaError {
    #[error(transparent)]
    Base(#[from] BaseRingError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("assignment for {var} is not a Frobenius lift: {reason}")]
    NotFrobeniusLift { var: String, reason: String },
}

pub fn jet_name(v: &str) -> String {
    format!("{v}_dot")
}

/// Base variables `X` and jet variables `X_dot`, one per base variable.
#[derive(Clone, Debug)]
pub struct DeltaContext<C: PiCoeff> {
    ctx: C::Ctx,
    base: Vars,
    all: Vars,
}

impl<C: PiCoeff> DeltaContext<C> {
    pub fn new(ctx: &C::Ctx, base: &Vars) -> Self {
        let mut names: Vec<String> = base.iter().cloned().collect();
        names.extend(base.iter().map(|v| jet_name(v)));
        Self { ctx: ctx.clone(), base: base.clone(), all: std::sync::Arc::new(names) }
    }

    pub fn ctx(&self) -> &C::Ctx {
        &self.ctx
    }

    pub fn base_vars(&self) -> &Vars {
        &self.base
    }

    /// `X` followed by `X_dot`.
    pub fn jet_vars(&self) -> &Vars {
        &self.all
    }

    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn x(&self, i: usize) -> MvPoly<C> {
        MvPoly::var(&self.ctx, &self.all, i)
    }

    pub fn xdot(&self, i: usize) -> MvPoly<C> {
        MvPoly::var(&self.ctx, &self.all, self.n() + i)
    }

    /// Moves a polynomial in `X` into the jet ring.
    pub fn lift_to_jet(&self, f: &MvPoly<C>) -> Result<MvPoly<C>, PolyError> {
        f.embed(&self.all)
    }

    /// The universal pi-derivation `delta f` in `R[X, X_dot]`.
    pub fn prolong(&self, f: &MvPoly<C>) -> Result<MvPoly<C>, DeltaError> {
        let f = self.lift_to_jet(f)?;
        let q = C::q(&self.ctx);
        let prec = f.terms().values().map(|c| c.known_precision()).min().unwrap_or(u32::MAX);
        let mut memo: HashMap<Monomial, MvPoly<C>> = HashMap::new();
        let mut sum = MvPoly::zero(&self.ctx, &self.all);
        let mut acc = MvPoly::zero(&self.ctx, &self.all);
        for (m, c) in f.terms() {
            let t = MvPoly::monomial(&self.ctx, &self.all, m.clone(), c.clone());
            let dt = self.delta_term(m, c, q, &mut memo)?;
            acc = acc.add(&dt).add(&carry(&sum, &t));
            sum = sum.add(&t);
        }
        Ok(truncate_poly(&acc, prec.saturating_sub(1)))
    }

    /// `delta(c m) = c^q delta(m) + m^q delta(c) + pi delta(c) delta(m)`.
    fn delta_term(
        &self,
        m: &Monomial,
        c: &C,
        q: u64,
        memo: &mut HashMap<Monomial, MvPoly<C>>,
    ) -> Result<MvPoly<C>, DeltaError> {
        let dm = self.delta_monomial(m, q, memo);
        let dc = c.base_delta()?;
        let mq = MvPoly::monomial(&self.ctx, &self.all, m.pow(q as u32), c.cone());
        let mut out = dm.scale(&c.cpow(q)).add(&mq.scale(&dc));
        out = out.add(&dm.scale(&dc.cmul(&C::pi(&self.ctx))));
        Ok(out)
    }

    /// `delta(x_i m') = x_i^q delta(m') + m'^q x_i_dot + pi x_i_dot delta(m')`.
    fn delta_monomial(&self, m: &Monomial, q: u64, memo: &mut HashMap<Monomial, MvPoly<C>>) -> MvPoly<C> {
        if m.is_one() {
            return MvPoly::zero(&self.ctx, &self.all);
        }
        if let Some(d) = memo.get(m) {
            return d.clone();
        }
        let i = m.0.iter().position(|&e| e > 0).unwrap();
        let mut rest = m.clone();
        rest.0[i] -= 1;
        let d_rest = self.delta_monomial(&rest, q, memo);
        let xi_q = self.x(i).pow(q);
        let rest_q = MvPoly::monomial(&self.ctx, &self.all, rest.pow(q as u32), C::from_int(&self.ctx, 1));
        let xd = self.xdot(i);
        let out = xi_q
            .mul(&d_rest)
            .add(&rest_q.mul(&xd))
            .add(&xd.mul(&d_rest).scale(&C::pi(&self.ctx)));
        memo.insert(m.clone(), out.clone());
        out
    }

    /// `phi(x_i) = x_i^q + pi delta(x_i)`.
    pub fn lift_from_delta(&self, delta: &[MvPoly<C>]) -> Vec<MvPoly<C>> {
        lift_from_delta(delta, C::q(&self.ctx))
    }
}

fn truncate_poly<C: PiCoeff>(f: &MvPoly<C>, n: u32) -> MvPoly<C> {
    if n == u32::MAX - 1 || n == u32::MAX {
        return f.clone();
    }
    MvPoly::from_terms(f.ctx(), f.vars(), f.terms().iter().map(|(m, c)| (m.clone(), c.truncate_to(n))))
}

/// The carry `(a^q + b^q - (a + b)^q) / pi`, expanded.
pub fn c_pi<C: PiCoeff>(a: &MvPoly<C>, b: &MvPoly<C>) -> MvPoly<C> {
    carry(a, b)
}

/// Frobenius lift attached to a pi-derivation: `phi(x_i) = x_i^q + pi delta_i`, where the
/// images live in a ring whose first variables are the `x_i`.
pub fn lift_from_delta<C: PiCoeff>(delta: &[MvPoly<C>], q: u64) -> Vec<MvPoly<C>> {
    delta
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let x = MvPoly::var(d.ctx(), d.vars(), i);
            x.pow(q).add(&d.scale(&C::pi(d.ctx())))
        })
        .collect()
}

/// Inverse of [`lift_from_delta`]: `delta_i = (phi_i - x_i^q) / pi`.
pub fn delta_from_lift<C: PiCoeff>(phi: &[MvPoly<C>], q: u64) -> Result<Vec<MvPoly<C>>, DeltaError> {
    phi.iter()
        .enumerate()
        .map(|(i, f)| {
            let x = MvPoly::var(f.ctx(), f.vars(), i);
            let diff = f.sub(&x.pow(q));
            let terms = diff
                .terms()
                .iter()
                .map(|(m, c)| c.div_pi_exact().map(|d| (m.clone(), d)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DeltaError::NotFrobeniusLift { var: f.vars()[i].clone(), reason: e.to_string() })?;
            Ok(MvPoly::from_terms(f.ctx(), f.vars(), terms))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_ring::{BaseElem, BaseRingSpec, IntCtx, Integer};
    use crate::poly::vars;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn ip(ctx: IntCtx, v: &Vars, s: &str) -> MvPoly<Integer> {
        MvPoly::parse(&ctx, v, s).unwrap()
    }

    #[test]
    fn carry_examples() {
        let v = vars(&["a", "b"]);
        let c2 = IntCtx::new(2, 1).unwrap();
        let (a, b) = (ip(c2, &v, "a"), ip(c2, &v, "b"));
        assert_eq!(c_pi(&a, &b), ip(c2, &v, "-a*b"));
        let c3 = IntCtx::new(3, 1).unwrap();
        let (a, b) = (ip(c3, &v, "a"), ip(c3, &v, "b"));
        assert_eq!(c_pi(&a, &b), ip(c3, &v, "-a^2*b - a*b^2"));
        assert!(c_pi(&a, &MvPoly::zero(&c3, &v)).is_zero());
    }

    #[test]
    fn carry_matches_direct_division() {
        let spec = BaseRingSpec::new(5, vec![-5, 0, 1], 6, 1).unwrap();
        let v = vars(&["a", "b"]);
        let a = MvPoly::<BaseElem>::parse(&spec, &v, "a + pi*b^2").unwrap();
        let b = MvPoly::parse(&spec, &v, "3*b - 1").unwrap();
        let q = 5;
        let num = a.pow(q).add(&b.pow(q)).sub(&a.add(&b).pow(q));
        let direct = MvPoly::from_terms(
            &spec,
            &v,
            num.terms().iter().map(|(m, c)| (m.clone(), c.div_pi_exact().unwrap())),
        );
        assert_eq!(c_pi(&a, &b).truncate(5), direct);
    }

    #[test]
    fn prolong_square_at_two() {
        let c = IntCtx::new(2, 1).unwrap();
        let v = vars(&["x"]);
        let dc = DeltaContext::<Integer>::new(&c, &v);
        let d = dc.prolong(&ip(c, &v, "x^2")).unwrap();
        assert_eq!(d, ip(c, dc.jet_vars(), "2*x^2*x_dot + 2*x_dot^2"));
        let val = d.eval(&[Integer::new(c, 3), Integer::new(c, -3)]);
        assert_eq!(val, Integer::new(c, -36));
        assert_eq!(Integer::new(c, 9).fermat_quotient(), val);
    }

    #[test]
    fn prolong_generators_and_constants() {
        let spec = BaseRingSpec::unramified(3, 4).unwrap();
        let v = vars(&["x", "y"]);
        let dc = DeltaContext::<BaseElem>::new(&spec, &v);
        let d = dc.prolong(&MvPoly::parse(&spec, &v, "x").unwrap()).unwrap();
        assert_eq!(d, dc.xdot(0).truncate(3));
        let d = dc.prolong(&MvPoly::from_int(&spec, &v, 3)).unwrap();
        let expect = BaseElem::from_int(&spec, 3).base_delta().unwrap();
        assert_eq!(d, MvPoly::constant(&spec, dc.jet_vars(), expect));
    }

    #[test]
    fn lift_delta_dictionary() {
        let spec = BaseRingSpec::unramified(3, 4).unwrap();
        let v = vars(&["x"]);
        let zero = MvPoly::<BaseElem>::zero(&spec, &v);
        let phi = lift_from_delta(&[zero.clone()], 3);
        assert_eq!(phi[0], MvPoly::parse(&spec, &v, "x^3").unwrap());
        let phi = vec![MvPoly::<BaseElem>::parse(&spec, &v, "x^3 + pi").unwrap()];
        let d = delta_from_lift(&phi, 3).unwrap();
        assert_eq!(d[0], MvPoly::from_int(&spec, &v, 1).truncate(3));
        let bad = vec![MvPoly::<BaseElem>::parse(&spec, &v, "x^3 + 1").unwrap()];
        assert!(matches!(delta_from_lift(&bad, 3), Err(DeltaError::NotFrobeniusLift { .. })));
    }

    fn spec_for(p: u64, ramified: bool) -> Arc<BaseRingSpec> {
        if ramified {
            BaseRingSpec::new(p, vec![-(p as i64), 0, 1], 6, 1).unwrap()
        } else {
            BaseRingSpec::unramified(p, 4).unwrap()
        }
    }

    fn arb_terms() -> impl Strategy<Value = Vec<(Vec<u32>, i64, i64)>> {
        prop::collection::vec((prop::collection::vec(0u32..3, 2), -9i64..9, 0i64..3), 1..4)
    }

    fn build(spec: &Arc<BaseRingSpec>, v: &Vars, t: &[(Vec<u32>, i64, i64)]) -> MvPoly<BaseElem> {
        let pi = BaseElem::pi(spec);
        MvPoly::from_terms(
            spec,
            v,
            t.iter().map(|(e, a, b)| (Monomial(e.clone()), &BaseElem::from_int(spec, *a) + &(&pi * &BaseElem::from_int(spec, *b)))),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn sum_and_product_rules(
            pidx in 0usize..3, ram in any::<bool>(),
            f in arb_terms(), g in arb_terms()
        ) {
            let p = [2u64, 3, 5][pidx];
            let spec = spec_for(p, ram);
            let v = vars(&["x", "y"]);
            let dc = DeltaContext::<BaseElem>::new(&spec, &v);
            let (f, g) = (build(&spec, &v, &f), build(&spec, &v, &g));
            let (df, dg) = (dc.prolong(&f).unwrap(), dc.prolong(&g).unwrap());
            let (fj, gj) = (dc.lift_to_jet(&f).unwrap(), dc.lift_to_jet(&g).unwrap());
            let n = spec.precision() - 1;
            let sum = df.add(&dg).add(&c_pi(&fj, &gj)).truncate(n);
            prop_assert_eq!(dc.prolong(&f.add(&g)).unwrap(), sum);
            let q = spec.q();
            let pi = BaseElem::pi(&spec);
            let prod = fj.pow(q).mul(&dg).add(&gj.pow(q).mul(&df)).add(&df.mul(&dg).scale(&pi)).truncate(n);
            prop_assert_eq!(dc.prolong(&f.mul(&g)).unwrap(), prod);
        }

        #[test]
        fn telescoped_sum_agrees(pidx in 0usize..3, f in arb_terms()) {
            let p = [2u64, 3, 5][pidx];
            let spec = spec_for(p, true);
            let v = vars(&["x", "y"]);
            let dc = DeltaContext::<BaseElem>::new(&spec, &v);
            let f = build(&spec, &v, &f);
            let q = spec.q();
            // delta(sum t) = sum delta(t) + (sum t^q - (sum t)^q) / pi
            let mut sum_dt = MvPoly::<BaseElem>::zero(&spec, dc.jet_vars());
            let mut sum_tq = MvPoly::<BaseElem>::zero(&spec, dc.jet_vars());
            for (m, c) in f.terms() {
                let t = MvPoly::monomial(&spec, &v, m.clone(), c.clone());
                sum_dt = sum_dt.add(&dc.prolong(&t).unwrap());
                sum_tq = sum_tq.add(&dc.lift_to_jet(&t).unwrap().pow(q));
            }
            let fq = dc.lift_to_jet(&f).unwrap().pow(q);
            let diff = sum_tq.sub(&fq);
            let corr = MvPoly::from_terms(&spec, dc.jet_vars(), diff.terms().iter().map(|(m, c)| (m.clone(), c.div_pi_exact().unwrap())));
            let n = spec.precision() - 1;
            prop_assert_eq!(dc.prolong(&f).unwrap(), sum_dt.add(&corr).truncate(n));
        }
    }
}
