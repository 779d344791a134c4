//! First arithmetic jet spaces of affine patches, their linear structure mod pi, and the
//! jet-space base change along etale maps.

use thiserror::Error;

use crate::base_ring::{BaseElem, Fp};
use crate::delta::{DeltaContext, DeltaError};
use crate::poly::{Monomial, MvPoly};
use crate::ring::{delta_const_poly, CoordRing, RingError};
use crate::scheme::{Patch, SchemeMorphism};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("prolongation of {generator} has the jet-quadratic term {monomial} mod pi")]
    NonLinear { generator: String, monomial: String },
    #[error("not etale: the jacobian determinant {det} vanishes at {point}")]
    NotEtale { det: String, point: String },
    #[error("not etale: the jacobian determinant {0} is not a unit")]
    NotUnit(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// `R<X, X_dot> / (G, delta G)`.
#[derive(Debug, Clone)]
pub struct JetPresentation {
    pub ctx: DeltaContext<BaseElem>,
    pub generators: Vec<MvPoly<BaseElem>>,
    pub prolonged: Vec<MvPoly<BaseElem>>,
}

/// Relations (localizations included) and their prolongations.
pub fn jet_presentation(patch: &Patch) -> Result<JetPresentation, JetError> {
    let ring = &patch.ring;
    let ctx = DeltaContext::new(ring.spec(), ring.vars());
    let generators = ring.relations().to_vec();
    let prolonged = generators.iter().map(|g| ctx.prolong(g)).collect::<Result<Vec<_>, _>>()?;
    Ok(JetPresentation { ctx, generators, prolonged })
}

/// `delta g = c_g(X) + sum_j J_{g,j}(X) x_j_dot` mod pi, as plain polynomials in `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedJet {
    pub constant: Vec<MvPoly<Fp>>,
    pub jacobian: Vec<Vec<MvPoly<Fp>>>,
}

pub fn linearize_mod_pi(jp: &JetPresentation) -> Result<LinearizedJet, JetError> {
    let n = jp.ctx.n();
    let base = jp.ctx.base_vars();
    let p = jp.ctx.ctx().p() as u32;
    let mut constant = Vec::new();
    let mut jacobian = Vec::new();
    for (g, dg) in jp.generators.iter().zip(&jp.prolonged) {
        let mut c = MvPoly::zero(&p, base);
        let mut row = vec![MvPoly::zero(&p, base); n];
        for (m, coef) in dg.residue().terms() {
            let (xs, dots) = m.0.split_at(n);
            let x = Monomial(xs.to_vec());
            match dots.iter().sum::<u32>() {
                0 => c.add_term(x, *coef),
                1 => {
                    let j = dots.iter().position(|&e| e == 1).unwrap();
                    row[j].add_term(x, *coef);
                }
                _ => {
                    let names = jp.ctx.jet_vars();
                    let mono = MvPoly::<Fp>::monomial(&p, names, m.clone(), Fp::new(1, p));
                    return Err(JetError::NonLinear { generator: g.to_string(), monomial: mono.to_string() });
                }
            }
        }
        constant.push(c);
        jacobian.push(row);
    }
    Ok(LinearizedJet { constant, jacobian })
}

impl LinearizedJet {
    /// `c_g + J_g A` in the residue ring, for every generator.
    pub fn evaluate(&self, ring: &CoordRing, values: &[MvPoly<Fp>]) -> Vec<MvPoly<Fp>> {
        let res = ring.residue();
        self.constant
            .iter()
            .zip(&self.jacobian)
            .map(|(c, row)| {
                let mut acc = c.clone();
                for (j, a) in row.iter().zip(values) {
                    acc = acc.add(&j.mul(a));
                }
                res.nf(&acc)
            })
            .collect()
    }
}

/// `(d g^phi / d x_j)(X^q) mod pi`, computed without prolonging.
pub fn jacobian_oracle(g: &MvPoly<BaseElem>) -> Vec<MvPoly<Fp>> {
    let q = g.ctx().q() as u32;
    let twisted = g.frob_twist();
    (0..g.nvars()).map(|j| twisted.partial(j).monomial_power(q).residue()).collect()
}

/// `(g^phi(X^q) - g(X)^q) / pi mod pi`, computed without prolonging.
pub fn constant_oracle(g: &MvPoly<BaseElem>) -> Result<MvPoly<Fp>, JetError> {
    Ok(delta_const_poly(g)?)
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct EtaleReport {
    pub determinants: Vec<String>,
    pub points_checked: usize,
    pub bijective: bool,
}

fn points(ring: &CoordRing) -> Vec<Vec<Fp>> {
    let p = ring.spec().p() as u32;
    let n = ring.nvars();
    let rels: Vec<MvPoly<Fp>> = ring.relations().iter().map(|r| r.residue()).collect();
    let mut out = Vec::new();
    let total = (p as u64).pow(n as u32);
    for idx in 0..total {
        let mut k = idx;
        let pt: Vec<Fp> = (0..n)
            .map(|_| {
                let v = Fp::new(k % p as u64, p);
                k /= p as u64;
                v
            })
            .collect();
        if rels.iter().all(|r| r.eval(&pt).is_zero()) {
            out.push(pt);
        }
    }
    out
}

fn point_string(ring: &CoordRing, coords: usize, pt: &[Fp]) -> String {
    ring.vars().iter().take(coords).zip(pt).map(|(v, a)| format!("{v} = {a}")).collect::<Vec<_>>().join(", ")
}

fn determinant(m: &[Vec<MvPoly<Fp>>]) -> MvPoly<Fp> {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = MvPoly::zero(m[0][0].ctx(), m[0][0].vars());
    for c in 0..n {
        let minor: Vec<Vec<MvPoly<Fp>>> = m[1..].iter().map(|r| r.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, x)| x.clone()).collect()).collect();
        let t = m[0][c].mul(&determinant(&minor));
        acc = if c % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
    }
    acc
}

/// Checks that `J^1(X) -> X x_Y J^1(Y)` is a bijection on all `F_p`-points of every chart.
///
/// The map must be etale: the Jacobian of the source relations and the pulled-back target
/// coordinates with respect to the source coordinates must be a unit. Companion variables
/// of inverted elements are eliminated on both sides; targets with further relations are
/// not supported.
pub fn etale_basechange_check(m: &SchemeMorphism) -> Result<EtaleReport, JetError> {
    let mut determinants = Vec::new();
    let mut checked = 0;
    let mut bijective = true;
    for (i, ch) in m.charts.iter().enumerate() {
        let sp = &m.source.patches[i];
        let tp = &m.target.patches[ch.target];
        if !tp.relations.is_empty() {
            return Err(JetError::Unsupported(format!("target patch {} has relations besides localizations", tp.name)));
        }
        let u = &sp.ring;
        let ns = sp.coords.len();
        let nt = tp.coords.len();
        let mut rows: Vec<MvPoly<BaseElem>> = sp.relations.clone();
        rows.extend(ch.images[..nt].iter().cloned());
        if rows.len() != ns {
            return Err(JetError::Unsupported(format!(
                "jacobian of {} on {} is {}x{}",
                m.name,
                sp.name,
                rows.len(),
                ns
            )));
        }
        let jac: Vec<Vec<MvPoly<Fp>>> = rows
            .iter()
            .map(|r| {
                let rr = r.residue();
                (0..ns).map(|k| rr.partial(k)).collect()
            })
            .collect();
        let det = u.residue().nf(&determinant(&jac));
        determinants.push(det.to_string());
        let cap = 4 * u.relations().iter().map(|r| r.degree()).max().unwrap_or(1).max(det.degree());
        if u.residue().inverse(&det, cap.max(4)).is_none() {
            let pts = points(u);
            return Err(match pts.iter().find(|pt| det.eval(pt).is_zero()) {
                Some(pt) => JetError::NotEtale { det: det.to_string(), point: point_string(u, ns, pt) },
                None => JetError::NotUnit(det.to_string()),
            });
        }

        // fibres of the jet spaces over every F_p-point
        let lin_x: Vec<(MvPoly<Fp>, Vec<MvPoly<Fp>>)> =
            u.relations().iter().map(|g| Ok((u.delta_const(g)?, u.jacobian_row(g)))).collect::<Result<_, JetError>>()?;
        let lin_f: Vec<(MvPoly<Fp>, Vec<MvPoly<Fp>>)> =
            ch.images.iter().map(|g| Ok((u.delta_const(g)?, u.jacobian_row(g)))).collect::<Result<_, JetError>>()?;
        let v = &tp.ring;
        let lin_y: Vec<(MvPoly<Fp>, Vec<MvPoly<Fp>>)> =
            v.relations().iter().map(|g| Ok((v.delta_const(g)?, v.jacobian_row(g)))).collect::<Result<_, JetError>>()?;
        let p = u.spec().p() as u32;
        for a in points(u) {
            let b: Vec<Fp> = ch.images_residue.iter().map(|f| f.eval(&a)).collect();
            let fibre = |lin: &[(MvPoly<Fp>, Vec<MvPoly<Fp>>)], pt: &[Fp], n: usize| -> Vec<Vec<Fp>> {
                let evald: Vec<(Fp, Vec<Fp>)> = lin.iter().map(|(c, j)| (c.eval(pt), j.iter().map(|x| x.eval(pt)).collect())).collect();
                all_vectors(p, n)
                    .into_iter()
                    .filter(|d| {
                        evald.iter().all(|(c, j)| {
                            let mut acc = *c;
                            for (x, y) in j.iter().zip(d) {
                                acc = acc + *x * *y;
                            }
                            acc.is_zero()
                        })
                    })
                    .collect()
            };
            let fx = fibre(&lin_x, &a, u.nvars());
            let fy = fibre(&lin_y, &b, v.nvars());
            let mut images: Vec<Vec<Fp>> = fx
                .iter()
                .map(|d| {
                    lin_f
                        .iter()
                        .map(|(c, j)| {
                            let mut acc = c.eval(&a);
                            for (x, y) in j.iter().zip(d) {
                                acc = acc + x.eval(&a) * *y;
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            images.sort_by_key(|v| v.iter().map(|x| x.value()).collect::<Vec<_>>());
            let mut target: Vec<Vec<Fp>> = fy;
            target.sort_by_key(|v| v.iter().map(|x| x.value()).collect::<Vec<_>>());
            let dedup_len = {
                let mut d = images.clone();
                d.dedup();
                d.len()
            };
            if images != target || dedup_len != images.len() {
                bijective = false;
            }
            checked += 1;
        }
    }
    Ok(EtaleReport { determinants, points_checked: checked, bijective })
}

fn all_vectors(p: u32, n: usize) -> Vec<Vec<Fp>> {
    let total = (p as u64).pow(n as u32);
    (0..total)
        .map(|idx| {
            let mut k = idx;
            (0..n)
                .map(|_| {
                    let v = Fp::new(k % p as u64, p);
                    k /= p as u64;
                    v
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_ring::BaseRingSpec;
    use crate::library;
    use crate::poly::vars;
    use crate::scheme::SchemeMorphism;
    use std::sync::Arc;

    fn spec(p: u64) -> Arc<BaseRingSpec> {
        BaseRingSpec::unramified(p, 4).unwrap()
    }

    #[test]
    fn affine_line_has_no_relations() {
        let a = library::affine_space(&spec(3), 1).unwrap();
        let jp = jet_presentation(&a.patches[0]).unwrap();
        assert!(jp.prolonged.is_empty());
        assert_eq!(jp.ctx.jet_vars().as_slice(), ["x", "x_dot"]);
    }

    #[test]
    fn gm_prolonged_relation_vanishes_at_one() {
        let s = spec(3);
        let g = library::gm(&s).unwrap();
        let jp = jet_presentation(&g.patches[0]).unwrap();
        let one = BaseElem::one(&s);
        let zero = BaseElem::zero(&s);
        let pt = [one.clone(), one.clone(), zero.clone(), zero];
        assert!(jp.prolonged[0].eval(&pt).is_zero());
        // and at (x, u) = (2, 1/2) with the delta values of the base ring
        let two = BaseElem::from_int(&s, 2);
        let half = two.inverse().unwrap();
        let pt = [two.clone(), half.clone(), two.base_delta().unwrap(), half.base_delta().unwrap()];
        assert!(jp.prolonged[0].eval(&pt).truncate(3).is_zero());
    }

    #[test]
    fn linear_generator() {
        let s = spec(3);
        let v = vars(&["x"]);
        let c = BaseElem::from_int(&s, 5);
        let g = MvPoly::var(&s, &v, 0).sub(&MvPoly::constant(&s, &v, c.clone()));
        let ctx = DeltaContext::new(&s, &v);
        let jp = JetPresentation { prolonged: vec![ctx.prolong(&g).unwrap()], ctx, generators: vec![g] };
        let lin = linearize_mod_pi(&jp).unwrap();
        assert_eq!(lin.jacobian[0][0], MvPoly::constant(&3, &v, Fp::new(1, 3)));
        // constant part: -delta(5) plus the carry (x^3 - 125 - (x - 5)^3)/3 = 5x^2 - 25x
        let d = c.base_delta().unwrap().residue();
        assert_eq!(d, Fp::new(2, 3));
        let expect = MvPoly::parse(&s, &v, "5*x^2 - 25*x + 1").unwrap().residue();
        assert_eq!(lin.constant[0], expect);
        assert_eq!(lin.constant[0].eval(&[Fp::new(0, 3)]), -d);
    }

    #[test]
    fn constant_generator() {
        let s = spec(5);
        let v = vars(&["x", "y"]);
        let c = BaseElem::from_int(&s, 7);
        let g = MvPoly::constant(&s, &v, c.clone());
        let ctx = DeltaContext::new(&s, &v);
        let jp = JetPresentation { prolonged: vec![ctx.prolong(&g).unwrap()], ctx, generators: vec![g] };
        let lin = linearize_mod_pi(&jp).unwrap();
        assert!(lin.jacobian[0].iter().all(|j| j.is_zero()));
        assert_eq!(lin.constant[0], MvPoly::constant(&5, &v, c.base_delta().unwrap().residue()));
    }

    #[test]
    fn library_is_linear_and_matches_oracle() {
        for p in [2, 3, 5] {
            let s = spec(p);
            for sch in [library::gm_split(&s), library::test_curve(&s), library::hyperelliptic(&s, "x^5 - 1", 2), library::projective_space(&s, 2)] {
                let sch = sch.unwrap();
                for patch in &sch.patches {
                    let jp = jet_presentation(patch).unwrap();
                    let lin = linearize_mod_pi(&jp).unwrap();
                    for (k, g) in jp.generators.iter().enumerate() {
                        assert_eq!(lin.jacobian[k], jacobian_oracle(g));
                        assert_eq!(lin.constant[k], constant_oracle(g).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn lifts_solve_the_linearized_relations() {
        let s = spec(3);
        let e = library::test_curve(&s).unwrap();
        for (i, patch) in e.patches.iter().enumerate() {
            let l = crate::di::local_frobenius_lift(&e, i, None).unwrap();
            let lin = linearize_mod_pi(&jet_presentation(patch).unwrap()).unwrap();
            assert!(lin.evaluate(&patch.ring, &l.values).iter().all(|v| v.is_zero()));
        }
    }

    #[test]
    fn squaring_on_gm_is_etale() {
        for p in [3, 5] {
            let s = spec(p);
            let src = Arc::new(library::gm(&s).unwrap());
            let m = SchemeMorphism::new("sq", src.clone(), src.clone(), &[(0, &[("x", "x^2"), ("u", "u^2")])]).unwrap();
            let r = etale_basechange_check(&m).unwrap();
            assert!(r.bijective);
            assert_eq!(r.points_checked, (p - 1) as usize);
            let id = SchemeMorphism::identity(&src);
            assert!(etale_basechange_check(&id).unwrap().bijective);
        }
    }

    #[test]
    fn squaring_on_the_line_is_not_etale() {
        let s = spec(3);
        let a = Arc::new(library::affine_space(&s, 1).unwrap());
        let m = SchemeMorphism::new("sq", a.clone(), a, &[(0, &[("x", "x^2")])]).unwrap();
        match etale_basechange_check(&m) {
            Err(JetError::NotEtale { point, .. }) => assert_eq!(point, "x = 0"),
            other => panic!("{other:?}"),
        }
    }
}
