//! Built-in schemes and morphisms.

use std::sync::Arc;

use crate::base_ring::{BaseElem, BaseRingSpec};
use crate::poly::{vars, MvPoly};
use crate::scheme::{GluedScheme, OverlapBuilder, Patch, SchemeError, SchemeMorphism};

fn coord_names(n: usize) -> Vec<String> {
    match n {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..=n).map(|i| format!("x{i}")).collect(),
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

pub fn affine_space(spec: &Arc<BaseRingSpec>, n: usize) -> Result<GluedScheme, SchemeError> {
    let c = coord_names(n);
    let patch = Patch::new(spec, "A", &strs(&c), &[], &[])?;
    Ok(GluedScheme { name: format!("A{n}"), spec: spec.clone(), patches: vec![patch], overlaps: vec![], genus: None })
}

/// The closed subscheme cut out by `relations` in affine space, covered by `D(t)` and `D(t - 1)`
/// where `t` is the first coordinate.
pub fn split_affine(
    spec: &Arc<BaseRingSpec>,
    name: &str,
    coords: &[&str],
    relations: &[&str],
) -> Result<GluedScheme, SchemeError> {
    let t = coords[0];
    let p0 = Patch::new(spec, "D(t)", coords, relations, &[("u", t)])?;
    let p1 = Patch::new(spec, "D(t-1)", coords, relations, &[("w", &format!("{t} - 1"))])?;
    let patches = vec![p0, p1];
    let mut ov: Vec<&str> = coords.to_vec();
    ov.push("z");
    let zrel = format!("z*{t}*({t} - 1) - 1");
    let mut rels: Vec<&str> = relations.to_vec();
    rels.push(&zrel);
    let o = OverlapBuilder::new(&patches, 0, 1, &ov, &rels)?
        .restriction(0, &[("u", &format!("z*({t} - 1)"))])?
        .restriction(1, &[("w", &format!("z*{t}"))])?
        .side_expr(0, "z", "u", &format!("{t} - 1"), &format!("z*{t}"))?
        .side_expr(1, "z", "w", t, &format!("z*({t} - 1)"))?
        .build()?;
    Ok(GluedScheme { name: name.to_string(), spec: spec.clone(), patches, overlaps: vec![o], genus: None })
}

pub fn affine_space_split(spec: &Arc<BaseRingSpec>, n: usize) -> Result<GluedScheme, SchemeError> {
    let c = coord_names(n);
    split_affine(spec, &format!("A{n}_split"), &strs(&c), &[])
}

pub fn gm(spec: &Arc<BaseRingSpec>) -> Result<GluedScheme, SchemeError> {
    let patch = Patch::new(spec, "Gm", &["x"], &[], &[("u", "x")])?;
    Ok(GluedScheme { name: "Gm".into(), spec: spec.clone(), patches: vec![patch], overlaps: vec![], genus: None })
}

/// `G_m` covered by `D(x(x-1))` and `D(x(x-2))`.
pub fn gm_split(spec: &Arc<BaseRingSpec>) -> Result<GluedScheme, SchemeError> {
    let p0 = Patch::new(spec, "D(x(x-1))", &["x"], &[], &[("u", "x^2 - x")])?;
    let p1 = Patch::new(spec, "D(x(x-2))", &["x"], &[], &[("w", "x^2 - 2*x")])?;
    let patches = vec![p0, p1];
    let o = OverlapBuilder::new(&patches, 0, 1, &["x", "z"], &["z*x*(x - 1)*(x - 2) - 1"])?
        .restriction(0, &[("u", "z*(x - 2)")])?
        .restriction(1, &[("w", "z*(x - 1)")])?
        .side_expr(0, "z", "u", "x - 2", "z*x*(x - 1)")?
        .side_expr(1, "z", "w", "x - 1", "z*x*(x - 2)")?
        .build()?;
    Ok(GluedScheme { name: "Gm_split".into(), spec: spec.clone(), patches, overlaps: vec![o], genus: None })
}

/// Projective space with its standard charts; chart `k` has coordinates `u_i = X_i / X_k`.
pub fn projective_space(spec: &Arc<BaseRingSpec>, n: usize) -> Result<GluedScheme, SchemeError> {
    let name = |i: usize| format!("u{i}");
    let mut patches = Vec::new();
    for k in 0..=n {
        let c: Vec<String> = (0..=n).filter(|&i| i != k).map(name).collect();
        patches.push(Patch::new(spec, &format!("X{k}!=0"), &strs(&c), &[], &[])?);
    }
    let mut overlaps = Vec::new();
    for k in 0..=n {
        for l in k + 1..=n {
            let mut ov: Vec<String> = (0..=n).filter(|&i| i != k).map(name).collect();
            ov.push("v".into());
            let (uk, ul) = (name(k), name(l));
            let rel = format!("v*{ul} - 1");
            // chart l sees u_i as X_i / X_l = u_i * v and u_k as v
            let mut res_l: Vec<(String, String)> = Vec::new();
            for i in (0..=n).filter(|&i| i != l) {
                res_l.push((name(i), if i == k { "v".into() } else { format!("{}*v", name(i)) }));
            }
            let res_l_ref: Vec<(&str, &str)> = res_l.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let mut b = OverlapBuilder::new(&patches, k, l, &strs(&ov), &[&rel])?
                .restriction(0, &[])?
                .restriction(1, &res_l_ref)?
                .side_expr(0, "v", "1", &ul, "v")?
                .side_expr(1, &ul, "1", &uk, &ul)?;
            for i in (0..=n).filter(|&i| i != k && i != l) {
                b = b.side_expr(1, &name(i), &name(i), &uk, &ul)?;
            }
            overlaps.push(b.build()?);
        }
    }
    Ok(GluedScheme { name: format!("P{n}"), spec: spec.clone(), patches, overlaps, genus: None })
}

/// The projective closure of `y^2 = x^3 + a x + b`: the affine chart and the chart
/// `Y != 0` with `w = -x/y`, `z = -1/y`.
pub fn weierstrass(spec: &Arc<BaseRingSpec>, a: i64, b: i64) -> Result<GluedScheme, SchemeError> {
    let affine = format!("y^2 - x^3 - ({a})*x - ({b})");
    let p0 = Patch::new(spec, "affine", &["y", "x"], &[&affine], &[])?;
    let infinity = format!("z - w^3 - ({a})*w*z^2 - ({b})*z^3");
    let p1 = Patch::new(spec, "infinity", &["z", "w"], &[&infinity], &[])?;
    let patches = vec![p0, p1];
    let o = OverlapBuilder::new(&patches, 0, 1, &["y", "x", "c"], &[&affine, "c*y - 1"])?
        .restriction(0, &[])?
        .restriction(1, &[("z", "-c"), ("w", "-x*c")])?
        .side_expr(0, "c", "1", "y", "c")?
        .side_expr(1, "y", "-1", "z", "-y")?
        .side_expr(1, "x", "w", "z", "-y")?
        .side_expr(1, "c", "-z", "1", "1")?
        .build()?;
    Ok(GluedScheme { name: format!("E[{a},{b}]"), spec: spec.clone(), patches, overlaps: vec![o], genus: Some(1) })
}

/// `y^2 = x^3 + x`.
pub fn test_curve(spec: &Arc<BaseRingSpec>) -> Result<GluedScheme, SchemeError> {
    weierstrass(spec, 1, 0)
}

/// The smooth model of `y^2 = h(x)` with `deg h = 2g + 1`, glued from the affine chart and
/// the chart at infinity `s = 1/x`, `t = y / x^(g+1)`.
pub fn hyperelliptic(spec: &Arc<BaseRingSpec>, h: &str, g: u32) -> Result<GluedScheme, SchemeError> {
    let xv = vars(&["x"]);
    let hp = MvPoly::<BaseElem>::parse(spec, &xv, h)
        .map_err(|source| SchemeError::Parse { context: "hyperelliptic polynomial".into(), source })?;
    if hp.degree() != 2 * g + 1 {
        return Err(SchemeError::Invalid(format!("{h} does not have degree {}", 2 * g + 1)));
    }
    let st = vars(&["s", "t"]);
    let mut big_h = MvPoly::zero(spec, &st);
    for (m, c) in hp.terms() {
        let e = 2 * g + 2 - m.0[0];
        big_h = big_h.add(&MvPoly::monomial(spec, &st, crate::poly::Monomial(vec![e, 0]), c.clone()));
    }
    let affine = format!("y^2 - ({hp})");
    let infinity = format!("t^2 - ({big_h})");
    let p0 = Patch::new(spec, "affine", &["x", "y"], &[&affine], &[])?;
    let p1 = Patch::new(spec, "infinity", &["s", "t"], &[&infinity], &[])?;
    let patches = vec![p0, p1];
    let e = g + 1;
    let o = OverlapBuilder::new(&patches, 0, 1, &["x", "y", "a"], &[&affine, "a*x - 1"])?
        .restriction(0, &[])?
        .restriction(1, &[("s", "a"), ("t", &format!("y*a^{e}"))])?
        .side_expr(0, "a", "1", "x", "a")?
        .side_expr(1, "x", "1", "s", "x")?
        .side_expr(1, "y", "t", &format!("s^{e}"), &format!("x^{e}"))?
        .build()?;
    Ok(GluedScheme { name: format!("y^2={h}"), spec: spec.clone(), patches, overlaps: vec![o], genus: Some(g) })
}

/// A morphism of built-in schemes together with what kind of map it is.
pub struct NamedMorphism {
    pub kind: &'static str,
    pub morphism: SchemeMorphism,
}

/// The parabola `y = x^2` inside the plane, both split along `x`.
pub fn parabola_immersion(spec: &Arc<BaseRingSpec>) -> Result<NamedMorphism, SchemeError> {
    let src = Arc::new(split_affine(spec, "parabola", &["x", "y"], &["y - x^2"])?);
    let tgt = Arc::new(affine_space_split(spec, 2)?);
    let m = SchemeMorphism::new(
        "parabola->A2",
        src,
        tgt,
        &[(0, &[("x", "x"), ("y", "y"), ("u", "u")]), (1, &[("x", "x"), ("y", "y"), ("w", "w")])],
    )?;
    Ok(NamedMorphism { kind: "closed_immersion", morphism: m })
}

/// `(x, y) -> x`.
pub fn plane_projection(spec: &Arc<BaseRingSpec>) -> Result<NamedMorphism, SchemeError> {
    let src = Arc::new(affine_space_split(spec, 2)?);
    let tgt = Arc::new(affine_space_split(spec, 1)?);
    let m = SchemeMorphism::new("A2->A1", src, tgt, &[(0, &[("x", "x"), ("u", "u")]), (1, &[("x", "x"), ("w", "w")])])?;
    Ok(NamedMorphism { kind: "projection", morphism: m })
}

/// `x -> x^2` on `G_m`, etale away from 2.
pub fn gm_square(spec: &Arc<BaseRingSpec>) -> Result<NamedMorphism, SchemeError> {
    let src = Arc::new(gm_split(spec)?);
    let tgt = Arc::new(gm(spec)?);
    let m = SchemeMorphism::new(
        "Gm-square",
        src,
        tgt,
        &[(0, &[("x", "x^2"), ("u", "u^2*(x - 1)^2")]), (0, &[("x", "x^2"), ("u", "w^2*(x - 2)^2")])],
    )?;
    Ok(NamedMorphism { kind: "etale", morphism: m })
}

/// The Weierstrass curve `y^2 = x^3 + a x + b` in the projective plane.
pub fn weierstrass_in_plane(spec: &Arc<BaseRingSpec>, a: i64, b: i64) -> Result<NamedMorphism, SchemeError> {
    let src = Arc::new(weierstrass(spec, a, b)?);
    let tgt = Arc::new(projective_space(spec, 2)?);
    let m = SchemeMorphism::new(
        "E->P2",
        src,
        tgt,
        &[(2, &[("u0", "x"), ("u1", "y")]), (1, &[("u0", "-w"), ("u2", "-z")])],
    )?;
    Ok(NamedMorphism { kind: "closed_immersion", morphism: m })
}

/// The four morphisms of the compatibility corpus.
pub fn compat_corpus(spec: &Arc<BaseRingSpec>) -> Result<Vec<NamedMorphism>, SchemeError> {
    Ok(vec![parabola_immersion(spec)?, plane_projection(spec)?, gm_square(spec)?, weierstrass_in_plane(spec, 1, 0)?])
}

/// Looks up a built-in morphism: `parabola`, `projection`, `gm_square`, `E_in_P2`.
pub fn morphism_by_name(spec: &Arc<BaseRingSpec>, name: &str) -> Result<NamedMorphism, SchemeError> {
    match name {
        "parabola" => parabola_immersion(spec),
        "projection" => plane_projection(spec),
        "gm_square" => gm_square(spec),
        "E_in_P2" => weierstrass_in_plane(spec, 1, 0),
        _ => Err(SchemeError::Invalid(format!("unknown built-in morphism {name}"))),
    }
}

pub const MORPHISM_NAMES: [&str; 4] = ["parabola", "projection", "gm_square", "E_in_P2"];

/// Looks up a built-in scheme by name: `A<n>`, `A<n>_split`, `P<n>`, `Gm`, `Gm_split`,
/// `E` (the test curve), `E[a,b]`, `genus2` (`y^2 = x^5 - 1`).
pub fn by_name(spec: &Arc<BaseRingSpec>, name: &str) -> Result<GluedScheme, SchemeError> {
    let num = |s: &str| s.parse::<usize>().map_err(|_| SchemeError::Invalid(format!("unknown built-in scheme {name}")));
    if let Some(rest) = name.strip_prefix('A') {
        if let Some(n) = rest.strip_suffix("_split") {
            return affine_space_split(spec, num(n)?);
        }
        return affine_space(spec, num(rest)?);
    }
    if let Some(rest) = name.strip_prefix('P') {
        return projective_space(spec, num(rest)?);
    }
    match name {
        "Gm" => gm(spec),
        "Gm_split" => gm_split(spec),
        "E" => test_curve(spec),
        "genus2" => hyperelliptic(spec, "x^5 - 1", 2),
        _ => {
            if let Some(ab) = name.strip_prefix("E[").and_then(|s| s.strip_suffix(']')) {
                let parts: Vec<&str> = ab.split(',').map(|s| s.trim()).collect();
                if let [a, b] = parts[..] {
                    if let (Ok(a), Ok(b)) = (a.parse(), b.parse()) {
                        return weierstrass(spec, a, b);
                    }
                }
            }
            Err(SchemeError::Invalid(format!("unknown built-in scheme {name}")))
        }
    }
}
