//! Glued schemes: affine patches, overlaps presented as localizations, morphisms
//! given chart by chart, and sections of the Frobenius tangent sheaf.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_ring::{BaseElem, BaseRingSpec, Fp};
use crate::poly::{vars, MvPoly, ParseError, Vars};
use crate::ring::{fder_residue, map_into, CoordRing, RingError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("{context}: {source}")]
    Parse { context: String, source: ParseError },
    #[error("{0}")]
    Invalid(String),
}

fn parse_in(ring: &CoordRing, text: &str, context: impl FnOnce() -> String) -> Result<MvPoly<BaseElem>, SchemeError> {
    ring.parse(text).map_err(|source| SchemeError::Parse { context: context(), source })
}

/// An affine patch `R[X, U]/(G, u_k g_k - 1)`.
#[derive(Debug)]
pub struct Patch {
    pub name: String,
    /// declared coordinates, followed in `ring` by one companion per inverted element
    pub coords: Vec<String>,
    pub relations: Vec<MvPoly<BaseElem>>,
    pub inverted: Vec<(String, MvPoly<BaseElem>)>,
    pub ring: CoordRing,
}

impl Patch {
    pub fn new(
        spec: &Arc<BaseRingSpec>,
        name: &str,
        coords: &[&str],
        relations: &[&str],
        inverted: &[(&str, &str)],
    ) -> Result<Self, SchemeError> {
        let mut names: Vec<&str> = coords.to_vec();
        names.extend(inverted.iter().map(|(v, _)| *v));
        let all = vars(&names);
        let parse = |t: &str| {
            MvPoly::parse(spec, &all, t).map_err(|source| SchemeError::Parse { context: format!("patch {name}"), source })
        };
        let rels = relations.iter().map(|r| parse(r)).collect::<Result<Vec<_>, _>>()?;
        let inv = inverted.iter().map(|(v, e)| Ok((v.to_string(), parse(e)?))).collect::<Result<Vec<_>, SchemeError>>()?;
        Self::from_polys(spec, name, coords.iter().map(|s| s.to_string()).collect(), &all, rels, inv)
    }

    pub fn from_polys(
        spec: &Arc<BaseRingSpec>,
        name: &str,
        coords: Vec<String>,
        all: &Vars,
        relations: Vec<MvPoly<BaseElem>>,
        inverted: Vec<(String, MvPoly<BaseElem>)>,
    ) -> Result<Self, SchemeError> {
        let mut full = relations.clone();
        for (v, e) in &inverted {
            let u = MvPoly::var_named(spec, all, v).map_err(|e| SchemeError::Invalid(e.to_string()))?;
            full.push(u.mul(e).sub(&MvPoly::one(spec, all)));
        }
        let ring = CoordRing::new(spec, all, full)?;
        Ok(Self { name: name.to_string(), coords, relations, inverted, ring })
    }

    pub fn vars(&self) -> &Vars {
        self.ring.vars()
    }

    pub fn nvars(&self) -> usize {
        self.ring.nvars()
    }

    /// Indices of the declared coordinates (as opposed to companions of inverted elements).
    pub fn coord_indices(&self) -> Vec<usize> {
        (0..self.coords.len()).collect()
    }
}

/// How an overlap variable is written from one side: `res(num) * inv` with `inv * res(den) = 1`.
#[derive(Debug, Clone)]
pub struct SideExpr {
    pub num: MvPoly<BaseElem>,
    pub den: MvPoly<BaseElem>,
    pub inv: MvPoly<BaseElem>,
}

/// The overlap of patches `i < j`, with restriction maps from both patches.
#[derive(Debug)]
pub struct Overlap {
    pub i: usize,
    pub j: usize,
    pub ring: CoordRing,
    /// images of the variables of patch `i` (index 0) and patch `j` (index 1)
    pub res: [Vec<MvPoly<BaseElem>>; 2],
    pub res_residue: [Vec<MvPoly<Fp>>; 2],
    /// for every overlap variable, its expression from each side
    pub side: [Vec<SideExpr>; 2],
}

impl Overlap {
    pub fn patch(&self, side: usize) -> usize {
        if side == 0 {
            self.i
        } else {
            self.j
        }
    }

    /// Side index of a patch in this overlap.
    pub fn side_of(&self, patch: usize) -> Option<usize> {
        if patch == self.i {
            Some(0)
        } else if patch == self.j {
            Some(1)
        } else {
            None
        }
    }

    pub fn restrict(&self, side: usize, f: &MvPoly<BaseElem>) -> MvPoly<BaseElem> {
        map_into(self.ring.integral(), &self.res[side], f)
    }

    pub fn restrict_residue(&self, side: usize, f: &MvPoly<Fp>) -> MvPoly<Fp> {
        map_into(self.ring.residue(), &self.res_residue[side], f)
    }
}

#[derive(Debug)]
pub struct GluedScheme {
    pub name: String,
    pub spec: Arc<BaseRingSpec>,
    pub patches: Vec<Patch>,
    pub overlaps: Vec<Overlap>,
    /// genus, for curves
    pub genus: Option<u32>,
}

impl GluedScheme {
    pub fn overlap(&self, i: usize, j: usize) -> Option<&Overlap> {
        self.overlaps.iter().find(|o| (o.i == i && o.j == j) || (o.i == j && o.j == i))
    }

    /// Largest total degree among the relations of all patches.
    pub fn max_relation_degree(&self) -> u32 {
        self.patches.iter().flat_map(|p| p.ring.relations().iter().map(|r| r.degree())).max().unwrap_or(1)
    }
}

pub struct OverlapBuilder<'a> {
    scheme_patches: &'a [Patch],
    i: usize,
    j: usize,
    ring: CoordRing,
    res: [Vec<MvPoly<BaseElem>>; 2],
    side: [Vec<Option<SideExpr>>; 2],
}

impl<'a> OverlapBuilder<'a> {
    pub fn new(
        patches: &'a [Patch],
        i: usize,
        j: usize,
        overlap_vars: &[&str],
        relations: &[&str],
    ) -> Result<Self, SchemeError> {
        if i >= patches.len() || j >= patches.len() || i == j {
            return Err(SchemeError::Invalid(format!("overlap ({i}, {j}) does not name two distinct patches")));
        }
        let spec = patches[i].ring.spec().clone();
        let v = vars(overlap_vars);
        let rels = relations
            .iter()
            .map(|r| MvPoly::parse(&spec, &v, r).map_err(|source| SchemeError::Parse { context: format!("overlap ({i}, {j})"), source }))
            .collect::<Result<Vec<_>, _>>()?;
        let ring = CoordRing::new(&spec, &v, rels)?;
        let n = ring.nvars();
        Ok(Self { scheme_patches: patches, i, j, ring, res: [Vec::new(), Vec::new()], side: [vec![None; n], vec![None; n]] })
    }

    fn chart(&self, side: usize) -> &Patch {
        &self.scheme_patches[if side == 0 { self.i } else { self.j }]
    }

    /// Restriction map of one side; variables not listed map to the overlap variable of the same name.
    pub fn restriction(mut self, side: usize, images: &[(&str, &str)]) -> Result<Self, SchemeError> {
        let given: BTreeMap<&str, &str> = images.iter().copied().collect();
        let chart = self.chart(side);
        let mut out = Vec::new();
        for name in chart.vars().iter() {
            let text = match given.get(name.as_str()) {
                Some(t) => t.to_string(),
                None if self.ring.var_index(name).is_some() => name.clone(),
                None => {
                    return Err(SchemeError::Invalid(format!(
                        "overlap ({}, {}): no image given for variable {} of patch {}",
                        self.i, self.j, name, chart.name
                    )))
                }
            };
            out.push(parse_in(&self.ring, &text, || format!("overlap ({}, {}) image of {}", self.i, self.j, name))?);
        }
        for k in given.keys() {
            if !chart.vars().iter().any(|v| v == k) {
                return Err(SchemeError::Invalid(format!("overlap ({}, {}): patch {} has no variable {}", self.i, self.j, chart.name, k)));
            }
        }
        self.res[side] = out;
        Ok(self)
    }

    /// `var = res(num) * inv` with `inv * res(den) = 1`; `num` and `den` are in the patch variables.
    pub fn side_expr(mut self, side: usize, var: &str, num: &str, den: &str, inv: &str) -> Result<Self, SchemeError> {
        let k = self
            .ring
            .var_index(var)
            .ok_or_else(|| SchemeError::Invalid(format!("overlap ({}, {}) has no variable {}", self.i, self.j, var)))?;
        let chart = &self.chart(side).ring;
        let ctx = || format!("overlap ({}, {}) expression for {}", self.i, self.j, var);
        let e = SideExpr { num: parse_in(chart, num, ctx)?, den: parse_in(chart, den, ctx)?, inv: parse_in(&self.ring, inv, ctx)? };
        self.side[side][k] = Some(e);
        Ok(self)
    }

    pub fn build(self) -> Result<Overlap, SchemeError> {
        let mut side: [Vec<SideExpr>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            if self.res[s].is_empty() && self.chart(s).nvars() > 0 {
                return Err(SchemeError::Invalid(format!("overlap ({}, {}): restriction map of side {} missing", self.i, self.j, s)));
            }
            let chart = &self.chart(s).ring;
            for k in 0..self.ring.nvars() {
                let e = match &self.side[s][k] {
                    Some(e) => e.clone(),
                    None => {
                        // a variable that is itself the image of a patch variable
                        let target = self.ring.integral().nf(&self.ring.var(k));
                        let hit = (0..chart.nvars()).find(|&l| self.ring.integral().nf(&self.res[s][l]) == target);
                        match hit {
                            Some(l) => SideExpr {
                                num: chart.var(l),
                                den: MvPoly::one(chart.spec(), chart.vars()),
                                inv: MvPoly::one(self.ring.spec(), self.ring.vars()),
                            },
                            None => {
                                return Err(SchemeError::Invalid(format!(
                                    "overlap ({}, {}): variable {} needs an expression from patch {}",
                                    self.i,
                                    self.j,
                                    self.ring.vars()[k],
                                    self.chart(s).name
                                )))
                            }
                        }
                    }
                };
                side[s].push(e);
            }
        }
        let res_residue = [
            self.res[0].iter().map(|f| self.ring.reduce(f)).collect(),
            self.res[1].iter().map(|f| self.ring.reduce(f)).collect(),
        ];
        Ok(Overlap { i: self.i, j: self.j, ring: self.ring, res: self.res, res_residue, side })
    }
}

/// Outcome of a consistency check.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    fn from_failures(failures: Vec<String>) -> Self {
        Self { ok: failures.is_empty(), failures }
    }
}

/// Checks that restriction maps respect the patch relations and that every overlap
/// variable is the stated fraction on both sides.
pub fn validate_gluing(s: &GluedScheme) -> ValidationReport {
    let mut failures = Vec::new();
    for o in &s.overlaps {
        let ring = o.ring.integral();
        for side in 0..2 {
            let patch = &s.patches[o.patch(side)];
            for r in patch.ring.relations() {
                if !o.restrict(side, r).is_zero() {
                    failures.push(format!("overlap ({}, {}): relation {} of {} does not restrict to zero", o.i, o.j, r, patch.name));
                }
            }
            for (k, e) in o.side[side].iter().enumerate() {
                let v = &o.ring.vars()[k];
                let val = ring.nf(&o.restrict(side, &e.num).mul(&e.inv).sub(&o.ring.var(k)));
                if !val.is_zero() {
                    failures.push(format!("overlap ({}, {}): {} != ({}) / ({}) from {}", o.i, o.j, v, e.num, e.den, patch.name));
                }
                let unit = ring.nf(&o.restrict(side, &e.den).mul(&e.inv).sub(&ring.one()));
                if !unit.is_zero() {
                    failures.push(format!(
                        "overlap ({}, {}): ({}) * ({}) != 1 for {} from {}",
                        o.i, o.j, e.inv, e.den, v, patch.name
                    ));
                }
            }
        }
    }
    ValidationReport::from_failures(failures)
}

/// A morphism given on patch `i` of the source by images of the variables of patch `target` of the target.
#[derive(Debug)]
pub struct ChartMap {
    pub target: usize,
    pub images: Vec<MvPoly<BaseElem>>,
    pub images_residue: Vec<MvPoly<Fp>>,
}

#[derive(Debug)]
pub struct SchemeMorphism {
    pub name: String,
    pub source: Arc<GluedScheme>,
    pub target: Arc<GluedScheme>,
    pub charts: Vec<ChartMap>,
}

impl SchemeMorphism {
    pub fn new(
        name: &str,
        source: Arc<GluedScheme>,
        target: Arc<GluedScheme>,
        charts: &[(usize, &[(&str, &str)])],
    ) -> Result<Self, SchemeError> {
        if charts.len() != source.patches.len() {
            return Err(SchemeError::Invalid(format!(
                "morphism {name}: {} chart maps for {} source patches",
                charts.len(),
                source.patches.len()
            )));
        }
        let mut out = Vec::new();
        for (i, (t, images)) in charts.iter().enumerate() {
            let tp = target
                .patches
                .get(*t)
                .ok_or_else(|| SchemeError::Invalid(format!("morphism {name}: target patch {t} does not exist")))?;
            let sp = &source.patches[i];
            let given: BTreeMap<&str, &str> = images.iter().copied().collect();
            let mut imgs = Vec::new();
            for v in tp.vars().iter() {
                let text = given.get(v.as_str()).ok_or_else(|| {
                    SchemeError::Invalid(format!("morphism {name}: no image for {} on source patch {}", v, sp.name))
                })?;
                imgs.push(parse_in(&sp.ring, text, || format!("morphism {name} image of {v}"))?);
            }
            let images_residue = imgs.iter().map(|f| sp.ring.reduce(f)).collect();
            out.push(ChartMap { target: *t, images: imgs, images_residue });
        }
        Ok(Self { name: name.to_string(), source, target, charts: out })
    }

    pub fn identity(s: &Arc<GluedScheme>) -> Self {
        let charts = s
            .patches
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let images: Vec<_> = (0..p.nvars()).map(|k| p.ring.var(k)).collect();
                let images_residue = images.iter().map(|f| p.ring.reduce(f)).collect();
                let _ = i;
                ChartMap { target: i, images, images_residue }
            })
            .collect();
        Self { name: format!("id_{}", s.name), source: s.clone(), target: s.clone(), charts }
    }

    pub fn is_identity(&self) -> bool {
        Arc::ptr_eq(&self.source, &self.target)
            && self.charts.iter().enumerate().all(|(i, c)| {
                c.target == i && c.images.iter().enumerate().all(|(k, f)| *f == self.source.patches[i].ring.var(k))
            })
    }
}

/// Checks that chart maps respect relations and agree on overlaps (the latter mod pi).
pub fn validate_morphism(m: &SchemeMorphism) -> ValidationReport {
    let mut failures = Vec::new();
    for (i, c) in m.charts.iter().enumerate() {
        let sp = &m.source.patches[i];
        let tp = &m.target.patches[c.target];
        for r in tp.ring.relations() {
            if !map_into(sp.ring.integral(), &c.images, r).is_zero() {
                failures.push(format!("{}: relation {} of {} does not pull back to zero on {}", m.name, r, tp.name, sp.name));
            }
        }
    }
    for o in &m.source.overlaps {
        let (ci, cj) = (&m.charts[o.i], &m.charts[o.j]);
        let res = o.ring.residue();
        if ci.target == cj.target {
            for (k, (a, b)) in ci.images.iter().zip(&cj.images).enumerate() {
                let d = o.ring.integral().nf(&o.restrict(0, a).sub(&o.restrict(1, b)));
                if !d.is_zero() {
                    let v = &m.target.patches[ci.target].vars()[k];
                    failures.push(format!("{}: images of {} disagree on overlap ({}, {})", m.name, v, o.i, o.j));
                }
            }
            continue;
        }
        match crate::di::target_overlap_images(m, o) {
            Err(e) => failures.push(format!("{}: {}", m.name, e)),
            Ok(images) => {
                // the image of each target variable of chart c(j), computed through the target overlap
                let Some(to) = m.target.overlap(ci.target, cj.target) else {
                    failures.push(format!("{}: target patches {} and {} do not overlap", m.name, ci.target, cj.target));
                    continue;
                };
                let bside = to.side_of(cj.target).unwrap();
                for (k, z) in to.res_residue[bside].iter().enumerate() {
                    let via = map_into(res, &images, z);
                    let direct = o.restrict_residue(1, &cj.images_residue[k]);
                    if via != direct {
                        let v = &m.target.patches[cj.target].vars()[k];
                        failures.push(format!("{}: image of {} disagrees across overlap ({}, {})", m.name, v, o.i, o.j));
                    }
                }
            }
        }
    }
    ValidationReport::from_failures(failures)
}

/// `D = sum g_i F^* d/dx_i` on a patch, with coefficients in the residue ring.
#[derive(Debug, Clone, PartialEq)]
pub struct FDerSection {
    pub patch: usize,
    pub coefficients: Vec<MvPoly<Fp>>,
}

/// `sum_i g_i (d f^phi / d x_i)(X^q)`.
pub fn fder_apply(ring: &CoordRing, d: &FDerSection, f: &MvPoly<Fp>) -> MvPoly<Fp> {
    fder_residue(ring.residue(), ring.q(), &d.coefficients, f)
}

/// JSON form of a glued scheme.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SchemeFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genus: Option<u32>,
    pub patches: Vec<PatchFile>,
    #[serde(default)]
    pub overlaps: Vec<OverlapFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PatchFile {
    pub name: String,
    pub vars: Vec<String>,
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default)]
    pub inverted: Vec<InvertedFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InvertedFile {
    pub var: String,
    pub elem: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OverlapFile {
    pub i: usize,
    pub j: usize,
    pub vars: Vec<String>,
    #[serde(default)]
    pub relations: Vec<String>,
    #[serde(default)]
    pub from_i: BTreeMap<String, String>,
    #[serde(default)]
    pub from_j: BTreeMap<String, String>,
    #[serde(default)]
    pub side_i: BTreeMap<String, SideFile>,
    #[serde(default)]
    pub side_j: BTreeMap<String, SideFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SideFile {
    pub num: String,
    pub den: String,
    pub inv: String,
}

impl SchemeFile {
    pub fn build(&self, spec: &Arc<BaseRingSpec>) -> Result<GluedScheme, SchemeError> {
        let mut patches = Vec::new();
        for p in &self.patches {
            let coords: Vec<&str> = p.vars.iter().map(|s| s.as_str()).collect();
            let rels: Vec<&str> = p.relations.iter().map(|s| s.as_str()).collect();
            let inv: Vec<(&str, &str)> = p.inverted.iter().map(|x| (x.var.as_str(), x.elem.as_str())).collect();
            patches.push(Patch::new(spec, &p.name, &coords, &rels, &inv)?);
        }
        let mut overlaps = Vec::new();
        for o in &self.overlaps {
            let (i, j) = if o.i < o.j { (o.i, o.j) } else { (o.j, o.i) };
            let swap = o.i > o.j;
            let v: Vec<&str> = o.vars.iter().map(|s| s.as_str()).collect();
            let rels: Vec<&str> = o.relations.iter().map(|s| s.as_str()).collect();
            let mut b = OverlapBuilder::new(&patches, i, j, &v, &rels)?;
            let (fi, fj) = if swap { (&o.from_j, &o.from_i) } else { (&o.from_i, &o.from_j) };
            let (si, sj) = if swap { (&o.side_j, &o.side_i) } else { (&o.side_i, &o.side_j) };
            let pairs = |m: &BTreeMap<String, String>| m.iter().map(|(a, b)| (a.clone(), b.clone())).collect::<Vec<_>>();
            let (pi, pj) = (pairs(fi), pairs(fj));
            let ri: Vec<(&str, &str)> = pi.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            let rj: Vec<(&str, &str)> = pj.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            b = b.restriction(0, &ri)?.restriction(1, &rj)?;
            for (side, m) in [(0, si), (1, sj)] {
                for (var, e) in m {
                    b = b.side_expr(side, var, &e.num, &e.den, &e.inv)?;
                }
            }
            overlaps.push(b.build()?);
        }
        Ok(GluedScheme { name: self.name.clone(), spec: spec.clone(), patches, overlaps, genus: self.genus })
    }

    pub fn from_scheme(s: &GluedScheme) -> Self {
        let patches = s
            .patches
            .iter()
            .map(|p| PatchFile {
                name: p.name.clone(),
                vars: p.coords.clone(),
                relations: p.relations.iter().map(|r| r.to_string()).collect(),
                inverted: p.inverted.iter().map(|(v, e)| InvertedFile { var: v.clone(), elem: e.to_string() }).collect(),
            })
            .collect();
        let overlaps = s
            .overlaps
            .iter()
            .map(|o| {
                let from = |side: usize| -> BTreeMap<String, String> {
                    let chart = &s.patches[o.patch(side)];
                    chart.vars().iter().cloned().zip(o.res[side].iter().map(|f| f.to_string())).collect()
                };
                let sides = |side: usize| -> BTreeMap<String, SideFile> {
                    o.ring
                        .vars()
                        .iter()
                        .zip(&o.side[side])
                        .map(|(v, e)| (v.clone(), SideFile { num: e.num.to_string(), den: e.den.to_string(), inv: e.inv.to_string() }))
                        .collect()
                };
                OverlapFile {
                    i: o.i,
                    j: o.j,
                    vars: o.ring.vars().iter().cloned().collect(),
                    relations: o.ring.relations().iter().map(|r| r.to_string()).collect(),
                    from_i: from(0),
                    from_j: from(1),
                    side_i: sides(0),
                    side_j: sides(1),
                }
            })
            .collect();
        Self { name: s.name.clone(), genus: s.genus, patches, overlaps }
    }
}

/// JSON form of a morphism; source and target are file paths or inline schemes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MorphismFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub source: SchemeRef,
    pub target: SchemeRef,
    pub charts: Vec<ChartFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SchemeRef {
    Path(String),
    Builtin { builtin: String },
    Inline(Box<SchemeFile>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChartFile {
    pub target: usize,
    pub map: BTreeMap<String, String>,
}

impl MorphismFile {
    pub fn build(&self, source: Arc<GluedScheme>, target: Arc<GluedScheme>) -> Result<SchemeMorphism, SchemeError> {
        let owned: Vec<(usize, Vec<(String, String)>)> =
            self.charts.iter().map(|c| (c.target, c.map.iter().map(|(a, b)| (a.clone(), b.clone())).collect())).collect();
        let borrowed: Vec<Vec<(&str, &str)>> =
            owned.iter().map(|(_, m)| m.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()).collect();
        let charts: Vec<(usize, &[(&str, &str)])> = owned.iter().zip(&borrowed).map(|((t, _), m)| (*t, m.as_slice())).collect();
        SchemeMorphism::new(&self.name, source, target, &charts)
    }

    pub fn from_morphism(m: &SchemeMorphism, kind: Option<&str>, source: SchemeRef, target: SchemeRef) -> Self {
        let charts = m
            .charts
            .iter()
            .map(|c| {
                let tv = m.target.patches[c.target].vars();
                ChartFile { target: c.target, map: tv.iter().cloned().zip(c.images.iter().map(|f| f.to_string())).collect() }
            })
            .collect();
        Self { name: m.name.clone(), kind: kind.map(|s| s.to_string()), source, target, charts }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;

    fn spec(p: u64) -> Arc<BaseRingSpec> {
        BaseRingSpec::unramified(p, 4).unwrap()
    }

    #[test]
    fn library_gluings_are_valid() {
        for p in [2, 3, 5] {
            let s = spec(p);
            for sch in [
                library::projective_space(&s, 1),
                library::projective_space(&s, 2),
                library::affine_space_split(&s, 2),
                library::gm_split(&s),
                library::hyperelliptic(&s, "x^5 - 1", 2),
            ] {
                let sch = sch.unwrap();
                let r = validate_gluing(&sch);
                assert!(r.ok, "{}: {:?}", sch.name, r.failures);
            }
        }
        let s = spec(3);
        let w = library::weierstrass(&s, 1, 0).unwrap();
        assert!(validate_gluing(&w).ok, "{:?}", validate_gluing(&w).failures);
    }

    #[test]
    fn broken_transition_is_reported() {
        let s = spec(3);
        let file = SchemeFile::from_scheme(&library::projective_space(&s, 1).unwrap());
        let mut bad = file.clone();
        // the coordinate of the second chart is sent to u1 itself instead of its inverse
        assert_eq!(bad.overlaps[0].from_j.get("u0").map(|s| s.as_str()), Some("v"));
        bad.overlaps[0].from_j.insert("u0".into(), "u1".into());
        let r = validate_gluing(&bad.build(&s).unwrap());
        assert!(!r.ok);
        assert!(r.failures.iter().any(|f| f.contains("!= 1")), "{:?}", r.failures);
    }

    #[test]
    fn json_roundtrip() {
        let s = spec(5);
        let sch = library::hyperelliptic(&s, "x^5 - 1", 2).unwrap();
        let file = SchemeFile::from_scheme(&sch);
        let text = serde_json::to_string(&file).unwrap();
        let back: SchemeFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let rebuilt = back.build(&s).unwrap();
        assert!(validate_gluing(&rebuilt).ok);
        assert_eq!(rebuilt.genus, Some(2));
    }

    #[test]
    fn fder_examples() {
        let s = BaseRingSpec::unramified(2, 4).unwrap();
        let p = Patch::new(&s, "A1", &["x"], &[], &[]).unwrap();
        let d = FDerSection { patch: 0, coefficients: vec![p.ring.residue().one()] };
        let x = p.ring.reduce(&p.ring.var(0));
        assert_eq!(fder_apply(&p.ring, &d, &x), p.ring.residue().one());
        let x2 = p.ring.residue().mul(&x, &x);
        assert!(fder_apply(&p.ring, &d, &x2).is_zero());
    }

    #[test]
    fn fder_twisted_leibniz() {
        let s = BaseRingSpec::unramified(3, 4).unwrap();
        let p = Patch::new(&s, "C", &["y", "x"], &["y^2 - x^3 - x"], &[]).unwrap();
        let r = &p.ring;
        let res = r.residue();
        // D(y^2 - x^3 - x) = 2 y^3 D(y) - D(x) must vanish
        let d = FDerSection { patch: 0, coefficients: vec![res.one(), r.reduce(&r.parse("2*y^3").unwrap())] };
        let rel = r.relations()[0].residue();
        assert!(fder_apply(r, &d, &rel).is_zero());
        let f = r.reduce(&r.parse("x^2 + y").unwrap());
        let g = r.reduce(&r.parse("x*y - 2").unwrap());
        let lhs = fder_apply(r, &d, &res.mul(&f, &g));
        let rhs = res.nf(&r.frob(&f).mul(&fder_apply(r, &d, &g)).add(&fder_apply(r, &d, &f).mul(&r.frob(&g))));
        assert_eq!(lhs, rhs);
    }
}
