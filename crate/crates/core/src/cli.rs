//! Command-line front end. Every command prints one JSON report; the process exit code is
//! 0 on success, 1 on a mathematical negative, 2 on bad input and 3 when a search stopped
//! below its completeness threshold.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::base_ring::{BaseElem, BaseRingConfig, BaseRingError, BaseRingSpec, IntCtx, Integer};
use crate::bounds::{self, BoundsError};
use crate::corpus;
use crate::delta::{DeltaContext, DeltaError};
use crate::di::{self, DiError, MorphismKind};
use crate::jet::{self, JetError};
use crate::library;
use crate::poly::{vars, MvPoly, ParseError};
use crate::scheme::{GluedScheme, MorphismFile, SchemeError, SchemeFile, SchemeMorphism, SchemeRef};
use crate::witt::{PiAlgebra, WittError, WittVec};

pub const SCHEMA: &str = corpus::SCHEMA;

#[derive(Debug, Parser)]
#[command(name = "wf", version, about = "Witt vectors, arithmetic jets and Deligne-Illusie classes")]
pub struct Cli {
    #[command(flatten)]
    pub ring: RingArgs,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RingArgs {
    #[arg(long, global = true, default_value_t = 3)]
    pub p: u64,
    /// Residue field F_q with q = p^m.
    #[arg(long, global = true, default_value_t = 1)]
    pub m: u32,
    /// Precision N of R / pi^N.
    #[arg(long, global = true, default_value_t = 4)]
    pub prec: u32,
    /// Eisenstein polynomial, constant term first, e.g. "-3,0,1" for pi^2 = 3.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eisenstein: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Witt vector arithmetic on integer pairs "a0,a1".
    Witt {
        #[arg(value_enum)]
        op: WittOp,
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: Option<String>,
        /// Coefficients: torsion-free integers or the configured base ring.
        #[arg(long, value_enum, default_value_t = WittRing::Int)]
        ring: WittRing,
    },
    /// Prolongation of an integer polynomial, optionally evaluated at a point.
    Prolong {
        #[arg(allow_hyphen_values = true)]
        poly: String,
        /// Comma separated variable names.
        #[arg(long, default_value = "x")]
        vars: String,
        /// Values of the variables, or of the variables followed by their jets.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
    },
    /// Jet presentation of every patch and its linearization mod pi.
    Jet { scheme: String },
    /// Local Frobenius lifts mod pi^2 on every patch.
    Lift {
        scheme: String,
        #[arg(long)]
        deg_bound: Option<u32>,
    },
    /// The Deligne-Illusie class of a glued scheme.
    Di {
        scheme: String,
        #[arg(long)]
        deg_bound: Option<u32>,
        #[arg(long)]
        pole_bound: Option<u32>,
        /// Exit with 1 when the class does not vanish.
        #[arg(long)]
        expect_zero: bool,
    },
    /// Compatibility of the class with a morphism.
    Compat {
        morphism: String,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Group orders and Frobenius-power bounds.
    Bounds {
        #[arg(long, default_value_t = 1)]
        g: u32,
        #[arg(long, default_value_t = 1)]
        d: u64,
    },
    /// The full criteria run.
    Corpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Writes the built-in schemes and morphisms as JSON files.
    Export {
        #[arg(long, default_value = "schemes")]
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WittOp {
    Add,
    Mul,
    Ghost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WittRing {
    Int,
    Base,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    ClosedImmersion,
    Etale,
    Projection,
}

impl From<KindArg> for MorphismKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::ClosedImmersion => MorphismKind::ClosedImmersion,
            KindArg::Etale => MorphismKind::Etale,
            KindArg::Projection => MorphismKind::Projection,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Input { message: String, position: Option<usize> },
    Negative(String),
    Inconclusive(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Negative(_) => 1,
            CliError::Input { .. } => 2,
            CliError::Inconclusive(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message, position) = match self {
            CliError::Input { message, position } => ("input", message, *position),
            CliError::Negative(m) => ("negative", m, None),
            CliError::Inconclusive(m) => ("inconclusive", m, None),
        };
        let mut e = json!({"kind": kind, "message": message});
        if let Some(p) = position {
            e["position"] = json!(p);
        }
        json!({"schema": SCHEMA, "error": e})
    }
}

fn input(message: impl ToString) -> CliError {
    CliError::Input { message: message.to_string(), position: None }
}

fn parse_error(context: &str, e: &ParseError) -> CliError {
    CliError::Input { message: format!("{context}: {e}"), position: Some(e.pos) }
}

impl From<BaseRingError> for CliError {
    fn from(e: BaseRingError) -> Self {
        input(e)
    }
}

impl From<SchemeError> for CliError {
    fn from(e: SchemeError) -> Self {
        match &e {
            SchemeError::Parse { context, source } => parse_error(context, source),
            _ => input(e),
        }
    }
}

impl From<DiError> for CliError {
    fn from(e: DiError) -> Self {
        match e {
            DiError::Scheme(s) => s.into(),
            DiError::Inconclusive { .. } => CliError::Inconclusive(e.to_string()),
            DiError::NoSolutionAtBound { .. } | DiError::TransitionError(_) => CliError::Negative(e.to_string()),
            _ => input(e),
        }
    }
}

impl From<JetError> for CliError {
    fn from(e: JetError) -> Self {
        match e {
            JetError::NonLinear { .. } | JetError::NotEtale { .. } | JetError::NotUnit(_) => CliError::Negative(e.to_string()),
            _ => input(e),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        input(e)
    }
}

impl From<WittError> for CliError {
    fn from(e: WittError) -> Self {
        input(e)
    }
}

impl From<DeltaError> for CliError {
    fn from(e: DeltaError) -> Self {
        input(e)
    }
}

pub fn base_ring(r: &RingArgs) -> Result<Arc<BaseRingSpec>, CliError> {
    let eisenstein = match &r.eisenstein {
        Some(s) => Some(parse_ints(s, "--eisenstein")?),
        None => None,
    };
    Ok(BaseRingConfig { p: r.p, eisenstein, precision: r.prec, frob_power: r.m }.build()?)
}

fn parse_ints(s: &str, what: &str) -> Result<Vec<i64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|e| input(format!("{what}: {t:?}: {e}"))))
        .collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// A scheme argument: a JSON file or `builtin:NAME`.
pub fn load_scheme(spec: &Arc<BaseRingSpec>, arg: &str) -> Result<GluedScheme, CliError> {
    match arg.strip_prefix("builtin:") {
        Some(name) => Ok(library::by_name(spec, name)?),
        None => Ok(read_json::<SchemeFile>(Path::new(arg))?.build(spec)?),
    }
}

fn resolve(spec: &Arc<BaseRingSpec>, r: &SchemeRef, dir: &Path) -> Result<Arc<GluedScheme>, CliError> {
    let s = match r {
        SchemeRef::Path(p) => load_scheme(spec, &dir.join(p).to_string_lossy())?,
        SchemeRef::Builtin { builtin } => library::by_name(spec, builtin)?,
        SchemeRef::Inline(f) => f.build(spec)?,
    };
    Ok(Arc::new(s))
}

/// A morphism argument: a JSON file or `builtin:NAME`, with its declared kind.
pub fn load_morphism(spec: &Arc<BaseRingSpec>, arg: &str) -> Result<(SchemeMorphism, Option<String>), CliError> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        let nm = library::morphism_by_name(spec, name)?;
        return Ok((nm.morphism, Some(nm.kind.to_string())));
    }
    let path = Path::new(arg);
    let f: MorphismFile = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let src = resolve(spec, &f.source, dir)?;
    let tgt = resolve(spec, &f.target, dir)?;
    Ok((f.build(src, tgt)?, f.kind.clone()))
}

fn report(command: &str, spec: Option<&Arc<BaseRingSpec>>, body: impl Serialize) -> Value {
    let mut v = json!({"schema": SCHEMA, "command": command});
    if let Some(s) = spec {
        v["base_ring"] = serde_json::to_value(s.config()).unwrap();
    }
    v["result"] = serde_json::to_value(body).unwrap();
    v
}

fn strings<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

fn witt_pair<A: PiAlgebra>(s: &str, make: impl Fn(i64) -> A) -> Result<WittVec<A>, CliError> {
    match parse_ints(s, "witt vector")?[..] {
        [a0, a1] => Ok(WittVec::new(make(a0), make(a1))),
        _ => Err(input(format!("witt vector {s:?} must have two components"))),
    }
}

fn witt_op<A: PiAlgebra + std::fmt::Display>(op: WittOp, a: &str, b: Option<&str>, make: impl Fn(i64) -> A) -> Result<Value, CliError> {
    let wa = witt_pair(a, &make)?;
    let need_b = || b.ok_or_else(|| input("a second witt vector is required"));
    let ghost = |w: &WittVec<A>| {
        let g = w.ghost();
        vec![g.0.to_string(), g.1.to_string()]
    };
    Ok(match op {
        WittOp::Ghost => json!({"a": wa.to_string(), "ghost": ghost(&wa)}),
        WittOp::Add | WittOp::Mul => {
            let wb = witt_pair(need_b()?, &make)?;
            let r = if matches!(op, WittOp::Add) { wa.witt_add(&wb)? } else { wa.witt_mul(&wb)? };
            json!({"a": wa.to_string(), "b": wb.to_string(), "result": r.to_string(), "ghost": ghost(&r)})
        }
    })
}

fn prolong(r: &RingArgs, poly: &str, names: &str, at: Option<&str>) -> Result<Value, CliError> {
    let ctx = IntCtx::new(r.p, r.m)?;
    let names: Vec<&str> = names.split(',').map(|s| s.trim()).collect();
    let v = vars(&names);
    let f = MvPoly::<Integer>::parse(&ctx, &v, poly).map_err(|e| parse_error("polynomial", &e))?;
    let dc = DeltaContext::new(&ctx, &v);
    let pf = dc.prolong(&f)?;
    let mut out = json!({"p": r.p, "q": ctx.q, "poly": f.to_string(), "prolongation": pf.to_string()});
    if let Some(at) = at {
        let vals: Vec<Integer> = parse_ints(at, "--at")?.into_iter().map(|n| Integer::new(ctx, n)).collect();
        let n = v.len();
        let pt = match vals.len() {
            k if k == n => {
                let mut pt = vals.clone();
                pt.extend(vals.iter().map(|a| a.fermat_quotient()));
                let direct = f.eval(&vals).fermat_quotient();
                out["delta_of_value"] = json!(direct.to_string());
                pt
            }
            k if k == 2 * n => vals,
            k => return Err(input(format!("--at has {k} values; expected {n} or {}", 2 * n))),
        };
        out["point"] = json!(strings(&pt));
        out["value"] = json!(pf.eval(&pt).to_string());
    }
    Ok(out)
}

fn jet_report(s: &GluedScheme) -> Result<Value, CliError> {
    let mut patches = Vec::new();
    for patch in &s.patches {
        let jp = jet::jet_presentation(patch)?;
        let lin = jet::linearize_mod_pi(&jp)?;
        patches.push(json!({
            "patch": patch.name,
            "vars": jp.ctx.jet_vars().as_slice(),
            "generators": strings(&jp.generators),
            "prolonged": strings(&jp.prolonged),
            "constant_mod_pi": strings(&lin.constant),
            "jacobian_mod_pi": lin.jacobian.iter().map(|r| strings(r)).collect::<Vec<_>>(),
        }));
    }
    Ok(json!({"scheme": s.name, "patches": patches}))
}

fn export(spec: &Arc<BaseRingSpec>, dir: &Path) -> Result<Value, CliError> {
    fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, v: Value| -> Result<String, CliError> {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(&v).unwrap() + "\n";
        fs::write(&path, text).map_err(|e| input(format!("{}: {e}", path.display())))?;
        Ok(path.to_string_lossy().into_owned())
    };
    let mut files = Vec::new();
    let schemes = [
        ("a1_split.json", "A1_split"),
        ("a2_split.json", "A2_split"),
        ("p1.json", "P1"),
        ("p2.json", "P2"),
        ("gm.json", "Gm"),
        ("gm_split.json", "Gm_split"),
        ("e.json", "E"),
        ("genus2.json", "genus2"),
    ];
    for (file, name) in schemes {
        let s = library::by_name(spec, name)?;
        files.push(write(file, serde_json::to_value(SchemeFile::from_scheme(&s)).unwrap())?);
    }
    for name in library::MORPHISM_NAMES {
        let nm = library::morphism_by_name(spec, name)?;
        let m = &nm.morphism;
        let f = MorphismFile::from_morphism(
            m,
            Some(nm.kind),
            SchemeRef::Inline(Box::new(SchemeFile::from_scheme(&m.source))),
            SchemeRef::Inline(Box::new(SchemeFile::from_scheme(&m.target))),
        );
        files.push(write(&format!("morphism_{}.json", name.to_lowercase()), serde_json::to_value(f).unwrap())?);
    }
    Ok(json!({"files": files}))
}

/// Runs one command and returns the report with the exit code.
pub fn run(cli: &Cli) -> Result<(Value, i32), CliError> {
    let r = &cli.ring;
    match &cli.command {
        Command::Witt { op, a, b, ring } => {
            let body = if *ring == WittRing::Int {
                let ctx = IntCtx::new(r.p, r.m)?;
                witt_op(*op, a, b.as_deref(), |n| Integer::new(ctx, n))?
            } else {
                let spec = base_ring(r)?;
                witt_op(*op, a, b.as_deref(), |n| BaseElem::from_int(&spec, n))?
            };
            Ok((report("witt", None, body), 0))
        }
        Command::Prolong { poly, vars, at } => Ok((report("prolong", None, prolong(r, poly, vars, at.as_deref())?), 0)),
        Command::Jet { scheme } => {
            let spec = base_ring(r)?;
            let s = load_scheme(&spec, scheme)?;
            Ok((report("jet", Some(&spec), jet_report(&s)?), 0))
        }
        Command::Lift { scheme, deg_bound } => {
            let spec = base_ring(r)?;
            let s = load_scheme(&spec, scheme)?;
            let lifts = di::local_lifts(&s, *deg_bound)?;
            let mut verified = true;
            for l in &lifts {
                verified &= di::verify_lift(&s.patches[l.patch].ring, &l.values)?;
            }
            let body = json!({"scheme": s.name, "lifts": lifts, "verified": verified});
            Ok((report("lift", Some(&spec), body), if verified { 0 } else { 1 }))
        }
        Command::Di { scheme, deg_bound, pole_bound, expect_zero } => {
            let spec = base_ring(r)?;
            let s = Arc::new(load_scheme(&spec, scheme)?);
            let rep = di::di_class(&s, *deg_bound, *pole_bound)?;
            let code = if (*expect_zero && !rep.vanishes) || rep.witness_verified == Some(false) { 1 } else { 0 };
            Ok((report("di", Some(&spec), rep), code))
        }
        Command::Compat { morphism, kind, seed } => {
            let spec = base_ring(r)?;
            let (m, declared) = load_morphism(&spec, morphism)?;
            let kind: MorphismKind = match (kind, declared) {
                (Some(k), _) => (*k).into(),
                (None, Some(d)) => d.parse()?,
                (None, None) => return Err(input("the morphism kind is not declared; pass --kind")),
            };
            let rep = di::compatibility_check(&m, kind, *seed)?;
            let code = if rep.pass { 0 } else { 1 };
            Ok((report("compat", Some(&spec), rep), code))
        }
        Command::Bounds { g, d } => {
            let e = bounds::e_const(*g, r.p)?;
            let l = if r.p == 5 { 7 } else { 5 };
            let mut body = json!({
                "g": g,
                "p": r.p,
                "d": d,
                "l": l,
                "e": Big(&e),
                "frob_power_bound": bounds::frob_power_bound(*g, r.p, *d)?,
                "abelian_subgroup_bound": Big(&bounds::abelian_subgroup_bound(*g, l)?),
            });
            if *g >= 2 {
                let (holds, curve, ab) = bounds::torelli_noninjective(*g, r.p)?;
                body["torelli"] = json!({"noninjective": holds, "curve_side": curve, "abelian_side": ab});
            }
            Ok((report("bounds", None, body), 0))
        }
        Command::Corpus { seed } => {
            let rep = corpus::run(*seed);
            let code = if rep.pass { 0 } else { 1 };
            Ok((serde_json::to_value(rep).unwrap(), code))
        }
        Command::Export { dir } => {
            let spec = base_ring(r)?;
            Ok((report("export", Some(&spec), export(&spec, dir)?), 0))
        }
    }
}

struct Big<'a>(&'a num_bigint::BigUint);

impl Serialize for Big<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        bounds::ser_big(self.0, s)
    }
}

/// Caps the worker pool at `WF_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("WF_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| input(format!("WF_THREADS={v:?} is not a number")))?;
        if n == 0 {
            return Err(input("WF_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(input)?;
    }
    Ok(())
}

/// Parses arguments, runs, prints the report and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let err = input(e.to_string().trim_end());
            println!("{}", serde_json::to_string_pretty(&err.to_json()).unwrap());
            return err.exit_code();
        }
    };
    let result = configure_threads().and_then(|_| run(&cli));
    let (value, code) = match result {
        Ok(x) => x,
        Err(e) => (e.to_json(), e.exit_code()),
    };
    let text = serde_json::to_string_pretty(&value).unwrap() + "\n";
    print!("{text}");
    if let Some(out) = &cli.out {
        if let Err(e) = fs::write(out, &text) {
            let err = input(format!("{}: {e}", out.display()));
            println!("{}", serde_json::to_string_pretty(&err.to_json()).unwrap());
            return err.exit_code();
        }
    }
    code
}
