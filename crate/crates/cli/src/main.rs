mod format;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ising_core::lattice::{Coord2, Domain, DomainSpec, RectangleSpec, Side};
use ising_core::numerics;
use ising_core::observables::{
    observable_combination_g, two_point_observable, MultiSource, PhaseConvention, SourceSpec, Stub,
};
use ising_core::propagator::{propagator_matrix, spectral_split};
use ising_core::rps::{build_rps_blocks, build_rps_direct, build_rps_kernel, RPSOperator};
use ising_core::shol_core::{
    beta_critical, boundary_line_constraints, solve_rbvp, ComplexField, IsingCoupling, RbvpConstraint, I, ONE,
};
use ising_core::transfer::{FermionInsertion, FermionSystem, InsertionKind};
use ising_core::{Complex64, Error};
use serde_json::json;

use crate::format::{complex, num, nums, real, to_json};
use crate::verify::{Runner, Suite, VerificationReport};

#[derive(Parser)]
#[command(
    name = "ising",
    version,
    about = "Discrete holomorphic observables and transfer matrices of the 2D Ising model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum of the row propagator P_β.
    Propagator(PropagatorArgs),
    /// Two-point or multipoint observable on a domain, as field CSV.
    Observable(ObservableArgs),
    /// Fermion or spin correlation from the transfer matrix, printed as re,im.
    Correlation(CorrelationArgs),
    /// RPS operator on a set of boundary edges, as JSON.
    Rps(RpsArgs),
    /// Gluing formulas on a cut box against the whole-domain observable.
    GlueCheck(GlueArgs),
    /// Run verification suites and write a report.
    Verify(VerifyArgs),
    /// Maximum row-wise difference between two field CSV files.
    Diff(DiffArgs),
}

#[derive(Args)]
struct BetaArg {
    /// Inverse temperature, or "crit" for β_c.
    #[arg(long, default_value = "crit", value_parser = parse_beta)]
    beta: f64,
    /// Shorthand for --beta crit.
    #[arg(long)]
    critical: bool,
}

impl BetaArg {
    fn coupling(&self) -> Result<IsingCoupling, CliError> {
        let beta = if self.critical { beta_critical() } else { self.beta };
        IsingCoupling::new(beta).map_err(CliError::usage)
    }
}

#[derive(Args)]
struct PropagatorArgs {
    /// Number of vertex columns; |I*| = width − 1.
    #[arg(long)]
    width: usize,
    #[command(flatten)]
    beta: BetaArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Up,
    Down,
    Multi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Contour,
    Transfer,
    Rbvp,
}

#[derive(Args)]
struct ObservableArgs {
    /// Domain JSON, inline or as a file path.
    #[arg(long)]
    domain: String,
    #[arg(long, value_enum, default_value = "up")]
    kind: Kind,
    /// Source edge "x2,y2"; for --kind multi, repeat as "x2,y2:up" or "x2,y2:down" for all but the last point.
    #[arg(long, required = true)]
    source: Vec<String>,
    #[arg(long, value_enum, default_value = "contour")]
    method: Method,
    #[command(flatten)]
    beta: BetaArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelationArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Insertion "kind:x2,y2" with kind psi, psibar, psiup, psidown or sigma; applied in the order given.
    #[arg(long = "insert")]
    inserts: Vec<String>,
    #[command(flatten)]
    beta: BetaArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RpsMethodArg {
    Direct,
    Kernel,
    Blocks,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Top,
    Bottom,
    Left,
    Right,
}

#[derive(Args)]
struct RpsArgs {
    #[arg(long)]
    domain: String,
    /// Boundary edges "x2,y2;x2,y2;…"; defaults to every edge of --side.
    #[arg(long)]
    edges: Option<String>,
    #[arg(long, value_enum, default_value = "bottom")]
    side: SideArg,
    #[arg(long, value_enum, default_value = "direct")]
    method: RpsMethodArg,
    #[command(flatten)]
    beta: BetaArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GlueArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Vertex row of the cut, 0 < cut < height − 1.
    #[arg(long)]
    cut: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    beta: BetaArg,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 5)]
    max_width: usize,
    /// Comma-separated β values; "crit" is β_c.
    #[arg(long, default_value = "crit,0.4,0.8")]
    betas: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn usage(e: impl ToString) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Errors from bad input are usage errors; everything else is a failure.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionTooSmall(_)
            | Error::NotSimplyConnected(_)
            | Error::Disconnected
            | Error::DuplicateFace(_)
            | Error::NotAFace(_)
            | Error::BoundaryNotACycle
            | Error::InvalidCut(_)
            | Error::UnknownEdge(_)
            | Error::NearBoundary(_)
            | Error::CapExceeded { .. }
            | Error::InvalidPosition(_)
            | Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_beta(s: &str) -> Result<f64, String> {
    if s.trim().eq_ignore_ascii_case("crit") {
        return Ok(beta_critical());
    }
    let b: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number or \"crit\""))?;
    if !(b.is_finite() && b > 0.0) {
        return Err(format!("β must be positive, got {s}"));
    }
    Ok(b)
}

fn parse_edge(s: &str) -> CliResult<Coord2> {
    s.parse().map_err(CliError::usage)
}

fn load_domain(arg: &str) -> CliResult<(DomainSpec, Domain)> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Usage(format!("{arg}: {e}")))?
    };
    let spec: DomainSpec = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("domain JSON: {e}")))?;
    let d = spec.build()?;
    Ok((spec, d))
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Failure(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_propagator(a: PropagatorArgs) -> CliResult<bool> {
    if a.width < 3 {
        return Err(CliError::Usage(format!("width {} gives |I*| < 2", a.width)));
    }
    let k = a.beta.coupling()?;
    let n = a.width - 1;
    let p = propagator_matrix(n, &k)?;
    let mut lambdas: Vec<f64> = numerics::sym_eig(&p.matrix)?.values.iter().copied().collect();
    lambdas.sort_by(|x, y| y.total_cmp(x));
    let pairing_ok = spectral_split(&p.matrix).is_ok();
    let v = json!({ "n": n, "beta": num(k.beta), "lambdas": nums(lambdas), "pairing_ok": pairing_ok });
    emit(&a.out, &to_json(&v))?;
    Ok(pairing_ok)
}

/// f_a^↑ and f_a^↓ from ⟨ψ(z)ψ̄(a)⟩ = f↑ + i f↓ and ⟨ψ(z)ψ(a)⟩ = −f↑ + i f↓.
fn transfer_observable(
    spec: RectangleSpec,
    d: &Domain,
    a: Coord2,
    kind: Kind,
    k: &IsingCoupling,
) -> CliResult<ComplexField> {
    let sys = FermionSystem::new(spec, k)?;
    let pair = |zk: InsertionKind, z: Coord2, ak: InsertionKind| -> CliResult<Complex64> {
        let fz = FermionInsertion::new(zk, z);
        let fa = FermionInsertion::new(ak, a);
        Ok(if z.y2.div_euclid(2) >= a.y2.div_euclid(2) {
            sys.correlation(&[fz, fa])?
        } else {
            -sys.correlation(&[fa, fz])?
        })
    };
    let mut out = ComplexField::new();
    for &z in d.edges() {
        if z == a {
            continue;
        }
        let pb = pair(InsertionKind::Psi, z, InsertionKind::PsiBar)?;
        let pp = pair(InsertionKind::Psi, z, InsertionKind::Psi)?;
        let v = match kind {
            Kind::Up => (pb - pp) / 2.0,
            _ => (pb + pp) / (2.0 * I),
        };
        out.insert(z, v);
    }
    Ok(out)
}

fn rbvp_observable(d: &Domain, a: Coord2, kind: Kind, k: &IsingCoupling) -> CliResult<ComplexField> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let field = if d.is_boundary(a) {
        if d.boundary_side(a) != Some(Side::Bottom) {
            return Err(CliError::Usage("rbvp method supports boundary sources on the bottom side only".into()));
        }
        let mut cons = boundary_line_constraints(d, &[a]);
        let value = if kind == Kind::Up { ONE } else { Complex64::new(0.0, 0.0) };
        cons.push(RbvpConstraint::FixedValue { edge: a, value });
        solve_rbvp(d, k, &cons)?.field
    } else {
        let mut cons = boundary_line_constraints(d, &[]);
        let value = if kind == Kind::Up { I / two_pi } else { Complex64::from(-1.0 / two_pi) };
        cons.push(RbvpConstraint::Residue { edge: a, value });
        solve_rbvp(d, k, &cons)?.field
    };
    Ok(field.iter().filter(|(z, _)| *z != a).collect())
}

fn parse_multi_source(s: &str) -> CliResult<MultiSource> {
    let (e, o) = s
        .rsplit_once(':')
        .ok_or_else(|| CliError::Usage(format!("multi source {s:?} needs an orientation, e.g. 3,0:up")))?;
    let edge = parse_edge(e)?;
    Ok(match o {
        "up" => MultiSource::up(edge)?,
        "down" => MultiSource::down(edge)?,
        _ => return Err(CliError::Usage(format!("orientation {o:?} is not up or down"))),
    })
}

fn cmd_observable(a: ObservableArgs) -> CliResult<bool> {
    let (spec, d) = load_domain(&a.domain)?;
    let k = a.beta.coupling()?;
    let field = if a.kind == Kind::Multi {
        if a.method != Method::Contour {
            return Err(CliError::Usage("multipoint observables use --method contour".into()));
        }
        let sources: Vec<MultiSource> = a.source.iter().map(|s| parse_multi_source(s)).collect::<CliResult<_>>()?;
        if sources.len() % 2 == 0 {
            return Err(CliError::Usage("multi needs an odd number of fixed sources".into()));
        }
        let mut out = ComplexField::new();
        for &z in d.edges() {
            if sources.iter().any(|s| s.edge == z) {
                continue;
            }
            out.insert(z, observable_combination_g(&d, &sources, z, &k, PhaseConvention::Holomorphic)?);
        }
        out
    } else {
        if a.source.len() != 1 {
            return Err(CliError::Usage("up/down observables take exactly one --source".into()));
        }
        let src = parse_edge(&a.source[0])?;
        if !d.contains_edge(src) {
            return Err(CliError::Usage(format!("source {src} is not an edge of the domain")));
        }
        match a.method {
            Method::Contour => {
                let stub = if a.kind == Kind::Up { Stub::Up } else { Stub::Down };
                two_point_observable(&d, SourceSpec { edge: src, stub }, &k)?
            }
            Method::Transfer => match spec {
                DomainSpec::Rectangle { width, height } => {
                    transfer_observable(RectangleSpec::new(width, height), &d, src, a.kind, &k)?
                }
                DomainSpec::Faces { .. } => {
                    return Err(CliError::Usage("the transfer method needs a rectangle domain".into()))
                }
            },
            Method::Rbvp => rbvp_observable(&d, src, a.kind, &k)?,
        }
    };
    emit(&a.out, &field.to_csv())?;
    Ok(true)
}

fn parse_insertion(s: &str) -> CliResult<FermionInsertion> {
    let (kind, at) =
        s.split_once(':').ok_or_else(|| CliError::Usage(format!("insertion {s:?} should look like psi:3,0")))?;
    let kind = match kind {
        "psi" => InsertionKind::Psi,
        "psibar" => InsertionKind::PsiBar,
        "psiup" => InsertionKind::PsiUp,
        "psidown" => InsertionKind::PsiDown,
        "sigma" => InsertionKind::Sigma,
        _ => return Err(CliError::Usage(format!("unknown insertion kind {kind:?}"))),
    };
    Ok(FermionInsertion::new(kind, parse_edge(at)?))
}

fn cmd_correlation(a: CorrelationArgs) -> CliResult<bool> {
    let k = a.beta.coupling()?;
    let ins: Vec<FermionInsertion> = a.inserts.iter().map(|s| parse_insertion(s)).collect::<CliResult<_>>()?;
    let sys = FermionSystem::new(RectangleSpec::new(a.width, a.height), &k)?;
    println!("{}", complex(sys.correlation(&ins)?));
    Ok(true)
}

fn side_of(s: SideArg) -> Side {
    match s {
        SideArg::Top => Side::Top,
        SideArg::Bottom => Side::Bottom,
        SideArg::Left => Side::Left,
        SideArg::Right => Side::Right,
    }
}

fn cmd_rps(a: RpsArgs) -> CliResult<bool> {
    let (spec, d) = load_domain(&a.domain)?;
    let k = a.beta.coupling()?;
    let b: Vec<Coord2> = match &a.edges {
        Some(list) => list.split(';').filter(|t| !t.trim().is_empty()).map(parse_edge).collect::<CliResult<_>>()?,
        None => {
            let side = side_of(a.side);
            let mut v: Vec<Coord2> = d.boundary_edges().iter().filter(|e| e.side == side).map(|e| e.edge).collect();
            v.sort_by_key(|e| (e.y2, e.x2));
            v
        }
    };
    let op: RPSOperator = match a.method {
        RpsMethodArg::Direct => build_rps_direct(&d, &b, &k)?,
        RpsMethodArg::Kernel => build_rps_kernel(&d, &b, &k)?,
        RpsMethodArg::Blocks => {
            let DomainSpec::Rectangle { width, height } = spec else {
                return Err(CliError::Usage("the blocks method needs a rectangle domain".into()));
            };
            let op = build_rps_blocks(RectangleSpec::new(width, height), &k)?;
            if op.b != b {
                return Err(CliError::Usage("the blocks method covers exactly the bottom row".into()));
            }
            op
        }
    };
    let r = op.report()?;
    let v = json!({
        "b": r.b.iter().map(|e| format!("{},{}", e[0], e[1])).collect::<Vec<_>>(),
        "matrix": r.matrix.iter().map(|row| nums(row.iter().copied())).collect::<Vec<_>>(),
        "method": r.method,
        "cond": num(r.cond),
    });
    emit(&a.out, &to_json(&v))?;
    Ok(true)
}

fn write_report(report: &VerificationReport, path: &Option<PathBuf>) -> CliResult<bool> {
    emit(path, &to_json(&report.to_json()))?;
    if path.is_some() {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("FAIL {}: {} > {}", c.name, real(c.max_abs_err), real(c.tol));
        }
        println!("{}", if report.pass { "PASS" } else { "FAIL" });
    }
    Ok(report.pass)
}

fn cmd_glue_check(a: GlueArgs) -> CliResult<bool> {
    let k = a.beta.coupling()?;
    if a.width < 3 || a.height < 3 || a.cut == 0 || a.cut + 1 >= a.height {
        return Err(CliError::Usage(format!("cannot cut a {}x{} box at row {}", a.width, a.height, a.cut)));
    }
    let mut r = Runner::new(a.tol);
    verify::glue_checks(&mut r, a.width, a.height, a.cut, k.beta);
    let grid = json!({ "width": a.width, "height": a.height, "cut": a.cut, "beta": num(k.beta), "tol": num(a.tol) });
    write_report(&VerificationReport::new(r.checks, grid), &a.report)
}

fn cmd_verify(a: VerifyArgs) -> CliResult<bool> {
    if a.max_width < 3 {
        return Err(CliError::Usage("--max-width must be at least 3".into()));
    }
    if a.tol.is_nan() || a.tol <= 0.0 {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let betas: Vec<f64> = a.betas.split(',').map(parse_beta).collect::<Result<_, _>>().map_err(CliError::Usage)?;
    let report = verify::run(a.suite, a.max_width, &betas, a.tol);
    write_report(&report, &a.report)
}

fn read_field(p: &Path) -> CliResult<ComplexField> {
    let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    Ok(ComplexField::from_csv(&text)?)
}

fn cmd_diff(a: DiffArgs) -> CliResult<bool> {
    let fa = read_field(&a.a)?;
    let fb = read_field(&a.b)?;
    let d = fa.max_diff(&fb);
    if d.is_finite() {
        println!("{}", real(d));
    } else {
        println!("edge sets differ");
    }
    Ok(d <= a.tol)
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("ISING_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("ISING_THREADS={v:?} is not a count")))?;
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Failure(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> CliResult<bool> {
    init_threads()?;
    match cli.command {
        Command::Propagator(a) => cmd_propagator(a),
        Command::Observable(a) => cmd_observable(a),
        Command::Correlation(a) => cmd_correlation(a),
        Command::Rps(a) => cmd_rps(a),
        Command::GlueCheck(a) => cmd_glue_check(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Diff(a) => cmd_diff(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
