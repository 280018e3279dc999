//! Cross-verification suites behind `ising verify` and `ising glue-check`.

use std::time::Instant;

use clap::ValueEnum;
use ising_core::lattice::{build_rectangle, Coord2, CutSpec, Domain, RectangleSpec};
use ising_core::numerics::{self, max_abs, pfaffian, ComplexMatrix, RealMatrix};
use ising_core::observables::{
    multipoint_observable, partition_function_contour, two_point_observable, EnumOptions, MultiSource, PhaseConvention,
    SourceSpec, Stub,
};
use ising_core::propagator::{gamma_spectrum, involution_j, propagator_matrix, spectral_split};
use ising_core::rps::{
    build_rps_blocks, build_rps_direct, build_rps_kernel, kernel_field, kernel_field_contour, GlueSetup, Piece,
};
use ising_core::shol_core::{ComplexField, IsingCoupling, I};
use ising_core::transfer::*;
use ising_core::{Complex64, Error, Result};
use serde_json::{json, Value};

use crate::format::{num, nums};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Propagator,
    InducedRotation,
    Spectrum,
    Correlations,
    Pfaffian,
    Rps,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Propagator => "propagator",
            Suite::InducedRotation => "induced-rotation",
            Suite::Spectrum => "spectrum",
            Suite::Correlations => "correlations",
            Suite::Pfaffian => "pfaffian",
            Suite::Rps => "rps",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub max_abs_err: f64,
    pub tol: f64,
    pub pass: bool,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
    pub grid: Value,
}

impl VerificationReport {
    pub fn new(checks: Vec<Check>, grid: Value) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerificationReport { checks, pass, grid }
    }

    pub fn to_json(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut v = json!({
                    "name": c.name,
                    "max_abs_err": num(c.max_abs_err),
                    "tol": num(c.tol),
                    "pass": c.pass,
                    "wall_time_s": num(c.wall_time_s),
                });
                if let Some(e) = &c.error {
                    v["error"] = Value::String(e.clone());
                }
                v
            })
            .collect();
        json!({ "pass": self.pass, "grid": self.grid, "checks": checks })
    }
}

/// Collects timed checks against one tolerance.
pub struct Runner {
    tol: f64,
    pub checks: Vec<Check>,
}

impl Runner {
    pub fn new(tol: f64) -> Self {
        Runner { tol, checks: Vec::new() }
    }

    pub fn check(&mut self, name: String, f: impl FnOnce() -> Result<f64>) {
        self.check_tol(name, self.tol, f)
    }

    pub fn check_tol(&mut self, name: String, tol: f64, f: impl FnOnce() -> Result<f64>) {
        let t = Instant::now();
        let r = f();
        self.record(name, tol, r, t.elapsed().as_secs_f64());
    }

    pub fn record(&mut self, name: String, tol: f64, r: Result<f64>, wall_time_s: f64) {
        let check = match r {
            Ok(e) => Check { name, max_abs_err: e, tol, pass: e <= tol, wall_time_s, error: None },
            Err(e) => {
                Check { name, max_abs_err: f64::INFINITY, tol, pass: false, wall_time_s, error: Some(e.to_string()) }
            }
        };
        self.checks.push(check);
    }
}

fn rect(w: usize, h: usize) -> Result<Domain> {
    build_rectangle(RectangleSpec::new(w, h))
}

fn beta_label(beta: f64) -> String {
    if beta == ising_core::shol_core::beta_critical() {
        "crit".into()
    } else {
        format!("{beta}")
    }
}

fn propagator_checks(r: &mut Runner, w: usize, beta: f64) {
    let n = w - 1;
    let b = beta_label(beta);
    let p = || -> Result<RealMatrix> { Ok(propagator_matrix(n, &IsingCoupling::new(beta)?)?.matrix) };
    r.check(format!("propagator.symmetric n={n} beta={b}"), || {
        let p = p()?;
        Ok(max_abs(&(&p - p.transpose())))
    });
    r.check(format!("propagator.reciprocal-pairs n={n} beta={b}"), || {
        let p = p()?;
        let split = spectral_split(&p)?;
        let v = numerics::sym_eig(&p)?.values;
        let dim = v.len();
        let mut e: f64 = 0.0;
        for i in 0..split.n {
            e = e.max((v[i] * v[dim - 1 - i] - 1.0).abs());
        }
        Ok(e)
    });
    r.check(format!("propagator.inverse-is-jpj n={n} beta={b}"), || {
        let p = p()?;
        let j = involution_j(n);
        Ok(max_abs(&(numerics::inverse(&p)? - &j * &p * &j)))
    });
}

fn induced_rotation_checks(r: &mut Runner, w: usize, beta: f64) {
    r.check(format!("induced-rotation.three-way w={w} beta={}", beta_label(beta)), || {
        let k = IsingCoupling::new(beta)?;
        let b = SpinBasis::new(w)?;
        let brute = induced_rotation_bruteforce(&build_v(b, &k), b)?;
        let closed = induced_rotation_closed_form(b.n(), &k)?;
        let prop = propagator_matrix(b.n(), &k)?.complexified().matrix;
        Ok(max_abs(&(&brute - &closed)).max(max_abs(&(&brute - &prop))).max(max_abs(&(&closed - &prop))))
    });
}

fn spectrum_checks(r: &mut Runner, w: usize, beta: f64) {
    let bl = beta_label(beta);
    r.check(format!("spectrum.gamma-relative w={w} beta={bl}"), || {
        let k = IsingCoupling::new(beta)?;
        let b = SpinBasis::new(w)?;
        let spec = tm_spectrum(&build_v(b, &k))?;
        let split = spectral_split(&propagator_matrix(b.n(), &k)?.matrix)?;
        let g = gamma_spectrum(&split.lambdas, spec[0]);
        if g.len() != spec.len() {
            return Err(Error::DimensionMismatch(format!("{} vs {} eigenvalues", spec.len(), g.len())));
        }
        Ok(spec.iter().zip(&g).map(|(a, e)| (a - e).abs() / e.abs()).fold(0.0, f64::max))
    });
    r.check(format!("spectrum.ladder-relative w={w} beta={bl}"), || {
        let k = IsingCoupling::new(beta)?;
        let b = SpinBasis::new(w)?;
        let v = build_v(b, &k);
        let split = spectral_split(&propagator_matrix(b.n(), &k)?.matrix)?;
        let (top, vac) = physical_vacuum(&v)?;
        let vac = vac.map(Complex64::from);
        let vc = v.matrix.map(Complex64::from);
        let mut e: f64 = 0.0;
        for (coef, t) in eigenoperators(&split) {
            let av = linear_operator(b, &coef)? * &vac;
            let scale = t * top * av.norm().max(1.0);
            e = e.max(((&vc * &av) - &av * Complex64::from(t * top)).norm() / scale);
        }
        Ok(e)
    });
}

/// Transfer-matrix pair with the time ordering of the contour observables.
fn tm_pair(sys: &FermionSystem, zk: InsertionKind, z: Coord2, ak: InsertionKind, a: Coord2) -> Result<Complex64> {
    let fz = FermionInsertion::new(zk, z);
    let fa = FermionInsertion::new(ak, a);
    if z.y2.div_euclid(2) >= a.y2.div_euclid(2) {
        sys.correlation(&[fz, fa])
    } else {
        Ok(-sys.correlation(&[fa, fz])?)
    }
}

pub fn two_point_error(w: usize, h: usize, k: &IsingCoupling) -> Result<f64> {
    use InsertionKind::{Psi, PsiBar};
    let d = rect(w, h)?;
    let sys = FermionSystem::new(RectangleSpec::new(w, h), k)?;
    let mut e: f64 = 0.0;
    for j in 0..w - 1 {
        let a = Coord2::new(2 * j as i32 + 1, 0);
        let fu = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Up }, k)?;
        let fd = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Down }, k)?;
        for (z, u) in fu.iter() {
            let dn = fd.get(z).ok_or(Error::MissingValue(z))?;
            e = e.max((tm_pair(&sys, Psi, z, PsiBar, a)? - (u + I * dn)).norm());
            e = e.max((tm_pair(&sys, Psi, z, Psi, a)? - (-u + I * dn)).norm());
            e = e.max((tm_pair(&sys, PsiBar, z, PsiBar, a)? - (u.conj() + I * dn.conj())).norm());
        }
    }
    Ok(e)
}

fn correlation_checks(r: &mut Runner, w: usize, beta: f64) {
    let bl = beta_label(beta);
    for h in 2..=4 {
        r.check(format!("correlations.two-point w={w} h={h} beta={bl}"), || {
            two_point_error(w, h, &IsingCoupling::new(beta)?)
        });
        r.check(format!("correlations.partition-relative w={w} h={h} beta={bl}"), || {
            let k = IsingCoupling::new(beta)?;
            let tm = partition_function_tm(RectangleSpec::new(w, h), &k)?;
            let edges = h * (w - 1) + (h - 1) * w;
            let contour = partition_function_contour(&rect(w, h)?, &k)? * (beta * edges as f64).exp();
            Ok((tm - contour).abs() / tm)
        });
    }
    r.check(format!("correlations.operator-sholomorphicity w={w} h=3 beta={bl}"), || {
        let sys = FermionSystem::new(RectangleSpec::new(w, 3), &IsingCoupling::new(beta)?)?;
        let n = w as i32 - 1;
        let mut e: f64 = 0.0;
        for y in 0..2 {
            for x in 0..n {
                e = e.max(sys.operator_face_residual(Coord2::new(2 * x + 1, 2 * y + 1))?);
            }
            e = e.max(sys.operator_boundary_residual(Coord2::new(0, 2 * y + 1))?);
            e = e.max(sys.operator_boundary_residual(Coord2::new(2 * n, 2 * y + 1))?);
        }
        for j in 0..n {
            e = e.max(sys.bottom_state_residual(Coord2::new(2 * j + 1, 0))?);
        }
        Ok(e)
    });
}

fn pf_pairs(n: usize, pair: impl Fn(usize, usize) -> Result<Complex64>) -> Result<Complex64> {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = pair(i, j)?;
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    pfaffian(&m)
}

fn pfaffian_checks(r: &mut Runner, w: usize, beta: f64) {
    let bl = beta_label(beta);
    r.check(format!("pfaffian.fermions w={w} h=3 beta={bl}"), || {
        let sys = FermionSystem::new(RectangleSpec::new(w, 3), &IsingCoupling::new(beta)?)?;
        let edges = rect(w, 3)?.edges().to_vec();
        let kinds = [InsertionKind::Psi, InsertionKind::PsiBar, InsertionKind::PsiUp, InsertionKind::PsiDown];
        let mut e: f64 = 0.0;
        for m in [4, 6] {
            for shift in 0..6 {
                let ins: Vec<FermionInsertion> = (0..m)
                    .map(|i| FermionInsertion::new(kinds[(i + shift) % 4], edges[(5 * i + 3 * shift) % edges.len()]))
                    .collect();
                let full = sys.correlation(&ins)?;
                let pf = pf_pairs(m, |i, j| sys.correlation(&[ins[i], ins[j]]))?;
                e = e.max((full - pf).norm());
            }
        }
        Ok(e)
    });
    r.check(format!("pfaffian.multipoint w={w} h=4 beta={bl}"), || {
        let k = IsingCoupling::new(beta)?;
        let d = rect(w, 4)?;
        let n = w as i32 - 1;
        let picks = [
            [(1, 0, true), (n * 2 - 1, 2, false), (3, 4, true), (1, 6, true)],
            [(3, 0, true), (1, 2, true), (n * 2 - 1, 2, false), (3, 4, false)],
        ];
        let mut e: f64 = 0.0;
        for p in picks {
            let s: Vec<MultiSource> = p
                .iter()
                .map(|&(x, y, up)| {
                    let z = Coord2::new(x, y);
                    if up {
                        MultiSource::up(z)
                    } else {
                        MultiSource::down(z)
                    }
                })
                .collect::<Result<_>>()?;
            let f = multipoint_observable(&d, &s, &k, PhaseConvention::Operator)?;
            let pf = pf_pairs(4, |i, j| multipoint_observable(&d, &[s[i], s[j]], &k, PhaseConvention::Operator))?;
            e = e.max((f - pf).norm());
        }
        Ok(e)
    });
}

/// The whole-domain observable f_Ω(x, ·): contour sum when within the cap, RBVP otherwise.
pub fn whole_domain_oracle(d: &Domain, x: Coord2, k: &IsingCoupling) -> Result<(ComplexField, &'static str)> {
    match kernel_field_contour(d, x, k, EnumOptions::default()) {
        Ok(f) => Ok((f, "contour")),
        Err(Error::CapExceeded { .. }) => Ok((kernel_field(d, x, k)?, "rbvp")),
        Err(e) => Err(e),
    }
}

fn rps_three_way(w: usize, h: usize, k: &IsingCoupling) -> Result<f64> {
    let d = rect(w, h)?;
    let b: Vec<Coord2> = (0..w as i32 - 1).map(|j| Coord2::new(2 * j + 1, 0)).collect();
    let direct = build_rps_direct(&d, &b, k)?;
    let blocks = build_rps_blocks(RectangleSpec::new(w, h), k)?;
    let mut e = (&direct.matrix - &blocks.matrix).abs().max();
    match build_rps_kernel(&d, &b, k) {
        Ok(kernel) => e = e.max((&direct.matrix - &kernel.matrix).abs().max()),
        Err(Error::CapExceeded { .. }) => {}
        Err(err) => return Err(err),
    }
    Ok(e)
}

/// Gluing errors on one cut: (pair_across, pair_same_side, observable_on_cut, cond).
pub fn gluing_errors(w: usize, h: usize, row: usize, k: &IsingCoupling) -> Result<([f64; 3], f64, &'static str)> {
    let d = rect(w, h)?;
    let s = GlueSetup::new(&d, CutSpec { row }, k)?;
    let mut e = [0.0f64; 3];
    let mut which = "contour";
    for j in 0..w as i32 - 1 {
        let x = Coord2::new(2 * j + 1, 0);
        let (oracle, w) = whole_domain_oracle(&d, x, k)?;
        which = w;
        let at = |y: Coord2| oracle.value(y);
        for &y in s.upper.edges() {
            e[0] = e[0].max((s.pair_across(x, y)? - at(y)?).norm());
        }
        for &y in s.lower.edges() {
            if y != x && !s.b.contains(&y) {
                e[1] = e[1].max((s.pair_same_side(x, y)? - at(y)?).norm());
            }
        }
        let f1 = s.source_field(Piece::Lower, x)?;
        let restriction: Vec<Complex64> = s.b.iter().map(|&y| f1.value(y)).collect::<Result<_>>()?;
        for (v, &y) in s.observable_on_cut(&restriction)?.iter().zip(&s.b) {
            e[2] = e[2].max((*v - at(y)?).norm());
        }
    }
    Ok((e, s.glue.cond, which))
}

/// Checks for one split box, shared by the rps suite and glue-check.
/// The three errors come from one pass and share its wall time.
pub fn glue_checks(r: &mut Runner, w: usize, h: usize, row: usize, beta: f64) {
    let bl = beta_label(beta);
    let tag = format!("w={w} h={h} cut={row} beta={bl}");
    let t = Instant::now();
    let res = IsingCoupling::new(beta).and_then(|k| gluing_errors(w, h, row, &k));
    let dt = t.elapsed().as_secs_f64();
    match res {
        Ok((e, cond, oracle)) => {
            for (name, err) in ["pair_across", "pair_same_side", "observable_on_cut"].iter().zip(e) {
                r.record(format!("rps.{name}[{oracle}] {tag}"), r.tol, Ok(err), dt);
            }
            r.record(format!("rps.glue-cond {tag}"), 1e6, Ok(cond), dt);
        }
        Err(err) => r.record(format!("rps.gluing {tag}"), r.tol, Err(err), dt),
    }
}

fn rps_checks(r: &mut Runner, w: usize, beta: f64) {
    for h in 2..=5 {
        r.check(format!("rps.three-way w={w} h={h} beta={}", beta_label(beta)), || {
            rps_three_way(w, h, &IsingCoupling::new(beta)?)
        });
    }
    for row in [2, 3] {
        glue_checks(r, w, 5, row, beta);
    }
}

pub fn run(suite: Suite, max_width: usize, betas: &[f64], tol: f64) -> VerificationReport {
    let mut r = Runner::new(tol);
    let want = |s: Suite| suite == s || suite == Suite::All;
    for &beta in betas {
        for w in 3..=max_width {
            if want(Suite::Propagator) {
                propagator_checks(&mut r, w, beta);
            }
            if want(Suite::InducedRotation) {
                induced_rotation_checks(&mut r, w, beta);
            }
            if want(Suite::Spectrum) {
                spectrum_checks(&mut r, w, beta);
            }
            if want(Suite::Correlations) {
                correlation_checks(&mut r, w, beta);
            }
            if want(Suite::Pfaffian) {
                pfaffian_checks(&mut r, w, beta);
            }
            if want(Suite::Rps) {
                rps_checks(&mut r, w, beta);
            }
        }
    }
    let grid = json!({
        "suite": suite.name(),
        "max_width": max_width,
        "betas": nums(betas.iter().copied()),
        "tol": num(tol),
    });
    VerificationReport::new(r.checks, grid)
}
