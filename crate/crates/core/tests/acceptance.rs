mod common;

use std::io::Write;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ising_core::lattice::{build_rectangle, Coord2, CutSpec, Domain, RectangleSpec};
use ising_core::numerics::{self, max_abs, pfaffian, ComplexMatrix};
use ising_core::observables::*;
use ising_core::propagator::{gamma_spectrum, involution_j, propagator_matrix, spectral_split};
use ising_core::rps::{build_rps_blocks, build_rps_direct, build_rps_kernel, kernel_field_contour, GlueSetup, Piece};
use ising_core::shol_core::*;
use ising_core::transfer::*;
use ising_core::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    err: f64,
    tol: f64,
    ok: bool,
    info: Vec<String>,
}

impl Outcome {
    fn new(tol: f64) -> Self {
        Outcome { err: 0.0, tol, ok: true, info: Vec::new() }
    }

    /// Records an absolute error against the criterion tolerance.
    fn err(&mut self, e: f64) {
        self.err_tol(e, self.tol);
    }

    /// Records an error that has its own tolerance.
    fn err_tol(&mut self, e: f64, tol: f64) {
        if e.is_nan() || e > tol {
            self.ok = false;
        }
        if tol == self.tol {
            self.err = self.err.max(e);
        }
    }

    fn require(&mut self, cond: bool, what: &str) {
        if !cond {
            self.ok = false;
            self.info.push(format!("failed: {what}"));
        }
    }
}

fn rect(w: usize, h: usize) -> Domain {
    build_rectangle(RectangleSpec::new(w, h)).unwrap()
}

fn coupling(beta: f64) -> IsingCoupling {
    IsingCoupling::new(beta).unwrap()
}

fn propagator_structure() -> Outcome {
    let mut o = Outcome::new(1e-12);
    for n in 2..=8 {
        for beta in common::beta_grid() {
            let p = propagator_matrix(n, &coupling(beta)).unwrap().matrix;
            o.err(max_abs(&(&p - p.transpose())));
            let eig = numerics::sym_eig(&p).unwrap();
            o.require(eig.values.iter().all(|v| *v > 0.0), "positive spectrum");
            let v = &eig.values;
            let dim = v.len();
            for i in 0..n {
                let (small, large) = (v[i], v[dim - 1 - i]);
                o.err_tol((small * large - 1.0).abs(), 1e-8);
            }
            for i in 0..dim - 1 {
                o.require(v[i + 1] - v[i] > 1e-9, "distinct eigenvalues");
            }
            o.require(v.iter().all(|x| (x - 1.0).abs() > 1e-9), "1 is not an eigenvalue");
            o.require(spectral_split(&p).is_ok(), "spectral split");
            let j = involution_j(n);
            let inv = numerics::inverse(&p).unwrap();
            o.err_tol(max_abs(&(inv - &j * &p * &j)), 1e-10);
        }
    }
    o
}

fn induced_rotation() -> Outcome {
    let mut o = Outcome::new(1e-10);
    for w in 3..=6 {
        for beta in common::beta_grid() {
            let k = coupling(beta);
            let b = SpinBasis::new(w).unwrap();
            let brute = induced_rotation_bruteforce(&build_v(b, &k), b).unwrap();
            let closed = induced_rotation_closed_form(b.n(), &k).unwrap();
            let prop = propagator_matrix(b.n(), &k).unwrap().complexified().matrix;
            o.err(max_abs(&(&brute - &closed)));
            o.err(max_abs(&(&brute - &prop)));
            o.err(max_abs(&(&closed - &prop)));
        }
    }
    o
}

fn spectrum_theorem() -> Outcome {
    let mut o = Outcome::new(1e-8);
    for w in 3..=6 {
        for beta in common::beta_grid() {
            let k = coupling(beta);
            let b = SpinBasis::new(w).unwrap();
            let spec = tm_spectrum(&build_v(b, &k)).unwrap();
            let split = spectral_split(&propagator_matrix(b.n(), &k).unwrap().matrix).unwrap();
            let g = gamma_spectrum(&split.lambdas, spec[0]);
            o.require(spec.len() == g.len(), "multiset sizes");
            for (a, e) in spec.iter().zip(&g) {
                o.err((a - e).abs() / e.abs());
            }
        }
    }
    o
}

fn ladder() -> Outcome {
    let mut o = Outcome::new(1e-8);
    for w in 3..=6 {
        for beta in common::beta_grid() {
            let k = coupling(beta);
            let b = SpinBasis::new(w).unwrap();
            let v = build_v(b, &k);
            let split = spectral_split(&propagator_matrix(b.n(), &k).unwrap().matrix).unwrap();
            let (top, vac) = physical_vacuum(&v).unwrap();
            let vac = vac.map(Complex64::from);
            let vc = v.matrix.map(Complex64::from);
            for (coef, t) in eigenoperators(&split) {
                let av = linear_operator(b, &coef).unwrap() * &vac;
                let scale = t * top * av.norm().max(1.0);
                o.err(((&vc * &av) - &av * Complex64::from(t * top)).norm() / scale);
            }
        }
    }
    o
}

/// Two-point functions with the time ordering used by the contour observables.
fn tm_pair(sys: &FermionSystem, zk: InsertionKind, z: Coord2, ak: InsertionKind, a: Coord2) -> Complex64 {
    let row = |e: Coord2| e.y2.div_euclid(2);
    let fz = FermionInsertion::new(zk, z);
    let fa = FermionInsertion::new(ak, a);
    if row(z) >= row(a) {
        sys.correlation(&[fz, fa]).unwrap()
    } else {
        -sys.correlation(&[fa, fz]).unwrap()
    }
}

fn two_point_correspondence() -> Outcome {
    use InsertionKind::{Psi, PsiBar};
    let mut o = Outcome::new(1e-10);
    let mut literal: f64 = 0.0;
    for w in 3..=5 {
        for h in 2..=4 {
            for beta in [beta_critical(), 0.55] {
                let k = coupling(beta);
                let d = rect(w, h);
                let sys = FermionSystem::new(RectangleSpec::new(w, h), &k).unwrap();
                for j in 0..w - 1 {
                    let a = Coord2::new(2 * j as i32 + 1, 0);
                    let fu = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Up }, &k).unwrap();
                    let fd = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Down }, &k).unwrap();
                    for (z, u) in fu.iter() {
                        let dn = fd.get(z).unwrap();
                        let bb = tm_pair(&sys, PsiBar, z, PsiBar, a);
                        o.err((tm_pair(&sys, Psi, z, PsiBar, a) - (u + I * dn)).norm());
                        o.err((tm_pair(&sys, Psi, z, Psi, a) - (-u + I * dn)).norm());
                        o.err((bb - (u.conj() + I * dn.conj())).norm());
                        literal = literal.max((bb - (-u.conj() - I * dn.conj())).norm());
                    }
                }
            }
        }
    }
    o.info.push(format!("literal -conj f_up - i conj f_down variant of <psibar psibar>: max err {literal:.3e}"));
    o
}

fn operator_sholomorphicity() -> Outcome {
    let mut o = Outcome::new(1e-9);
    for (w, h) in [(4, 3), (5, 4)] {
        for beta in [beta_critical(), 0.55] {
            let sys = FermionSystem::new(RectangleSpec::new(w, h), &coupling(beta)).unwrap();
            let n = w as i32 - 1;
            for y in 0..h as i32 - 1 {
                for x in 0..n {
                    o.err(sys.operator_face_residual(Coord2::new(2 * x + 1, 2 * y + 1)).unwrap());
                }
                o.err_tol(sys.operator_boundary_residual(Coord2::new(0, 2 * y + 1)).unwrap(), 1e-10);
                o.err_tol(sys.operator_boundary_residual(Coord2::new(2 * n, 2 * y + 1)).unwrap(), 1e-10);
            }
            for j in 0..n {
                o.err_tol(sys.bottom_state_residual(Coord2::new(2 * j + 1, 0)).unwrap(), 1e-10);
            }
        }
    }
    o
}

fn pf_pairs(n: usize, pair: impl Fn(usize, usize) -> Complex64) -> Complex64 {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = pair(i, j);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    pfaffian(&m).unwrap()
}

fn sorted_sources(spec: &[(Coord2, bool)]) -> Vec<MultiSource> {
    let mut v = spec.to_vec();
    v.sort_by_key(|(z, _)| (z.y2, z.x2));
    v.iter().map(|&(z, u)| if u { MultiSource::up(z).unwrap() } else { MultiSource::down(z).unwrap() }).collect()
}

fn pfaffians() -> Outcome {
    let mut o = Outcome::new(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kinds = [InsertionKind::Psi, InsertionKind::PsiBar, InsertionKind::PsiUp, InsertionKind::PsiDown];
    for beta in [beta_critical(), 0.55] {
        let k = coupling(beta);
        let (w, h) = (4, 4);
        let sys = FermionSystem::new(RectangleSpec::new(w, h), &k).unwrap();
        let edges: Vec<Coord2> = rect(w, h).edges().to_vec();
        for m in [4, 6] {
            for _ in 0..12 {
                let ins: Vec<FermionInsertion> = (0..m)
                    .map(|_| {
                        FermionInsertion::new(kinds[rng.random_range(0..4)], edges[rng.random_range(0..edges.len())])
                    })
                    .collect();
                let full = sys.correlation(&ins).unwrap();
                let pf = pf_pairs(m, |i, j| sys.correlation(&[ins[i], ins[j]]).unwrap());
                o.err((full - pf).norm());
            }
        }
        let d = rect(w, h);
        for spec in [
            vec![
                (Coord2::new(1, 0), true),
                (Coord2::new(5, 2), false),
                (Coord2::new(3, 4), true),
                (Coord2::new(1, 6), true),
            ],
            vec![
                (Coord2::new(3, 0), true),
                (Coord2::new(1, 2), true),
                (Coord2::new(5, 2), false),
                (Coord2::new(3, 4), false),
            ],
            vec![
                (Coord2::new(1, 2), false),
                (Coord2::new(5, 2), true),
                (Coord2::new(3, 4), true),
                (Coord2::new(5, 6), false),
            ],
        ] {
            let s = sorted_sources(&spec);
            for conv in [PhaseConvention::Operator, PhaseConvention::Holomorphic] {
                let f = multipoint_observable(&d, &s, &k, conv).unwrap();
                let pf = pf_pairs(4, |i, j| multipoint_observable(&d, &[s[i], s[j]], &k, conv).unwrap());
                o.err((f - pf).norm());
            }
        }
    }
    o
}

fn partition_functions() -> Outcome {
    let mut o = Outcome::new(1e-10);
    for (w, h) in [(3, 3), (4, 3), (3, 4), (5, 3), (3, 5), (4, 4), (6, 3), (3, 6)] {
        for beta in common::beta_grid() {
            let k = coupling(beta);
            let d = rect(w, h);
            let (spins, _) = common::spin_sums(w, h, beta, &[]);
            let tm = partition_function_tm(RectangleSpec::new(w, h), &k).unwrap();
            // the contour sum omits the all-plus energy e^{β|E|}
            let contour = partition_function_contour(&d, &k).unwrap() * (beta * common::edge_count(w, h) as f64).exp();
            o.err((tm - spins).abs() / spins);
            o.err((contour - spins).abs() / spins);
        }
    }
    o
}

fn rbvp_and_observables() -> Outcome {
    let mut o = Outcome::new(1e-9);
    let two_pi = 2.0 * std::f64::consts::PI;
    for (w, h) in [(3, 3), (4, 4), (5, 5), (6, 3)] {
        let d = rect(w, h);
        for beta in [beta_critical(), 0.3, 0.55, 1.0] {
            let k = coupling(beta);
            let (a, b, _) = assemble_rbvp(&d, &k, &boundary_line_constraints(&d, &[])).unwrap();
            let r = numerics::least_squares(&a, &b).unwrap();
            o.require(r.sigma_min / r.sigma_max > 1e-8, "homogeneous RBVP has trivial kernel");
        }
    }
    let d = rect(5, 5);
    for beta in [beta_critical(), 0.55] {
        let k = coupling(beta);
        let a = Coord2::new(3, 0);
        let mut cons = boundary_line_constraints(&d, &[a]);
        cons.push(RbvpConstraint::FixedValue { edge: a, value: ONE });
        let sol = solve_rbvp(&d, &k, &cons).unwrap();
        let mut up = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Up }, &k).unwrap();
        up.insert(a, ONE);
        o.err(sol.field.max_diff(&up));
        for a in [Coord2::new(5, 4), Coord2::new(3, 2)] {
            let up = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Up }, &k).unwrap();
            let down = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Down }, &k).unwrap();
            let mut cons = boundary_line_constraints(&d, &[]);
            cons.push(RbvpConstraint::Residue { edge: a, value: I / two_pi });
            o.err(solve_rbvp(&d, &k, &cons).unwrap().field.max_diff(&up));
            o.err_tol((discrete_residue(&up, a, &k).unwrap() - I / two_pi).norm(), 1e-10);
            o.err_tol((discrete_residue(&down, a, &k).unwrap() + 1.0 / two_pi).norm(), 1e-10);
        }
    }
    o
}

fn rps_and_gluing() -> Outcome {
    let mut o = Outcome::new(1e-9);
    let diff = |a: &numerics::RealMatrix, b: &numerics::RealMatrix| (a - b).abs().max();
    for beta in [beta_critical(), 0.55] {
        let k = coupling(beta);
        for (w, h) in [(4, 5), (5, 5)] {
            let d = rect(w, h);
            let bottom: Vec<Coord2> = (0..w as i32 - 1).map(|j| Coord2::new(2 * j + 1, 0)).collect();
            let direct = build_rps_direct(&d, &bottom, &k).unwrap();
            let blocks = build_rps_blocks(RectangleSpec::new(w, h), &k).unwrap();
            o.err(diff(&direct.matrix, &blocks.matrix));
            match build_rps_kernel(&d, &bottom, &k) {
                Ok(kernel) => o.err(diff(&direct.matrix, &kernel.matrix)),
                Err(Error::CapExceeded { .. }) => o.info.push(format!("kernel skipped on {w}x{h}: cap")),
                Err(e) => o.require(false, &e.to_string()),
            }
            for row in [2, 3] {
                let s = GlueSetup::new(&d, CutSpec { row }, &k).unwrap();
                for &x in &bottom {
                    let oracle = kernel_field_contour(&d, x, &k, EnumOptions::default()).unwrap();
                    for &y in s.upper.edges() {
                        o.err((s.pair_across(x, y).unwrap() - oracle.value(y).unwrap()).norm());
                    }
                    for &y in s.lower.edges() {
                        if y != x && !s.b.contains(&y) {
                            o.err((s.pair_same_side(x, y).unwrap() - oracle.value(y).unwrap()).norm());
                        }
                    }
                    let f1 = s.source_field(Piece::Lower, x).unwrap();
                    let r: Vec<Complex64> = s.b.iter().map(|&e| f1.value(e).unwrap()).collect();
                    for (v, &e) in s.observable_on_cut(&r).unwrap().iter().zip(&s.b) {
                        o.err((*v - oracle.value(e).unwrap()).norm());
                    }
                }
            }
        }
    }
    o
}

fn coupling_identities() -> Outcome {
    let mut o = Outcome::new(1e-12);
    let kc = IsingCoupling::critical();
    o.err((kc.nu - ONE).norm());
    o.err(kc.mu.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let beta = rng.random_range(0.05..2.0);
        let k = coupling(beta);
        let dual = k.dual().unwrap();
        o.err(((2.0 * k.beta).sinh() * (2.0 * k.beta_star).sinh() - 1.0).abs());
        o.err((k.mu - dual.mu).abs());
        o.err((k.nu.norm() - 1.0).abs());
    }
    o
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 11] = [
        ("propagator structure", propagator_structure, Duration::from_secs(1)),
        ("induced rotation equivalence", induced_rotation, Duration::from_secs(5)),
        ("spectrum theorem", spectrum_theorem, Duration::from_secs(5)),
        ("ladder property", ladder, Duration::from_secs(2)),
        ("two-point correspondence", two_point_correspondence, Duration::from_secs(30)),
        ("operator s-holomorphicity", operator_sholomorphicity, Duration::from_secs(5)),
        ("pfaffian formulas", pfaffians, Duration::from_secs(60)),
        ("three-way partition function", partition_functions, Duration::from_secs(1)),
        ("rbvp uniqueness and observables", rbvp_and_observables, Duration::from_secs(10)),
        ("rps and gluing", rps_and_gluing, Duration::from_secs(60)),
        ("coupling identities", coupling_identities, Duration::from_millis(100)),
    ];
    let mut out = std::io::stdout().lock();
    let mut all = true;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        let dt = t.elapsed();
        let pass = o.ok && dt <= *limit;
        all &= pass;
        let verdict = if pass { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{verdict} [{:>2}] {name}: max_err {:.3e} (tol {:.0e}), {:.3} s (limit {:.1} s)",
            i + 1,
            o.err,
            o.tol,
            dt.as_secs_f64(),
            limit.as_secs_f64()
        )
        .unwrap();
        for line in &o.info {
            writeln!(out, "       {line}").unwrap();
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
