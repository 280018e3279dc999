use ising_core::lattice::{build_from_faces, build_rectangle, Coord2, Dir, Domain, RectangleSpec};
use ising_core::numerics::{least_squares, singular_values, RealMatrix};
use ising_core::observables::{two_point_observable, SourceSpec, Stub};
use ising_core::propagator::propagate_row;
use ising_core::shol_core::*;
use ising_core::Complex64;
use nalgebra::DVector;
use proptest::prelude::*;

fn rect(w: usize, h: usize) -> Domain {
    build_rectangle(RectangleSpec::new(w, h)).unwrap()
}

fn lam(k: i32) -> Complex64 {
    Complex64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4)
}

/// The four complex relations written out term by term.
fn direct_residuals(f: [Complex64; 4], nu: Complex64) -> [Complex64; 4] {
    let [e, n, w, s] = f;
    let ni = nu.inv();
    [
        n + ni * lam(1) * n.conj() - (ni * e + lam(1) * e.conj()),
        n + nu * lam(-1) * n.conj() - (nu * w + lam(-1) * w.conj()),
        s + nu * lam(3) * s.conj() - (nu * e + lam(3) * e.conj()),
        s + ni * lam(-3) * s.conj() - (ni * w + lam(-3) * w.conj()),
    ]
}

#[test]
fn linear_field_residual_by_direct_substitution() {
    // F(z) = z is not s-holomorphic in this convention; the check must report
    // exactly the relation defects computed term by term.
    let k = IsingCoupling::critical();
    let face = Coord2::new(3, 3);
    let f: ComplexField = Dir::ALL.iter().map(|d| (face.step(*d), face.step(*d).to_complex())).collect();
    let vals = Dir::ALL.map(|dir| face.step(dir).to_complex());
    let direct = direct_residuals(vals, ONE).iter().map(|r| r.norm()).fold(0.0, f64::max);
    assert!(direct > 0.1);
    assert!((face_residual(&f, face, &k).unwrap() - direct).abs() < 1e-14);
}

#[test]
fn trivial_fields() {
    let k = IsingCoupling::critical();
    let d = rect(4, 4);
    let zero: ComplexField = d.edges().iter().map(|&e| (e, ZERO)).collect();
    assert_eq!(check_sholomorphic(&zero, &d, &k).unwrap(), 0.0);
    let c: ComplexField = d.edges().iter().map(|&e| (e, Complex64::new(2.5, 0.0))).collect();
    assert!(check_sholomorphic(&c, &d, &k).unwrap() < 1e-14);
    assert!(check_massive_laplacian(&c, Coord2::new(3, 4), &k).unwrap() < 1e-14);
    let lin: ComplexField = d.edges().iter().map(|&e| (e, e.to_complex())).collect();
    assert!(discrete_residue(&lin, Coord2::new(3, 4), &k).unwrap().norm() < 1e-14);
}

#[test]
fn missing_values_are_reported() {
    let d = rect(3, 3);
    let f = ComplexField::new();
    assert!(check_sholomorphic(&f, &d, &IsingCoupling::critical()).is_err());
    assert!(discrete_residue(&f, Coord2::new(1, 0), &IsingCoupling::critical()).is_err());
}

#[test]
fn massive_laplacian_from_propagation() {
    let k = IsingCoupling::new(0.6).unwrap();
    let n = 5;
    let mut row: Vec<Complex64> =
        (0..n).map(|j| Complex64::new(0.3 * j as f64 - 0.5, 0.1 + 0.2 * (j % 2) as f64)).collect();
    let mut f = ComplexField::new();
    for (j, v) in row.iter().enumerate() {
        f.insert(Coord2::new(2 * j as i32 + 1, 0), *v);
    }
    for y in 0..4 {
        let step = propagate_row(&row, &k).unwrap();
        for (x, v) in step.vertical.iter().enumerate() {
            f.insert(Coord2::new(2 * x as i32, 2 * y + 1), *v);
        }
        for (j, v) in step.next.iter().enumerate() {
            f.insert(Coord2::new(2 * j as i32 + 1, 2 * y + 2), *v);
        }
        row = step.next;
    }
    let d = rect(n + 1, 5);
    assert!(check_sholomorphic(&f, &d, &k).unwrap() < 1e-10);
    let mut checked = 0;
    for (e, _) in f.iter() {
        if let Ok(r) = check_massive_laplacian(&f, e, &k) {
            assert!(r < 1e-10 * f.max_abs(), "{e}: {r}");
            checked += 1;
        }
    }
    assert!(checked >= 15);
    let bumped: ComplexField = f.iter().map(|(e, v)| (e, if e == Coord2::new(5, 4) { v + 0.5 } else { v })).collect();
    assert!(check_massive_laplacian(&bumped, Coord2::new(5, 4), &k).unwrap() > 0.1);
}

#[test]
fn rbvp_without_sources_is_zero() {
    for d in [rect(3, 3), rect(5, 4), rect(4, 6)] {
        let k = IsingCoupling::new(0.45).unwrap();
        let sol = solve_rbvp(&d, &k, &boundary_line_constraints(&d, &[])).unwrap();
        assert_eq!(sol.field.len(), d.edges().len());
        assert!(sol.field.max_abs() < 1e-12);
    }
}

#[test]
fn homogeneous_system_has_trivial_kernel() {
    let l_shape: Vec<Coord2> =
        [(1, 1), (3, 1), (5, 1), (1, 3), (1, 5), (3, 3)].map(|(x, y)| Coord2::new(x, y)).to_vec();
    let domains = [rect(3, 3), rect(4, 4), rect(6, 3), build_from_faces(&l_shape).unwrap()];
    for d in &domains {
        for beta in [beta_critical(), 0.3, 1.0] {
            let k = IsingCoupling::new(beta).unwrap();
            let (a, b, _) = assemble_rbvp(d, &k, &boundary_line_constraints(d, &[])).unwrap();
            let r = least_squares(&a, &b).unwrap();
            assert!(r.sigma_min / r.sigma_max > 1e-8);
        }
    }
}

#[test]
fn rbvp_matches_contour_for_bottom_source() {
    let k = IsingCoupling::critical();
    let d = rect(5, 5);
    let a = Coord2::new(3, 0);
    let mut cons = boundary_line_constraints(&d, &[a]);
    cons.push(RbvpConstraint::FixedValue { edge: a, value: ONE });
    let sol = solve_rbvp(&d, &k, &cons).unwrap();
    let mut contour = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Up }, &k).unwrap();
    contour.insert(a, ONE);
    assert!(sol.field.max_diff(&contour) < 1e-9);
}

#[test]
fn rbvp_matches_contour_for_interior_source() {
    for beta in [0.5, beta_critical()] {
        let k = IsingCoupling::new(beta).unwrap();
        let d = rect(5, 5);
        let a = Coord2::new(5, 4);
        let mut cons = boundary_line_constraints(&d, &[]);
        cons.push(RbvpConstraint::Residue { edge: a, value: I / (2.0 * std::f64::consts::PI) });
        let sol = solve_rbvp(&d, &k, &cons).unwrap();
        let up = two_point_observable(&d, SourceSpec { edge: a, stub: Stub::Up }, &k).unwrap();
        assert!(sol.field.max_diff(&up) < 1e-9, "{beta}");
        let s = sol.singular.unwrap();
        let jump = I / (2.0 * std::f64::consts::PI) * (s.front - s.back);
        assert!((jump - I / (2.0 * std::f64::consts::PI)).norm() < 1e-12);
    }
}

#[test]
fn singular_edge_must_be_interior() {
    let d = rect(4, 4);
    let cons = [RbvpConstraint::Residue { edge: Coord2::new(3, 0), value: ONE }];
    assert!(solve_rbvp(&d, &IsingCoupling::critical(), &cons).is_err());
}

#[test]
fn underdetermined_rbvp_is_rank_deficient() {
    let d = rect(4, 4);
    let cons = boundary_line_constraints(&d, &[Coord2::new(3, 0), Coord2::new(0, 3)]);
    assert!(solve_rbvp(&d, &IsingCoupling::critical(), &cons).is_err());
}

#[test]
fn csv_parse_errors() {
    assert!(ComplexField::from_csv("a,b\n").is_err());
    assert!(ComplexField::from_csv("x2,y2,re,im\n1,0,abc,0\n").is_err());
    assert!(ComplexField::from_csv("x2,y2,re,im\n1,0,1\n").is_err());
    assert!(ComplexField::from_csv("x2,y2,re,im\n").unwrap().is_empty());
}

proptest! {
    #[test]
    fn face_rows_match_direct_relations(
        beta in 0.1f64..2.0,
        v in proptest::collection::vec(-3.0f64..3.0, 8),
    ) {
        let k = IsingCoupling::new(beta).unwrap();
        let vals = [0, 1, 2, 3].map(|i| Complex64::new(v[2 * i], v[2 * i + 1]));
        let face = Coord2::new(1, 1);
        let f: ComplexField = Dir::ALL.iter().zip(vals).map(|(d, z)| (face.step(*d), z)).collect();
        let direct = direct_residuals(vals, k.nu);
        let worst = direct.iter().map(|r| r.norm()).fold(0.0, f64::max);
        prop_assert!((face_residual(&f, face, &k).unwrap() - worst).abs() < 1e-12);
        for (row, r) in face_relations(face, &k).iter().zip(direct) {
            let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            prop_assert!((dot.abs() - r.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_linear_relation_has_rank_one(theta in 0.0f64..std::f64::consts::TAU) {
        let eta = Complex64::from_polar(1.0, theta);
        // z ↦ z + η conj z as a real 2×2 matrix
        let m = RealMatrix::from_row_slice(2, 2, &[1.0 + eta.re, eta.im, eta.im, 1.0 - eta.re]);
        let sv = singular_values(&m).unwrap();
        let (hi, lo) = (sv.max(), sv.min());
        prop_assert!((hi - 2.0).abs() < 1e-12);
        prop_assert!(lo < 1e-12);
    }

    #[test]
    fn coupling_invariants(beta in 0.05f64..2.0) {
        let k = IsingCoupling::new(beta).unwrap();
        let ks = k.dual().unwrap();
        prop_assert!((k.nu.norm() - 1.0).abs() < 1e-14);
        prop_assert!((k.big_s * ks.big_s - 1.0).abs() < 1e-12);
        prop_assert!((k.mu - ks.mu).abs() < 1e-12);
        prop_assert!(k.mu >= -1e-15);
    }

    #[test]
    fn csv_round_trip(vals in proptest::collection::vec((-50i32..50, -50i32..50, any::<f64>(), any::<f64>()), 0..20)) {
        let f: ComplexField = vals
            .iter()
            .filter(|(_, _, re, im)| re.is_finite() && im.is_finite())
            .map(|&(x, y, re, im)| (Coord2::new(x, y), Complex64::new(re, im)))
            .collect();
        let g = ComplexField::from_csv(&f.to_csv()).unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn rbvp_is_linear_in_the_source(beta in 0.3f64..1.2, s in -2.0f64..2.0) {
        let k = IsingCoupling::new(beta).unwrap();
        let d = rect(4, 3);
        let a = Coord2::new(3, 0);
        let solve = |v: Complex64| {
            let mut cons = boundary_line_constraints(&d, &[a]);
            cons.push(RbvpConstraint::FixedValue { edge: a, value: v });
            solve_rbvp(&d, &k, &cons).unwrap().field
        };
        let one = solve(ONE);
        let scaled = solve(Complex64::new(s, 0.0));
        prop_assert!(scaled.max_diff(&one.scaled(Complex64::new(s, 0.0))) < 1e-10);
    }
}

#[test]
fn critical_constants_exact() {
    let k = IsingCoupling::critical();
    assert!((k.nu - ONE).norm() < 1e-12);
    assert!((k.big_s - 1.0).abs() < 1e-14);
    assert!(k.mu.abs() < 1e-12);
    let _ = DVector::<f64>::zeros(1);
}
