//! Couplings, (massive) s-holomorphicity, Riemann boundary lines, discrete
//! residues and a global least-squares solver for Riemann boundary value
//! problems on arbitrary simply connected domains.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{CellKind, Coord2, Dir, Domain, Side};
use crate::numerics::{self, LsqReport, RealMatrix};

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// λ = e^{iπ/4}.
pub const LAMBDA: Complex64 = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);

pub fn lambda_pow(k: i32) -> Complex64 {
    Complex64::from_polar(1.0, PI / 4.0 * k as f64)
}

/// β_c = ½ ln(1 + √2).
pub fn beta_critical() -> f64 {
    0.5 * (1.0 + 2f64.sqrt()).ln()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsingCoupling {
    pub beta: f64,
    /// e^{−2β}
    pub alpha: f64,
    /// sinh 2β
    pub big_s: f64,
    /// cosh 2β
    pub big_c: f64,
    pub s: f64,
    pub c: f64,
    /// Dual coupling, tanh β* = e^{−2β}.
    pub beta_star: f64,
    pub nu: Complex64,
    pub mu: f64,
}

impl IsingCoupling {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        let alpha = (-2.0 * beta).exp();
        let big_s = (2.0 * beta).sinh();
        let nu = LAMBDA.conj().powi(3) * (alpha + I) / (alpha - I);
        Ok(IsingCoupling {
            beta,
            alpha,
            big_s,
            big_c: (2.0 * beta).cosh(),
            s: beta.sinh(),
            c: beta.cosh(),
            beta_star: alpha.atanh(),
            nu,
            mu: (big_s + 1.0 / big_s) / 2.0 - 1.0,
        })
    }

    pub fn critical() -> Self {
        Self::new(beta_critical()).expect("critical beta is positive")
    }

    pub fn dual(&self) -> Result<Self> {
        Self::new(self.beta_star)
    }
}

/// One relation `c1 F(A) + d1 conj F(A) = c2 F(B) + d2 conj F(B)` on a face.
#[derive(Clone, Copy, Debug)]
pub struct FaceRelation {
    pub a: Dir,
    pub c1: Complex64,
    pub d1: Complex64,
    pub b: Dir,
    pub c2: Complex64,
    pub d2: Complex64,
}

impl FaceRelation {
    pub fn residual(&self, fa: Complex64, fb: Complex64) -> Complex64 {
        self.c1 * fa + self.d1 * fa.conj() - self.c2 * fb - self.d2 * fb.conj()
    }

    /// Unit direction of the line both sides of the relation lie on.
    pub fn direction(&self) -> Complex64 {
        let u = self.c1 * (self.d1 / self.c1).sqrt();
        u / u.norm()
    }

    fn side_row(&self, c: Complex64, d: Complex64) -> [f64; 2] {
        let u = self.direction().conj();
        [(u * (c + d)).re, (u * I * (c - d)).re]
    }

    /// Real coefficients of the projected equation on (Re F(A), Im F(A)).
    pub fn row_a(&self) -> [f64; 2] {
        self.side_row(self.c1, self.d1)
    }

    /// Real coefficients on (Re F(B), Im F(B)), with the sign of the right-hand side moved over.
    pub fn row_b(&self) -> [f64; 2] {
        let r = self.side_row(self.c2, self.d2);
        [-r[0], -r[1]]
    }
}

/// The four massive s-holomorphicity relations on every face.
pub fn face_relation_coefficients(k: &IsingCoupling) -> [FaceRelation; 4] {
    let nu = k.nu;
    let nui = nu.inv();
    [
        FaceRelation { a: Dir::N, c1: ONE, d1: nui * LAMBDA, b: Dir::E, c2: nui, d2: LAMBDA },
        FaceRelation { a: Dir::N, c1: ONE, d1: nu * lambda_pow(-1), b: Dir::W, c2: nu, d2: lambda_pow(-1) },
        FaceRelation { a: Dir::S, c1: ONE, d1: nu * lambda_pow(3), b: Dir::E, c2: nu, d2: lambda_pow(3) },
        FaceRelation { a: Dir::S, c1: ONE, d1: nui * lambda_pow(-3), b: Dir::W, c2: nui, d2: lambda_pow(-3) },
    ]
}

/// The four real equations of a face in the unknowns
/// (Re, Im) of F at E, N, W, S, in that order.
pub fn face_relations(_face: Coord2, k: &IsingCoupling) -> [[f64; 8]; 4] {
    face_relation_coefficients(k).map(|rel| {
        let mut row = [0.0; 8];
        let ia = rel.a.index() as usize * 2;
        let ib = rel.b.index() as usize * 2;
        let ra = rel.row_a();
        let rb = rel.row_b();
        row[ia] += ra[0];
        row[ia + 1] += ra[1];
        row[ib] += rb[0];
        row[ib + 1] += rb[1];
        row
    })
}

/// Edge-indexed complex values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexField(pub BTreeMap<Coord2, Complex64>);

impl ComplexField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, e: Coord2) -> Option<Complex64> {
        self.0.get(&e).copied()
    }

    pub fn value(&self, e: Coord2) -> Result<Complex64> {
        self.get(e).ok_or(Error::MissingValue(e))
    }

    pub fn insert(&mut self, e: Coord2, v: Complex64) {
        self.0.insert(e, v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (Coord2, Complex64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> ComplexField {
        ComplexField(self.0.iter().map(|(k, v)| (*k, v * c)).collect())
    }

    /// Largest difference over the common keys; keys present in only one field count as errors.
    pub fn max_diff(&self, other: &ComplexField) -> f64 {
        let mut m: f64 = 0.0;
        for (k, v) in &self.0 {
            m = m.max(other.get(*k).map_or(f64::INFINITY, |w| (v - w).norm()));
        }
        for k in other.0.keys() {
            if !self.0.contains_key(k) {
                m = f64::INFINITY;
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x2,y2,re,im\n");
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{},{},{:.16e},{:.16e}", k.x2, k.y2, v.re, v.im);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<ComplexField> {
        let mut out = ComplexField::new();
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "x2,y2,re,im" => {}
            _ => return Err(Error::InvalidArgument("missing CSV header x2,y2,re,im".into())),
        }
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::InvalidArgument(format!("bad CSV row {}: {line:?}", n + 2));
            if parts.len() != 4 {
                return Err(bad());
            }
            let x2 = parts[0].parse().map_err(|_| bad())?;
            let y2 = parts[1].parse().map_err(|_| bad())?;
            let re = parts[2].parse().map_err(|_| bad())?;
            let im = parts[3].parse().map_err(|_| bad())?;
            out.insert(Coord2::new(x2, y2), Complex64::new(re, im));
        }
        Ok(out)
    }
}

impl FromIterator<(Coord2, Complex64)> for ComplexField {
    fn from_iter<T: IntoIterator<Item = (Coord2, Complex64)>>(iter: T) -> Self {
        ComplexField(iter.into_iter().collect())
    }
}

/// Largest relation residual on one face; every edge of the face must have a value.
pub fn face_residual(f: &ComplexField, face: Coord2, k: &IsingCoupling) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for rel in face_relation_coefficients(k) {
        let fa = f.value(face.step(rel.a))?;
        let fb = f.value(face.step(rel.b))?;
        worst = worst.max(rel.residual(fa, fb).norm());
    }
    Ok(worst)
}

pub fn check_sholomorphic(f: &ComplexField, d: &Domain, k: &IsingCoupling) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &face in d.faces() {
        worst = worst.max(face_residual(f, face, k)?);
    }
    Ok(worst)
}

/// Modulus of ¼ Σ (F(Z) − F(X)) − μ F(X) over the four same-type neighbours Z of X.
pub fn check_massive_laplacian(f: &ComplexField, x: Coord2, k: &IsingCoupling) -> Result<f64> {
    let fx = f.value(x)?;
    let mut acc = ZERO;
    for (dx, dy) in [(2, 0), (-2, 0), (0, 2), (0, -2)] {
        let z = x.offset(dx, dy);
        acc += f.get(z).ok_or(Error::NearBoundary(x))? - fx;
    }
    Ok((acc / 4.0 - k.mu * fx).norm())
}

/// The value at `edge` that makes `f` satisfy the relations of `face`,
/// computed from the two relations that involve `edge`.
pub fn extend_through_face(f: &ComplexField, face: Coord2, edge: Coord2, k: &IsingCoupling) -> Result<Complex64> {
    let dir = Dir::ALL
        .into_iter()
        .find(|d| face.step(*d) == edge)
        .ok_or_else(|| Error::InvalidPosition(format!("{edge} is not an edge of face {face}")))?;
    let mut m = RealMatrix::zeros(2, 2);
    let mut rhs = DVector::zeros(2);
    let mut r = 0;
    for rel in face_relation_coefficients(k) {
        let (own, other, other_val) = if rel.a == dir {
            (rel.row_a(), rel.row_b(), f.value(face.step(rel.b))?)
        } else if rel.b == dir {
            (rel.row_b(), rel.row_a(), f.value(face.step(rel.a))?)
        } else {
            continue;
        };
        m[(r, 0)] = own[0];
        m[(r, 1)] = own[1];
        rhs[r] = -(other[0] * other_val.re + other[1] * other_val.im);
        r += 1;
    }
    let x = numerics::solve(&m, &RealMatrix::from_column_slice(2, 1, rhs.as_slice()))?;
    Ok(Complex64::new(x[(0, 0)], x[(1, 0)]))
}

/// (i/2π)(f^front(a) − f^back(a)), the fronts and backs solved on the faces above and below `a`.
pub fn discrete_residue(f: &ComplexField, a: Coord2, k: &IsingCoupling) -> Result<Complex64> {
    if a.kind() != CellKind::HorizontalEdge {
        return Err(Error::InvalidPosition(format!("{a} is not a horizontal edge")));
    }
    let front = extend_through_face(f, a.offset(0, 1), a, k).map_err(|_| Error::NearBoundary(a))?;
    let back = extend_through_face(f, a.offset(0, -1), a, k).map_err(|_| Error::NearBoundary(a))?;
    Ok(I / (2.0 * PI) * (front - back))
}

/// Unit directions of the Riemann boundary lines per side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryLineConvention {
    pub top: Complex64,
    pub bottom: Complex64,
    pub left: Complex64,
    pub right: Complex64,
}

impl BoundaryLineConvention {
    /// Read off the contour observable: top real, bottom imaginary, left λ⁻¹, right λ.
    pub const CALIBRATED: BoundaryLineConvention = BoundaryLineConvention {
        top: ONE,
        bottom: I,
        left: Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        right: LAMBDA,
    };

    pub fn line(&self, side: Side) -> Complex64 {
        match side {
            Side::Top => self.top,
            Side::Bottom => self.bottom,
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

/// The calibrated boundary line (τ_cw^{−1/2} direction) at a boundary edge.
pub fn boundary_line(side: Side) -> Complex64 {
    BoundaryLineConvention::CALIBRATED.line(side)
}

/// Distance of `v` from the real line spanned by the unit vector `line`.
pub fn line_distance(v: Complex64, line: Complex64) -> f64 {
    (v * line.conj()).im.abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RbvpConstraint {
    FixedValue {
        edge: Coord2,
        value: Complex64,
    },
    /// Singular edge with prescribed discrete residue.
    Residue {
        edge: Coord2,
        value: Complex64,
    },
    /// f(edge) − offset ∈ ℝ·line.
    BoundaryLine {
        edge: Coord2,
        line: Complex64,
        offset: Complex64,
    },
}

/// Homogeneous line conditions on every boundary edge not listed in `except`.
pub fn boundary_line_constraints(d: &Domain, except: &[Coord2]) -> Vec<RbvpConstraint> {
    d.boundary_edges()
        .iter()
        .filter(|b| !except.contains(&b.edge))
        .map(|b| RbvpConstraint::BoundaryLine { edge: b.edge, line: boundary_line(b.side), offset: ZERO })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SingularData {
    pub edge: Coord2,
    pub front: Complex64,
    pub back: Complex64,
}

#[derive(Clone, Debug)]
pub struct RbvpSolution {
    /// Values on all edges except a singular one.
    pub field: ComplexField,
    pub report: LsqReport,
    pub unknowns: usize,
    pub singular: Option<SingularData>,
}

/// Assembles the real system of a Riemann boundary value problem.
///
/// Unknowns are (Re, Im) per edge, plus a second copy for a singular edge:
/// the face above it sees the front value, the face below the back value.
pub fn assemble_rbvp(
    d: &Domain,
    k: &IsingCoupling,
    constraints: &[RbvpConstraint],
) -> Result<(RealMatrix, DVector<f64>, Option<Coord2>)> {
    let singular: Vec<Coord2> = constraints
        .iter()
        .filter_map(|c| match c {
            RbvpConstraint::Residue { edge, .. } => Some(*edge),
            _ => None,
        })
        .collect();
    if singular.len() > 1 {
        return Err(Error::InvalidArgument("at most one singular edge is supported".into()));
    }
    let singular = singular.first().copied();
    if let Some(a) = singular {
        if a.kind() != CellKind::HorizontalEdge || !d.contains_face(a.offset(0, 1)) || !d.contains_face(a.offset(0, -1))
        {
            return Err(Error::InvalidPosition(format!("singular edge {a} must be interior and horizontal")));
        }
    }
    let ne = d.edges().len();
    let nu = 2 * ne + if singular.is_some() { 2 } else { 0 };
    let idx = |e: Coord2| d.edge_index(e).ok_or(Error::UnknownEdge(e));

    let rels = face_relation_coefficients(k);
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for &face in d.faces() {
        let slot = |dir: Dir| -> Result<usize> {
            let e = face.step(dir);
            if Some(e) == singular && dir == Dir::N {
                Ok(2 * ne)
            } else {
                Ok(2 * idx(e)?)
            }
        };
        for rel in &rels {
            let (ia, ib) = (slot(rel.a)?, slot(rel.b)?);
            let (ra, rb) = (rel.row_a(), rel.row_b());
            rows.push((vec![(ia, ra[0]), (ia + 1, ra[1]), (ib, rb[0]), (ib + 1, rb[1])], 0.0));
        }
    }
    for c in constraints {
        match *c {
            RbvpConstraint::FixedValue { edge, value } => {
                let i = 2 * idx(edge)?;
                rows.push((vec![(i, 1.0)], value.re));
                rows.push((vec![(i + 1, 1.0)], value.im));
            }
            RbvpConstraint::BoundaryLine { edge, line, offset } => {
                let i = 2 * idx(edge)?;
                let l = line / line.norm();
                rows.push((vec![(i, -l.im), (i + 1, l.re)], (l.conj() * offset).im));
            }
            RbvpConstraint::Residue { edge, value } => {
                let i = 2 * idx(edge)?;
                let jump = value * 2.0 * PI / I;
                rows.push((vec![(i, 1.0), (2 * ne, -1.0)], jump.re));
                rows.push((vec![(i + 1, 1.0), (2 * ne + 1, -1.0)], jump.im));
            }
        }
    }
    let mut a = RealMatrix::zeros(rows.len(), nu);
    let mut b = DVector::zeros(rows.len());
    for (r, (entries, rhs)) in rows.iter().enumerate() {
        for &(c, v) in entries {
            a[(r, c)] += v;
        }
        b[r] = *rhs;
    }
    Ok((a, b, singular))
}

pub fn solve_rbvp(d: &Domain, k: &IsingCoupling, constraints: &[RbvpConstraint]) -> Result<RbvpSolution> {
    let (a, b, singular) = assemble_rbvp(d, k, constraints)?;
    let unknowns = a.ncols();
    if a.nrows() < unknowns {
        return Err(Error::RankDeficient { rank: a.nrows(), unknowns });
    }
    let report = numerics::least_squares(&a, &b)?;
    if report.rank < unknowns {
        return Err(Error::RankDeficient { rank: report.rank, unknowns });
    }
    let tol = 1e-9 * b.norm().max(1.0);
    if report.residual > tol {
        return Err(Error::Residual { residual: report.residual, tol });
    }
    let x = &report.solution;
    let mut field = ComplexField::new();
    for (i, &e) in d.edges().iter().enumerate() {
        if Some(e) != singular {
            field.insert(e, Complex64::new(x[2 * i], x[2 * i + 1]));
        }
    }
    let singular = singular.map(|e| {
        let i = d.edge_index(e).expect("validated");
        let ne = d.edges().len();
        SingularData {
            edge: e,
            front: Complex64::new(x[2 * i], x[2 * i + 1]),
            back: Complex64::new(x[2 * ne], x[2 * ne + 1]),
        }
    });
    Ok(RbvpSolution { field, report, unknowns, singular })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_constants() {
        let k = IsingCoupling::critical();
        assert!((k.nu - ONE).norm() < 1e-12);
        assert!((k.big_s - 1.0).abs() < 1e-14);
        assert!(k.mu.abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_beta() {
        assert!(IsingCoupling::new(0.0).is_err());
        assert!(IsingCoupling::new(-1.0).is_err());
        assert!(IsingCoupling::new(f64::NAN).is_err());
    }

    #[test]
    fn constant_real_field_is_sholomorphic_at_criticality() {
        let k = IsingCoupling::critical();
        let face = Coord2::new(1, 1);
        let f: ComplexField = Dir::ALL.iter().map(|d| (face.step(*d), Complex64::new(0.7, 0.0))).collect();
        assert!(face_residual(&f, face, &k).unwrap() < 1e-15);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let f: ComplexField = [
            (Coord2::new(1, 0), Complex64::new(0.1, -1.0 / 3.0)),
            (Coord2::new(0, 1), Complex64::new(std::f64::consts::E, 1e-300)),
        ]
        .into_iter()
        .collect();
        let g = ComplexField::from_csv(&f.to_csv()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_rejects_missing_header() {
        assert!(ComplexField::from_csv("1,0,0,0\n").is_err());
    }
}
