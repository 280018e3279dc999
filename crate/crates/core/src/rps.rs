//! Riemann Poincaré–Steklov operators on Cauchy data, the gluing operator Q
//! and the pairing formulas for observables on a domain cut in two.
//!
//! Cauchy data on a set 𝔟 of boundary edges are stored as real coordinates
//! along the two lines at each edge: the I-line is the calibrated boundary
//! line, the R-line is the perpendicular line −i·ℓ_I.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{split_domain, CellKind, Coord2, CutSpec, Domain, RectangleSpec, Side};
use crate::numerics::{self, RealMatrix};
use crate::observables::{two_point_observable_with, EnumOptions, SourceSpec, Stub};
use crate::par::{self, Policy};
use crate::propagator::propagator_matrix;
use crate::shol_core::{
    boundary_line, boundary_line_constraints, extend_through_face, solve_rbvp, ComplexField, IsingCoupling,
    RbvpConstraint, I, ZERO,
};

/// Above this condition number Id − U₁U₂ is treated as singular.
pub const MAX_GLUE_COND: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    R,
    I,
}

pub fn i_line(side: Side) -> Complex64 {
    boundary_line(side)
}

pub fn r_line(side: Side) -> Complex64 {
    -I * boundary_line(side)
}

fn line(side: Side, space: Space) -> Complex64 {
    match space {
        Space::R => r_line(side),
        Space::I => i_line(side),
    }
}

/// Real coordinate of `v` along the unit vector `l`.
fn coord(v: Complex64, l: Complex64) -> f64 {
    (v * l.conj()).re
}

fn sides_of(d: &Domain, b: &[Coord2]) -> Result<Vec<Side>> {
    if b.is_empty() {
        return Err(Error::InvalidArgument("empty boundary subset".into()));
    }
    for (i, e) in b.iter().enumerate() {
        if b[..i].contains(e) {
            return Err(Error::InvalidArgument(format!("edge {e} listed twice")));
        }
    }
    b.iter()
        .map(|&e| d.boundary_side(e).ok_or_else(|| Error::InvalidPosition(format!("{e} is not a boundary edge"))))
        .collect()
}

/// Values on 𝔟 along one family of lines.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyData {
    pub b: Vec<Coord2>,
    pub sides: Vec<Side>,
    pub space: Space,
    pub t: DVector<f64>,
}

impl CauchyData {
    pub fn new(b: Vec<Coord2>, sides: Vec<Side>, space: Space, t: DVector<f64>) -> Result<Self> {
        if b.len() != sides.len() || b.len() != t.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} edges, {} sides, {} coordinates",
                b.len(),
                sides.len(),
                t.len()
            )));
        }
        Ok(CauchyData { b, sides, space, t })
    }

    /// Projection of complex values onto the lines of `space`.
    pub fn project(b: Vec<Coord2>, sides: Vec<Side>, space: Space, values: &[Complex64]) -> Result<Self> {
        if values.len() != b.len() {
            return Err(Error::DimensionMismatch(format!("{} values for {} edges", values.len(), b.len())));
        }
        let t = DVector::from_iterator(b.len(), values.iter().zip(&sides).map(|(v, s)| coord(*v, line(*s, space))));
        CauchyData::new(b, sides, space, t)
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.t.iter().zip(&self.sides).map(|(t, s)| *t * line(*s, self.space)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RpsMethod {
    Direct,
    Kernel,
    Blocks,
}

/// U: R-coordinates on 𝔟 to I-coordinates on 𝔟.
#[derive(Clone, Debug)]
pub struct RPSOperator {
    pub b: Vec<Coord2>,
    pub sides: Vec<Side>,
    pub matrix: RealMatrix,
    pub method: RpsMethod,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RpsReport {
    pub b: Vec<[i32; 2]>,
    pub matrix: Vec<Vec<f64>>,
    pub method: RpsMethod,
    pub cond: f64,
}

impl RPSOperator {
    pub fn apply(&self, u: &CauchyData) -> Result<CauchyData> {
        if u.space != Space::R || u.b != self.b {
            return Err(Error::DimensionMismatch("input is not R-data on the operator's edges".into()));
        }
        CauchyData::new(self.b.clone(), self.sides.clone(), Space::I, &self.matrix * &u.t)
    }

    pub fn cond(&self) -> Result<f64> {
        numerics::condition_number(&self.matrix)
    }

    pub fn report(&self) -> Result<RpsReport> {
        Ok(RpsReport {
            b: self.b.iter().map(|e| [e.x2, e.y2]).collect(),
            matrix: self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            method: self.method,
            cond: self.cond()?,
        })
    }
}

/// Boundary values u + v on 𝔟 with u = e_j in R-coordinates and the I-part free.
fn unit_source_constraints(d: &Domain, b: &[Coord2], sides: &[Side], j: usize) -> Vec<RbvpConstraint> {
    let mut cons = boundary_line_constraints(d, b);
    for (i, (&e, &s)) in b.iter().zip(sides).enumerate() {
        let offset = if i == j { r_line(s) } else { ZERO };
        cons.push(RbvpConstraint::BoundaryLine { edge: e, line: i_line(s), offset });
    }
    cons
}

/// The s-holomorphic extension of R-data `u` on 𝔟 with Riemann lines on ∂Ω ∖ 𝔟.
pub fn extend_cauchy_data(d: &Domain, u: &CauchyData, k: &IsingCoupling) -> Result<ComplexField> {
    if u.space != Space::R {
        return Err(Error::InvalidArgument("extension takes R-data".into()));
    }
    let sides = sides_of(d, &u.b)?;
    let mut cons = boundary_line_constraints(d, &u.b);
    for ((&e, &s), &t) in u.b.iter().zip(&sides).zip(u.t.iter()) {
        cons.push(RbvpConstraint::BoundaryLine { edge: e, line: i_line(s), offset: t * r_line(s) });
    }
    Ok(solve_rbvp(d, k, &cons)?.field)
}

pub fn build_rps_direct(d: &Domain, b: &[Coord2], k: &IsingCoupling) -> Result<RPSOperator> {
    build_rps_direct_with(d, b, k, Policy::default())
}

pub fn build_rps_direct_with(d: &Domain, b: &[Coord2], k: &IsingCoupling, policy: Policy) -> Result<RPSOperator> {
    let sides = sides_of(d, b)?;
    let cols = par::map_range(policy, b.len(), |j| -> Result<Vec<f64>> {
        let sol = solve_rbvp(d, k, &unit_source_constraints(d, b, &sides, j))?;
        b.iter().zip(&sides).map(|(&e, &s)| Ok(coord(sol.field.value(e)?, i_line(s)))).collect()
    });
    let mut m = RealMatrix::zeros(b.len(), b.len());
    for (j, c) in cols.into_iter().enumerate() {
        for (i, v) in c?.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(RPSOperator { b: b.to_vec(), sides, matrix: m, method: RpsMethod::Direct })
}

/// The s-holomorphic function on `d` with R-coordinate 1 at the boundary edge
/// `y`, ∥ℓ_I on every other boundary edge, from one RBVP solve.
pub fn kernel_field(d: &Domain, y: Coord2, k: &IsingCoupling) -> Result<ComplexField> {
    let sides = sides_of(d, &[y])?;
    Ok(solve_rbvp(d, k, &unit_source_constraints(d, &[y], &sides, 0))?.field)
}

/// The same kernel from the contour sum, with the source stub pointing into `d`.
pub fn kernel_field_contour(d: &Domain, y: Coord2, k: &IsingCoupling, opts: EnumOptions) -> Result<ComplexField> {
    let side = sides_of(d, &[y])?[0];
    let (stub, inner) = match side {
        Side::Bottom => (Stub::Up, y.offset(0, 1)),
        Side::Top => (Stub::Down, y.offset(0, -1)),
        _ => {
            return Err(Error::InvalidPosition(format!(
                "contour kernel needs a horizontal source, {y} is on the {side:?} side"
            )))
        }
    };
    let mut f = two_point_observable_with(d, SourceSpec { edge: y, stub }, k, opts)?;
    let at = extend_through_face(&f, inner, y, k)?;
    let r = coord(at, r_line(side));
    if r.abs() < 1e-300 {
        return Err(Error::Singular(format!("kernel at {y} has no R-component")));
    }
    f.insert(y, at);
    Ok(f.scaled(Complex64::from(1.0 / r)))
}

pub fn build_rps_kernel(d: &Domain, b: &[Coord2], k: &IsingCoupling) -> Result<RPSOperator> {
    build_rps_kernel_with(d, b, k, EnumOptions::default())
}

pub fn build_rps_kernel_with(d: &Domain, b: &[Coord2], k: &IsingCoupling, opts: EnumOptions) -> Result<RPSOperator> {
    let sides = sides_of(d, b)?;
    let mut m = RealMatrix::zeros(b.len(), b.len());
    for (j, &y) in b.iter().enumerate() {
        let f = kernel_field_contour(d, y, k, opts)?;
        for (i, (&x, &s)) in b.iter().zip(&sides).enumerate() {
            if i != j {
                m[(i, j)] = coord(f.value(x)?, i_line(s));
            }
        }
    }
    Ok(RPSOperator { b: b.to_vec(), sides, matrix: m, method: RpsMethod::Kernel })
}

/// U = −(P^N_II)^{−1} P^N_IR for the bottom row of a box of N face rows.
pub fn build_rps_blocks(spec: RectangleSpec, k: &IsingCoupling) -> Result<RPSOperator> {
    let n = spec.columns();
    let rows = spec.rows();
    if rows == 0 || n < 2 {
        return Err(Error::DimensionTooSmall(format!("{}x{} box", spec.width, spec.height)));
    }
    let p = propagator_matrix(n, k)?.power(rows);
    let p_ir = p.view((n, 0), (n, n)).into_owned();
    let p_ii = p.view((n, n), (n, n)).into_owned();
    let m = -numerics::solve(&p_ii, &p_ir)?;
    let b: Vec<Coord2> = (0..n).map(|j| Coord2::new(2 * j as i32 + 1, 0)).collect();
    Ok(RPSOperator { sides: vec![Side::Bottom; n], b, matrix: m, method: RpsMethod::Blocks })
}

/// Q = (Id − U₁U₂)^{−1} acting on R₂-coordinates, with the coordinate maps
/// between the two sides of 𝔟 made explicit.
#[derive(Clone, Debug)]
pub struct GlueOperator {
    pub q: RealMatrix,
    pub cond: f64,
    /// I₂-coordinates to R₁-coordinates, per edge.
    pub sigma: Vec<f64>,
    /// I₁-coordinates to R₂-coordinates, per edge.
    pub tau: Vec<f64>,
}

fn same_line(a: Complex64, b: Complex64, e: Coord2) -> Result<f64> {
    let s = coord(a, b);
    if (s.abs() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("lines at {e} do not match across the cut")));
    }
    Ok(s.signum())
}

pub fn glue(u1: &RPSOperator, u2: &RPSOperator) -> Result<GlueOperator> {
    if u1.b != u2.b {
        return Err(Error::DimensionMismatch("operators live on different edge sets".into()));
    }
    let n = u1.b.len();
    let mut sigma = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for ((&e, &s1), &s2) in u1.b.iter().zip(&u1.sides).zip(&u2.sides) {
        sigma.push(same_line(i_line(s2), r_line(s1), e)?);
        tau.push(same_line(i_line(s1), r_line(s2), e)?);
    }
    let sig = RealMatrix::from_diagonal(&DVector::from_vec(sigma.clone()));
    let ta = RealMatrix::from_diagonal(&DVector::from_vec(tau.clone()));
    let m = RealMatrix::identity(n, n) - &ta * &u1.matrix * &sig * &u2.matrix;
    let cond = numerics::condition_number(&m)?;
    if cond.is_nan() || cond > MAX_GLUE_COND {
        return Err(Error::IllConditioned(cond));
    }
    Ok(GlueOperator { q: numerics::inverse(&m)?, cond, sigma, tau })
}

impl GlueOperator {
    /// The unique (u₁, u₂) in R₁ × R₂ coordinates with u₁ = U₂u₂ + h₂ and
    /// u₂ = U₁u₁ + h₁, for h₁ in I₁- and h₂ in I₂-coordinates.
    pub fn fixed_point(
        &self,
        u1: &RPSOperator,
        u2: &RPSOperator,
        h1: &DVector<f64>,
        h2: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let sig = DVector::from_vec(self.sigma.clone());
        let tau = DVector::from_vec(self.tau.clone());
        let rhs = (&u1.matrix * h2.component_mul(&sig) + h1).component_mul(&tau);
        let v2 = &self.q * rhs;
        let v1 = (&u2.matrix * &v2 + h2).component_mul(&sig);
        (v1, v2)
    }
}

/// Which piece of a split domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    Lower,
    Upper,
}

/// A rectangle cut along one row, with both RPS operators, Q and the
/// kernels f_{Ω_j}(b, ·) of every cut edge.
#[derive(Clone, Debug)]
pub struct GlueSetup {
    pub k: IsingCoupling,
    pub lower: Domain,
    pub upper: Domain,
    pub b: Vec<Coord2>,
    pub u1: RPSOperator,
    pub u2: RPSOperator,
    pub glue: GlueOperator,
    k1: Vec<ComplexField>,
    k2: Vec<ComplexField>,
}

impl GlueSetup {
    pub fn new(d: &Domain, cut: CutSpec, k: &IsingCoupling) -> Result<Self> {
        let (lower, upper, b) = split_domain(d, cut)?;
        let u1 = build_rps_direct(&lower, &b, k)?;
        let u2 = build_rps_direct(&upper, &b, k)?;
        let glue = glue(&u1, &u2)?;
        let kernels = |dom: &Domain| -> Result<Vec<ComplexField>> {
            par::map(Policy::default(), &b, |&y| kernel_field(dom, y, k)).into_iter().collect()
        };
        let k1 = kernels(&lower)?;
        let k2 = kernels(&upper)?;
        Ok(GlueSetup { k: *k, lower, upper, b, u1, u2, glue, k1, k2 })
    }

    pub fn domain(&self, piece: Piece) -> &Domain {
        match piece {
            Piece::Lower => &self.lower,
            Piece::Upper => &self.upper,
        }
    }

    /// f_{Ω_j}(x, ·) for a boundary edge x of the piece.
    pub fn source_field(&self, piece: Piece, x: Coord2) -> Result<ComplexField> {
        kernel_field(self.domain(piece), x, &self.k)
    }

    fn restriction(&self, f: &ComplexField) -> Result<Vec<Complex64>> {
        self.b.iter().map(|&e| f.value(e)).collect()
    }

    /// u₂ = Q h₁ in R₂-coordinates, h₁ the restriction of f_{Ω₁}(x, ·) to 𝔟.
    pub fn u2_from(&self, f1_restriction: &[Complex64]) -> Result<DVector<f64>> {
        let h1 = CauchyData::project(self.b.clone(), self.u1.sides.clone(), Space::I, f1_restriction)?;
        let zero = DVector::zeros(self.b.len());
        Ok(self.glue.fixed_point(&self.u1, &self.u2, &h1.t, &zero).1)
    }

    /// f_Ω(x, ·) on 𝔟 as (Id + U₂) Q f_{Ω₁}(x, ·)|𝔟.
    pub fn observable_on_cut(&self, f1_restriction: &[Complex64]) -> Result<Vec<Complex64>> {
        let u2 = self.u2_from(f1_restriction)?;
        let v2 = &self.u2.matrix * &u2;
        Ok(self.u2.sides.iter().enumerate().map(|(i, &s)| u2[i] * r_line(s) + v2[i] * i_line(s)).collect())
    }

    fn check_source(&self, x: Coord2) -> Result<()> {
        if self.b.contains(&x) || !self.lower.is_boundary(x) {
            return Err(Error::InvalidPosition(format!("{x} must be a boundary edge of the lower piece off the cut")));
        }
        Ok(())
    }

    /// f_Ω(x, y) for x on ∂Ω₁ ∖ 𝔟 and y in Ω₂.
    pub fn pair_across(&self, x: Coord2, y: Coord2) -> Result<Complex64> {
        self.check_source(x)?;
        if !self.upper.contains_edge(y) {
            return Err(Error::UnknownEdge(y));
        }
        let f1 = self.source_field(Piece::Lower, x)?;
        let u2 = self.u2_from(&self.restriction(&f1)?)?;
        let mut acc = ZERO;
        for (j, kf) in self.k2.iter().enumerate() {
            acc += u2[j] * kf.value(y)?;
        }
        Ok(acc)
    }

    /// f_Ω(x, y) for x on ∂Ω₁ ∖ 𝔟 and y ≠ x in Ω₁.
    pub fn pair_same_side(&self, x: Coord2, y: Coord2) -> Result<Complex64> {
        self.check_source(x)?;
        if y == x {
            return Err(Error::InvalidPosition(format!("target {y} coincides with the source")));
        }
        if !self.lower.contains_edge(y) {
            return Err(Error::UnknownEdge(y));
        }
        let f1 = self.source_field(Piece::Lower, x)?;
        let u2 = self.u2_from(&self.restriction(&f1)?)?;
        let zero = DVector::zeros(self.b.len());
        let h1 = CauchyData::project(self.b.clone(), self.u1.sides.clone(), Space::I, &self.restriction(&f1)?)?;
        let (u1, _) = self.glue.fixed_point(&self.u1, &self.u2, &h1.t, &zero);
        debug_assert_eq!(u2.len(), u1.len());
        let mut acc = f1.value(y)?;
        for (j, kf) in self.k1.iter().enumerate() {
            acc += u1[j] * kf.value(y)?;
        }
        Ok(acc)
    }

    /// f_Ω(x, ·) on all of Ω, assembled from the two pieces.
    pub fn glued_field(&self, x: Coord2) -> Result<ComplexField> {
        let mut out = ComplexField::new();
        for &e in self.lower.edges() {
            if e != x && !self.b.contains(&e) {
                out.insert(e, self.pair_same_side(x, e)?);
            }
        }
        for &e in self.upper.edges() {
            out.insert(e, self.pair_across(x, e)?);
        }
        out.insert(x, self.source_field(Piece::Lower, x)?.value(x)?);
        Ok(out)
    }
}

/// Cut edges must be horizontal for the row cut.
pub fn is_row_cut(b: &[Coord2]) -> bool {
    b.iter().all(|e| e.kind() == CellKind::HorizontalEdge) && b.windows(2).all(|w| w[0].y2 == w[1].y2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_rectangle;

    #[test]
    fn lines_are_perpendicular() {
        for s in [Side::Top, Side::Bottom, Side::Left, Side::Right] {
            assert!(coord(r_line(s), i_line(s)).abs() < 1e-15);
        }
        assert_eq!(r_line(Side::Bottom), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cauchy_round_trip() {
        let b = vec![Coord2::new(1, 0), Coord2::new(3, 0)];
        let c = CauchyData::new(b, vec![Side::Bottom; 2], Space::I, DVector::from_vec(vec![1.5, -2.0])).unwrap();
        let back = CauchyData::project(c.b.clone(), c.sides.clone(), Space::I, &c.values()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_interior_edges() {
        let d = build_rectangle(RectangleSpec::new(4, 4)).unwrap();
        let k = IsingCoupling::critical();
        assert!(build_rps_direct(&d, &[Coord2::new(3, 2)], &k).is_err());
        assert!(build_rps_direct(&d, &[], &k).is_err());
    }

    #[test]
    fn identical_fixed_point_is_rejected() {
        // U₁ = U₂ = diag(1, 1) with matching lines makes Id − U₁σU₂τ singular when σ = τ = −1
        let b = vec![Coord2::new(1, 2), Coord2::new(3, 2)];
        let u = |sides: Vec<Side>| RPSOperator {
            b: b.clone(),
            sides,
            matrix: RealMatrix::identity(2, 2),
            method: RpsMethod::Direct,
        };
        let u1 = u(vec![Side::Top; 2]);
        let u2 = u(vec![Side::Bottom; 2]);
        let mut w = u2.clone();
        w.matrix = -RealMatrix::identity(2, 2);
        assert!(matches!(glue(&u1, &w), Err(Error::IllConditioned(_))));
        assert!(glue(&u1, &u2).is_ok());
    }
}
