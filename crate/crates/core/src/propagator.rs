//! Row-to-row propagation of massive s-holomorphic functions in a vertical strip.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Side;
use crate::lattice::{build_rectangle, Coord2, RectangleSpec};
use crate::numerics::{self, ComplexMatrix, RealMatrix};
use crate::shol_core::{boundary_line, solve_rbvp, IsingCoupling, RbvpConstraint, I, ZERO};

/// P_β in split layout: the first n coordinates are real parts, the last n imaginary parts.
#[derive(Clone, Debug)]
pub struct PropagatorMatrix {
    pub n: usize,
    pub matrix: RealMatrix,
    pub coupling: IsingCoupling,
}

/// [[A, B], [conj B, conj A]] acting on (f, conj f).
#[derive(Clone, Debug)]
pub struct ComplexifiedPropagator {
    pub n: usize,
    pub matrix: ComplexMatrix,
}

/// The coefficient matrices of f and conj f.
pub fn coefficients(n: usize, k: &IsingCoupling) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(format!("|I*| = {n} < 2")));
    }
    let (s, c) = (k.big_s, k.big_c);
    let mut a = ComplexMatrix::zeros(n, n);
    let mut b = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        if i > 0 {
            a[(i, i - 1)] = (-s - I) / (2.0 * s);
            b[(i, i - 1)] = Complex64::from(c / (2.0 * s));
        }
        if i + 1 < n {
            a[(i, i + 1)] = (-s + I) / (2.0 * s);
            b[(i, i + 1)] = Complex64::from(c / (2.0 * s));
        }
        a[(i, i)] = Complex64::from(c * c / s);
        b[(i, i)] = Complex64::from(-c);
    }
    let edge_a = Complex64::from((s + c) * c / (2.0 * s));
    let left_b = Complex64::new(-(s + c) * s, c - s) / (2.0 * s);
    a[(0, 0)] = edge_a;
    a[(n - 1, n - 1)] = edge_a;
    b[(0, 0)] = left_b;
    b[(n - 1, n - 1)] = left_b.conj();
    Ok((a, b))
}

/// Real split-layout matrix of f ↦ A f + B conj f.
pub fn split_matrix(a: &ComplexMatrix, b: &ComplexMatrix) -> RealMatrix {
    let n = a.nrows();
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for l in 0..n {
            let (x, y) = (a[(r, l)], b[(r, l)]);
            m[(r, l)] = x.re + y.re;
            m[(r, n + l)] = -x.im + y.im;
            m[(n + r, l)] = x.im + y.im;
            m[(n + r, n + l)] = x.re - y.re;
        }
    }
    m
}

pub fn to_split(f: &[Complex64]) -> DVector<f64> {
    let n = f.len();
    DVector::from_fn(2 * n, |i, _| if i < n { f[i].re } else { f[i - n].im })
}

pub fn from_split(v: &DVector<f64>) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|i| Complex64::new(v[i], v[n + i])).collect()
}

/// Per-site involution f ↦ i·conj f in split layout (Re ↔ Im).
pub fn involution_j(n: usize) -> RealMatrix {
    let mut j = RealMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

pub fn propagator_matrix(n: usize, k: &IsingCoupling) -> Result<PropagatorMatrix> {
    let (a, b) = coefficients(n, k)?;
    Ok(PropagatorMatrix { n, matrix: split_matrix(&a, &b), coupling: *k })
}

impl PropagatorMatrix {
    pub fn a_b(&self) -> (ComplexMatrix, ComplexMatrix) {
        coefficients(self.n, &self.coupling).expect("validated size")
    }

    pub fn apply(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch(format!("{} values for |I*| = {}", f.len(), self.n)));
        }
        Ok(from_split(&(&self.matrix * to_split(f))))
    }

    pub fn complexified(&self) -> ComplexifiedPropagator {
        let (a, b) = self.a_b();
        let n = self.n;
        let mut m = ComplexMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&a);
        m.view_mut((0, n), (n, n)).copy_from(&b);
        m.view_mut((n, 0), (n, n)).copy_from(&b.map(|z| z.conj()));
        m.view_mut((n, n), (n, n)).copy_from(&a.map(|z| z.conj()));
        ComplexifiedPropagator { n, matrix: m }
    }

    /// P^N in split layout.
    pub fn power(&self, rows: usize) -> RealMatrix {
        self.matrix.pow(rows as u32)
    }

    pub fn inverse(&self) -> Result<RealMatrix> {
        numerics::inverse(&self.matrix)
    }
}

impl ComplexifiedPropagator {
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let v = DVector::from_iterator(2 * self.n, f.iter().copied().chain(f.iter().map(|z| z.conj())));
        (&self.matrix * v).iter().copied().collect()
    }
}

/// One step of the strip: values on the vertical edges of the half row
/// (left to right) and on the horizontal edges of the next row.
#[derive(Clone, Debug)]
pub struct RowStep {
    pub vertical: Vec<Complex64>,
    pub next: Vec<Complex64>,
}

/// Extends values on one row of horizontal edges through a strip of faces,
/// by solving the face relations with Riemann lines on the two side edges.
pub fn propagate_row(f: &[Complex64], k: &IsingCoupling) -> Result<RowStep> {
    let n = f.len();
    if n < 2 {
        return Err(Error::DimensionTooSmall(format!("|I*| = {n} < 2")));
    }
    let d = build_rectangle(RectangleSpec::new(n + 1, 2))?;
    let mut cons: Vec<RbvpConstraint> = f
        .iter()
        .enumerate()
        .map(|(j, v)| RbvpConstraint::FixedValue { edge: Coord2::new(2 * j as i32 + 1, 0), value: *v })
        .collect();
    cons.push(RbvpConstraint::BoundaryLine { edge: Coord2::new(0, 1), line: boundary_line(Side::Left), offset: ZERO });
    cons.push(RbvpConstraint::BoundaryLine {
        edge: Coord2::new(2 * n as i32, 1),
        line: boundary_line(Side::Right),
        offset: ZERO,
    });
    let sol = solve_rbvp(&d, k, &cons)?;
    let field = sol.field;
    let vertical = (0..=n).map(|x| field.value(Coord2::new(2 * x as i32, 1))).collect::<Result<_>>()?;
    let next = (0..n).map(|j| field.value(Coord2::new(2 * j as i32 + 1, 2))).collect::<Result<_>>()?;
    Ok(RowStep { vertical, next })
}

#[derive(Clone, Debug)]
pub struct SpectralSplit {
    pub n: usize,
    /// λ_1 > … > λ_n > 1.
    pub lambdas: Vec<f64>,
    /// Split-layout eigenvectors of λ_α, column α.
    pub expanding: RealMatrix,
    /// Split-layout eigenvectors of 1/λ_α, column α.
    pub contracting: RealMatrix,
}

impl SpectralSplit {
    /// W∘ in the (f, conj f) embedding: column α is the image of the eigenvector of 1/λ_α.
    pub fn w_circ(&self) -> ComplexMatrix {
        embed(&self.contracting)
    }

    pub fn w_expanding(&self) -> ComplexMatrix {
        embed(&self.expanding)
    }
}

fn embed(v: &RealMatrix) -> ComplexMatrix {
    let n = v.nrows() / 2;
    ComplexMatrix::from_fn(2 * n, v.ncols(), |r, c| {
        let i = r % n;
        let z = Complex64::new(v[(i, c)], v[(n + i, c)]);
        if r < n {
            z
        } else {
            z.conj()
        }
    })
}

pub fn spectral_split(p: &RealMatrix) -> Result<SpectralSplit> {
    let dim = p.nrows();
    if dim % 2 != 0 || dim == 0 {
        return Err(Error::DimensionMismatch(format!("{dim} is not an even dimension")));
    }
    let n = dim / 2;
    let eig = numerics::sym_eig(p)?;
    let v = &eig.values;
    for i in 0..dim {
        if (v[i] - 1.0).abs() <= 1e-9 {
            return Err(Error::PairingFailure(format!("eigenvalue {} is 1", v[i])));
        }
        if i + 1 < dim && v[i + 1] - v[i] <= 1e-9 {
            return Err(Error::PairingFailure(format!("eigenvalues {} and {} are not distinct", v[i], v[i + 1])));
        }
    }
    for i in 0..n {
        let (small, large) = (v[i], v[dim - 1 - i]);
        if small <= 0.0 || (small * large - 1.0).abs() > 1e-8 * large {
            return Err(Error::PairingFailure(format!("{large} has no reciprocal partner ({small})")));
        }
    }
    let lambdas: Vec<f64> = (0..n).map(|a| v[dim - 1 - a]).collect();
    let mut expanding = RealMatrix::zeros(dim, n);
    let mut contracting = RealMatrix::zeros(dim, n);
    for a in 0..n {
        expanding.set_column(a, &eig.vectors.column(dim - 1 - a));
        contracting.set_column(a, &eig.vectors.column(a));
    }
    Ok(SpectralSplit { n, lambdas, expanding, contracting })
}

/// {λ₀·Π_{α∈S} λ_α^{−1}}, sorted descending.
pub fn gamma_spectrum(lambdas: &[f64], lambda0: f64) -> Vec<f64> {
    let mut out = vec![lambda0];
    for &l in lambdas {
        let more: Vec<f64> = out.iter().map(|x| x / l).collect();
        out.extend(more);
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}
