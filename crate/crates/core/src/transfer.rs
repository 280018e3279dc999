//! Transfer matrix on the plus-boundary row space S₊, its Clifford generators,
//! the induced rotation on generator space, and fermion and spin correlations.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{CellKind, Coord2, RectangleSpec};
use crate::numerics::{self, max_abs, ComplexMatrix, RealMatrix, SymEig};
use crate::propagator::{propagate_row, SpectralSplit};
use crate::shol_core::{face_relation_coefficients, IsingCoupling, I, ONE, ZERO};

pub const MAX_COLUMNS: usize = 10;

/// Row configurations σ ∈ {±1}^I with the rightmost spin fixed to +1.
/// Bit j of the mask is set when site j carries a minus spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinBasis {
    /// |I|, the number of sites.
    pub width: usize,
}

impl SpinBasis {
    pub fn new(width: usize) -> Result<Self> {
        if width < 3 {
            return Err(Error::DimensionTooSmall(format!("width {width} < 3")));
        }
        if width - 1 > MAX_COLUMNS {
            return Err(Error::InvalidArgument(format!("|I*| = {} exceeds {MAX_COLUMNS}", width - 1)));
        }
        Ok(SpinBasis { width })
    }

    /// |I*|.
    pub fn n(&self) -> usize {
        self.width - 1
    }

    pub fn dim(&self) -> usize {
        1 << self.n()
    }

    pub fn spin(&self, mask: usize, site: usize) -> f64 {
        if site + 1 == self.width || (mask >> site) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferLabel {
    VhHalf,
    Vv,
    V,
    Custom,
}

#[derive(Clone, Debug)]
pub struct TransferOp {
    pub label: TransferLabel,
    pub matrix: RealMatrix,
}

pub fn build_vh_half(basis: SpinBasis, k: &IsingCoupling) -> TransferOp {
    let d = DVector::from_fn(basis.dim(), |m, _| {
        let e: f64 = (0..basis.width - 1).map(|x| basis.spin(m, x) * basis.spin(m, x + 1)).sum();
        (k.beta / 2.0 * e).exp()
    });
    TransferOp { label: TransferLabel::VhHalf, matrix: RealMatrix::from_diagonal(&d) }
}

pub fn build_vv(basis: SpinBasis, k: &IsingCoupling) -> TransferOp {
    let dim = basis.dim();
    let m = RealMatrix::from_fn(dim, dim, |s, r| {
        if basis.spin(s, 0) != basis.spin(r, 0) {
            return 0.0;
        }
        let e: f64 = (0..basis.width).map(|x| basis.spin(s, x) * basis.spin(r, x)).sum();
        (k.beta * e).exp()
    });
    TransferOp { label: TransferLabel::Vv, matrix: m }
}

/// V = (V^h)^{1/2} V^v (V^h)^{1/2}.
pub fn build_v(basis: SpinBasis, k: &IsingCoupling) -> TransferOp {
    let h = build_vh_half(basis, k).matrix;
    let vv = build_vv(basis, k).matrix;
    TransferOp { label: TransferLabel::V, matrix: &h * vv * &h }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    P,
    Q,
    Psi,
    PsiBar,
}

/// A generator acting as a generalized permutation: e_m ↦ coef[m] e_{target[m]}.
#[derive(Clone, Debug)]
pub struct CliffordGen {
    pub kind: GenKind,
    pub index: usize,
    pub target: Vec<usize>,
    pub coef: Vec<Complex64>,
}

impl CliffordGen {
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; v.len()];
        for (m, x) in v.iter().enumerate() {
            out[self.target[m]] += self.coef[m] * x;
        }
        out
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let n = self.target.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (s, (&t, &c)) in self.target.iter().zip(&self.coef).enumerate() {
            m[(t, s)] = c;
        }
        m
    }
}

fn generator(basis: SpinBasis, kind: GenKind, j: usize) -> Result<CliffordGen> {
    if j >= basis.n() {
        return Err(Error::InvalidPosition(format!("generator index {j} outside 0..{}", basis.n())));
    }
    let flip = (1usize << (j + 1)) - 1;
    let (cp, cq) = match kind {
        GenKind::P => (ONE, ZERO),
        GenKind::Q => (ZERO, ONE),
        GenKind::Psi => (I * FRAC_1_SQRT_2, I * FRAC_1_SQRT_2),
        GenKind::PsiBar => (ONE * FRAC_1_SQRT_2, -ONE * FRAC_1_SQRT_2),
    };
    let dim = basis.dim();
    let target = (0..dim).map(|m| m ^ flip).collect();
    let coef = (0..dim).map(|m| cp * basis.spin(m, j + 1) + cq * I * basis.spin(m, j)).collect();
    Ok(CliffordGen { kind, index: j, target, coef })
}

/// p_j: flips sites 0..=j, coefficient σ_{j+1}.
pub fn clifford_p(basis: SpinBasis, j: usize) -> Result<CliffordGen> {
    generator(basis, GenKind::P, j)
}

/// q_j: flips sites 0..=j, coefficient i σ_j.
pub fn clifford_q(basis: SpinBasis, j: usize) -> Result<CliffordGen> {
    generator(basis, GenKind::Q, j)
}

/// ψ_j = (i/√2)(p_j + q_j).
pub fn psi(basis: SpinBasis, j: usize) -> Result<CliffordGen> {
    generator(basis, GenKind::Psi, j)
}

/// ψ̄_j = (1/√2)(p_j − q_j).
pub fn psibar(basis: SpinBasis, j: usize) -> Result<CliffordGen> {
    generator(basis, GenKind::PsiBar, j)
}

/// ψ_0..ψ_{n−1}, ψ̄_0..ψ̄_{n−1} as dense matrices.
pub fn fermion_generators(basis: SpinBasis) -> Vec<ComplexMatrix> {
    let n = basis.n();
    (0..n)
        .map(|j| psi(basis, j))
        .chain((0..n).map(|j| psibar(basis, j)))
        .map(|g| g.expect("index in range").to_dense())
        .collect()
}

fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(Complex64::from)
}

/// Coefficients of V⁻¹ w V in the (ψ, ψ̄) basis, one row per generator w.
pub fn induced_rotation_bruteforce(v: &TransferOp, basis: SpinBasis) -> Result<ComplexMatrix> {
    let n = basis.n();
    let dim = basis.dim() as f64;
    let vc = to_complex(&v.matrix);
    let vi = to_complex(&numerics::inverse(&v.matrix)?);
    let gens = fermion_generators(basis);
    let mut m = ComplexMatrix::zeros(2 * n, 2 * n);
    for (r, w) in gens.iter().enumerate() {
        let wp = &vi * w * &vc;
        let mut recon = ComplexMatrix::zeros(wp.nrows(), wp.ncols());
        for (l, g) in gens.iter().enumerate() {
            let anti = (&wp * g + g * &wp).trace() / (2.0 * dim);
            let c = if l < n { -anti } else { anti };
            m[(r, l)] = c;
            recon += g * c;
        }
        let err = max_abs(&(recon - &wp));
        if err > 1e-9 * max_abs(&wp).max(1.0) {
            return Err(Error::NonClosure(err));
        }
    }
    Ok(m)
}

/// Change of basis from (p, q) to (ψ, ψ̄): row r holds the (p, q) coefficients of the r-th fermion.
fn psi_from_pq(n: usize) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(2 * n, 2 * n);
    let h = FRAC_1_SQRT_2;
    for j in 0..n {
        c[(j, j)] = I * h;
        c[(j, n + j)] = I * h;
        c[(n + j, j)] = ONE * h;
        c[(n + j, n + j)] = -ONE * h;
    }
    c
}

/// The induced rotation composed from the conjugation formulas for
/// (V^h)^{1/2} and V^v, in the same layout as the brute-force version.
pub fn induced_rotation_closed_form(n: usize, k: &IsingCoupling) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(format!("|I*| = {n} < 2")));
    }
    let (c, s) = (k.c, k.s);
    let mut th = ComplexMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        th[(j, j)] = ONE * c;
        th[(j, n + j)] = -I * s;
        th[(n + j, j)] = I * s;
        th[(n + j, n + j)] = ONE * c;
    }
    let (cc, ss) = (k.big_c / k.big_s, 1.0 / k.big_s);
    let mut tv = ComplexMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        if j + 1 < n {
            tv[(j, j)] = ONE * cc;
            tv[(j, n + j + 1)] = I * ss;
        } else {
            tv[(j, j)] = ONE;
        }
        if j > 0 {
            tv[(n + j, j - 1)] = -I * ss;
            tv[(n + j, n + j)] = ONE * cc;
        } else {
            tv[(n + j, n + j)] = ONE;
        }
    }
    let t = &th * tv * &th;
    let b = psi_from_pq(n);
    let bi = numerics::complex_inverse(&b)?;
    Ok(b * t * bi)
}

/// R: ψ_k ↔ ψ̄_{n−1−k} on coefficient vectors.
pub fn reflection_r(n: usize) -> ComplexMatrix {
    let mut r = ComplexMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        r[(k, n + n - 1 - k)] = ONE;
        r[(n + n - 1 - k, k)] = ONE;
    }
    r
}

/// Deviation of `m` from commuting with R and with the conjugate-linear J.
pub fn symmetry_defects(m: &ComplexMatrix) -> (f64, f64) {
    let n = m.nrows() / 2;
    let r = reflection_r(n);
    let dr = max_abs(&(m * &r - &r * m));
    let mut swap = ComplexMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        swap[(k, n + k)] = ONE;
        swap[(n + k, k)] = ONE;
    }
    let dj = max_abs(&(&swap * m.map(|z| z.conj()) * &swap - m));
    (dr, dj)
}

/// Eigenvalues of V sorted descending.
pub fn tm_spectrum(v: &TransferOp) -> Result<Vec<f64>> {
    let e = numerics::sym_eig(&v.matrix)?;
    Ok(e.values.iter().rev().copied().collect())
}

/// The normalized eigenvector of the top eigenvalue Λ₀, sign fixed by a positive first nonzero entry.
pub fn physical_vacuum(v: &TransferOp) -> Result<(f64, DVector<f64>)> {
    let e = numerics::sym_eig(&v.matrix)?;
    let d = e.values.len();
    let top = e.values[d - 1];
    if d > 1 && top - e.values[d - 2] <= 1e-10 * top.abs() {
        return Err(Error::DegenerateTop(top - e.values[d - 2]));
    }
    let mut vac = e.vectors.column(d - 1).into_owned();
    if vac.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0) {
        vac = -vac;
    }
    Ok((top, vac))
}

/// Eigenoperators of T_V in (ψ, ψ̄) coefficients with their eigenvalues:
/// each eigenvector f of P with P f = μ f gives a = Σ conj f_k ψ_k + f_k ψ̄_k with T_V(a) = a/μ.
pub fn eigenoperators(split: &SpectralSplit) -> Vec<(Vec<Complex64>, f64)> {
    let mut out = Vec::new();
    for (cols, lift) in [(split.w_circ(), true), (split.w_expanding(), false)] {
        for a in 0..split.n {
            let t = if lift { split.lambdas[a] } else { 1.0 / split.lambdas[a] };
            out.push((cols.column(a).iter().map(|z| z.conj()).collect(), t));
        }
    }
    out
}

/// Largest relative residual ‖V(aw) − tΛ(aw)‖ / ‖tΛ(aw)‖ over the eigenvectors w of V (eigenvalue Λ),
/// where `coef` are the (ψ, ψ̄) coefficients of a with T_V(a) = t a. Vectors with aw = 0 are skipped.
pub fn ladder_residual(v: &TransferOp, basis: SpinBasis, coef: &[Complex64], t: f64) -> Result<f64> {
    let a = linear_operator(basis, coef)?;
    let vc = to_complex(&v.matrix);
    let e = numerics::sym_eig(&v.matrix)?;
    let mut worst: f64 = 0.0;
    for (i, lam) in e.values.iter().enumerate() {
        let w = e.vectors.column(i).map(Complex64::from);
        let aw = &a * &w;
        let norm = aw.norm();
        if norm < 1e-8 {
            continue;
        }
        let lhs = &vc * &aw;
        worst = worst.max((lhs - &aw * Complex64::from(lam * t)).norm() / (norm * lam * t));
    }
    Ok(worst)
}

/// Σ coef_r g_r over (ψ_0..ψ_{n−1}, ψ̄_0..ψ̄_{n−1}) as a dense matrix.
pub fn linear_operator(basis: SpinBasis, coef: &[Complex64]) -> Result<ComplexMatrix> {
    let gens = fermion_generators(basis);
    if coef.len() != gens.len() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} generators", coef.len(), gens.len())));
    }
    Ok(gens.iter().zip(coef).fold(ComplexMatrix::zeros(basis.dim(), basis.dim()), |acc, (g, c)| acc + g * *c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertionKind {
    Psi,
    PsiBar,
    /// ½(ψ̄ − ψ)
    PsiUp,
    /// (i/2)(ψ + ψ̄)
    PsiDown,
    Sigma,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FermionInsertion {
    pub kind: InsertionKind,
    pub z: Coord2,
}

impl FermionInsertion {
    pub fn new(kind: InsertionKind, z: Coord2) -> Self {
        FermionInsertion { kind, z }
    }
}

/// An operator at row y: either a linear combination of (ψ_j, ψ̄_j) or a spin at a site.
#[derive(Clone, Debug)]
enum RowOperator {
    Linear(Vec<Complex64>),
    Spin(usize),
}

/// The transfer matrix of a box together with its eigendecomposition and
/// the c-number coefficients that extend fermions to vertical edges.
#[derive(Clone, Debug)]
pub struct FermionSystem {
    pub spec: RectangleSpec,
    pub basis: SpinBasis,
    pub coupling: IsingCoupling,
    pub v: TransferOp,
    eig: SymEig,
    gens: Vec<CliffordGen>,
    /// ψ(x + i/2) = Σ_j a[x][j] ψ_j + b[x][j] ψ̄_j.
    vert_a: Vec<Vec<Complex64>>,
    vert_b: Vec<Vec<Complex64>>,
}

impl FermionSystem {
    pub fn new(spec: RectangleSpec, k: &IsingCoupling) -> Result<Self> {
        if spec.height < 2 {
            return Err(Error::DimensionTooSmall(format!("height {} < 2", spec.height)));
        }
        let basis = SpinBasis::new(spec.width)?;
        let n = basis.n();
        let v = build_v(basis, k);
        let eig = numerics::sym_eig(&v.matrix)?;
        let gens = (0..n).map(|j| psi(basis, j)).chain((0..n).map(|j| psibar(basis, j))).collect::<Result<Vec<_>>>()?;
        let mut vert_a = vec![vec![ZERO; n]; n + 1];
        let mut vert_b = vec![vec![ZERO; n]; n + 1];
        for j in 0..n {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            let out_re = propagate_row(&e, k)?.vertical;
            e[j] = I;
            let out_im = propagate_row(&e, k)?.vertical;
            for x in 0..=n {
                vert_a[x][j] = (out_re[x] - I * out_im[x]) / 2.0;
                vert_b[x][j] = (out_re[x] + I * out_im[x]) / 2.0;
            }
        }
        Ok(FermionSystem { spec, basis, coupling: *k, v, eig, gens, vert_a, vert_b })
    }

    pub fn rows(&self) -> usize {
        self.spec.rows()
    }

    /// V^y applied to a real vector, y of either sign.
    pub fn power_apply(&self, y: i32, x: &DVector<f64>) -> DVector<f64> {
        let q = &self.eig.vectors;
        let mut c = q.transpose() * x;
        for (ci, l) in c.iter_mut().zip(self.eig.values.iter()) {
            *ci *= l.powi(y);
        }
        q * c
    }

    fn power_apply_c(&self, y: i32, x: &[Complex64]) -> Vec<Complex64> {
        let re = DVector::from_iterator(x.len(), x.iter().map(|z| z.re));
        let im = DVector::from_iterator(x.len(), x.iter().map(|z| z.im));
        let (a, b) = (self.power_apply(y, &re), self.power_apply(y, &im));
        a.iter().zip(b.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect()
    }

    pub fn power_matrix(&self, y: i32) -> RealMatrix {
        let q = &self.eig.vectors;
        let d = DVector::from_iterator(q.nrows(), self.eig.values.iter().map(|l| l.powi(y)));
        q * RealMatrix::from_diagonal(&d) * q.transpose()
    }

    fn check_row(&self, y: i32) -> Result<()> {
        if y < 0 || y as usize > self.rows() {
            return Err(Error::InvalidPosition(format!("row {y} outside 0..={}", self.rows())));
        }
        Ok(())
    }

    /// Row index and the (ψ, ψ̄)-coefficients of ψ(z) and ψ̄(z) at a horizontal or vertical edge.
    pub fn fermion_coefficients(&self, z: Coord2) -> Result<(i32, Vec<Complex64>, Vec<Complex64>)> {
        let n = self.basis.n();
        let mut cpsi = vec![ZERO; 2 * n];
        let mut cbar = vec![ZERO; 2 * n];
        match z.kind() {
            CellKind::HorizontalEdge => {
                let j = (z.x2 - 1) / 2;
                let y = z.y2 / 2;
                if z.x2 < 0 || j as usize >= n {
                    return Err(Error::InvalidPosition(format!("{z} outside the box")));
                }
                self.check_row(y)?;
                cpsi[j as usize] = ONE;
                cbar[n + j as usize] = ONE;
                Ok((y, cpsi, cbar))
            }
            CellKind::VerticalEdge => {
                let x = z.x2 / 2;
                let y = (z.y2 - 1) / 2;
                if z.x2 < 0 || x as usize > n || z.y2 < 0 || y as usize >= self.rows() {
                    return Err(Error::InvalidPosition(format!("{z} outside the box")));
                }
                let (a, b) = (&self.vert_a[x as usize], &self.vert_b[x as usize]);
                for j in 0..n {
                    cpsi[j] = a[j];
                    cpsi[n + j] = b[j];
                    cbar[j] = b[j].conj();
                    cbar[n + j] = a[j].conj();
                }
                Ok((y, cpsi, cbar))
            }
            _ => Err(Error::InvalidPosition(format!("{z} is not an edge"))),
        }
    }

    fn row_operator(&self, ins: &FermionInsertion) -> Result<(i32, RowOperator)> {
        if ins.kind == InsertionKind::Sigma {
            let z = ins.z;
            if z.kind() != CellKind::Vertex || z.x2 < 0 || z.x2 / 2 >= self.spec.width as i32 {
                return Err(Error::InvalidPosition(format!("{z} is not a vertex of the box")));
            }
            let y = z.y2 / 2;
            self.check_row(y)?;
            return Ok((y, RowOperator::Spin(z.x2 as usize / 2)));
        }
        let (y, cpsi, cbar) = self.fermion_coefficients(ins.z)?;
        let h = 0.5;
        let coef = match ins.kind {
            InsertionKind::Psi => cpsi,
            InsertionKind::PsiBar => cbar,
            InsertionKind::PsiUp => cpsi.iter().zip(&cbar).map(|(p, b)| (b - p) * h).collect(),
            InsertionKind::PsiDown => cpsi.iter().zip(&cbar).map(|(p, b)| (p + b) * I * h).collect(),
            InsertionKind::Sigma => unreachable!(),
        };
        Ok((y, RowOperator::Linear(coef)))
    }

    fn apply_row(&self, op: &RowOperator, v: &[Complex64]) -> Vec<Complex64> {
        match op {
            RowOperator::Linear(coef) => {
                let mut out = vec![ZERO; v.len()];
                for (g, c) in self.gens.iter().zip(coef) {
                    if *c == ZERO {
                        continue;
                    }
                    for (o, x) in out.iter_mut().zip(g.apply(v)) {
                        *o += c * x;
                    }
                }
                out
            }
            RowOperator::Spin(site) => v.iter().enumerate().map(|(m, x)| x * self.basis.spin(m, *site)).collect(),
        }
    }

    /// V^{−y} O V^y as a dense matrix for one insertion.
    pub fn operator_matrix(&self, ins: &FermionInsertion) -> Result<ComplexMatrix> {
        let (y, op) = self.row_operator(ins)?;
        let dim = self.basis.dim();
        let mut o = ComplexMatrix::zeros(dim, dim);
        for c in 0..dim {
            let mut e = vec![ZERO; dim];
            e[c] = ONE;
            let col = self.apply_row(&op, &e);
            o.set_column(c, &DVector::from_vec(col));
        }
        let vp = to_complex(&self.power_matrix(y));
        let vm = to_complex(&self.power_matrix(-y));
        Ok(vm * o * vp)
    }

    /// ⟨e₊| V^N Φ₁⋯Φ_m |e₊⟩ / ⟨e₊| V^N |e₊⟩ with Φ = V^{−y} O V^y, multiplied as written.
    pub fn correlation(&self, insertions: &[FermionInsertion]) -> Result<Complex64> {
        let ops = insertions.iter().map(|i| self.row_operator(i)).collect::<Result<Vec<_>>>()?;
        let dim = self.basis.dim();
        let mut v = vec![ZERO; dim];
        v[0] = ONE;
        for (y, op) in ops.iter().rev() {
            let w = self.power_apply_c(*y, &v);
            let w = self.apply_row(op, &w);
            v = self.power_apply_c(-*y, &w);
        }
        let n = self.rows() as i32;
        let top = self.power_apply(n, &DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 }));
        let num: Complex64 = top.iter().zip(&v).map(|(t, x)| x * *t).sum();
        Ok(num / top[0])
    }

    /// ⟨e₊| V^N |e₊⟩.
    pub fn vacuum_amplitude(&self) -> f64 {
        let dim = self.basis.dim();
        self.power_apply(self.rows() as i32, &DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 }))[0]
    }

    /// Dense ψ(z), ψ̄(z) at any edge of the box.
    pub fn fermion_operators(&self, z: Coord2) -> Result<(ComplexMatrix, ComplexMatrix)> {
        Ok((
            self.operator_matrix(&FermionInsertion::new(InsertionKind::Psi, z))?,
            self.operator_matrix(&FermionInsertion::new(InsertionKind::PsiBar, z))?,
        ))
    }

    /// Largest operator-norm residual (max entry) of the face relations on `face`.
    pub fn operator_face_residual(&self, face: Coord2) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for rel in face_relation_coefficients(&self.coupling) {
            let (pa, ba) = self.fermion_operators(face.step(rel.a))?;
            let (pb, bb) = self.fermion_operators(face.step(rel.b))?;
            let r = pa * rel.c1 + ba * rel.d1 - pb * rel.c2 - bb * rel.d2;
            worst = worst.max(max_abs(&r));
        }
        Ok(worst)
    }

    /// ψ + iψ̄ on the left side, ψ − iψ̄ on the right side.
    pub fn operator_boundary_residual(&self, z: Coord2) -> Result<f64> {
        let (p, b) = self.fermion_operators(z)?;
        let right = 2 * self.basis.n() as i32;
        let sign = match z.x2 {
            0 => ONE,
            x if x == right => -ONE,
            _ => return Err(Error::InvalidPosition(format!("{z} is not a side edge"))),
        };
        Ok(max_abs(&(p + b * (I * sign))))
    }

    /// ‖(ψ(z) + ψ̄(z)) e₊‖.
    pub fn bottom_state_residual(&self, z: Coord2) -> Result<f64> {
        let (p, b) = self.fermion_operators(z)?;
        Ok((p + b).column(0).norm())
    }
}

/// (ψ(z), ψ̄(z)) at a vertical edge, built from the c-number row extension.
pub fn extend_fermion_to_vertical(sys: &FermionSystem, z: Coord2) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if z.kind() != CellKind::VerticalEdge {
        return Err(Error::InvalidPosition(format!("{z} is not a vertical edge")));
    }
    sys.fermion_operators(z)
}

pub fn fermion_correlation(
    spec: RectangleSpec,
    insertions: &[FermionInsertion],
    k: &IsingCoupling,
) -> Result<Complex64> {
    FermionSystem::new(spec, k)?.correlation(insertions)
}

/// Z⁺ = e^{β|I*|} ⟨e₊| V^N |e₊⟩, the plus-boundary partition function.
pub fn partition_function_tm(spec: RectangleSpec, k: &IsingCoupling) -> Result<f64> {
    let basis = SpinBasis::new(spec.width)?;
    let v = build_v(basis, k);
    let mut x = DVector::zeros(basis.dim());
    x[0] = 1.0;
    for _ in 0..spec.rows() {
        x = &v.matrix * x;
    }
    Ok((k.beta * basis.n() as f64).exp() * x[0])
}

/// ⟨Π σ_v⟩ with plus boundary conditions.
pub fn spin_correlation(spec: RectangleSpec, vertices: &[Coord2], k: &IsingCoupling) -> Result<f64> {
    let sys = FermionSystem::new(spec, k)?;
    let ins: Vec<FermionInsertion> = vertices.iter().map(|v| FermionInsertion::new(InsertionKind::Sigma, *v)).collect();
    Ok(sys.correlation(&ins)?.re)
}
