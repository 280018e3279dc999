//! Small dense linear algebra: symmetric eigenproblems, least squares with
//! rank reporting, LU solves and Pfaffians.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative singular-value threshold used for every rank decision.
pub const RANK_RTOL: f64 = 1e-10;

const MAX_ITER: usize = 100_000;

#[derive(Clone, Debug)]
pub struct SymEig {
    /// Ascending.
    pub values: DVector<f64>,
    /// Column `i` belongs to `values[i]`.
    pub vectors: RealMatrix,
}

#[derive(Clone, Debug)]
pub struct LsqReport {
    pub solution: DVector<f64>,
    pub residual: f64,
    pub rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn inf_norm<T: nalgebra::ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.clone().modulus()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs<T: nalgebra::ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.clone().modulus()).fold(0.0, f64::max)
}

pub fn sym_eig(m: &RealMatrix) -> Result<SymEig> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let scale = inf_norm(m).max(f64::MIN_POSITIVE);
    let asym = inf_norm(&(m - m.transpose()));
    if asym >= 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Singular("symmetric eigensolver did not converge".into()))?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = RealMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(SymEig { values, vectors })
}

/// Thin SVD with descending singular values.
struct Svd {
    u: RealMatrix,
    s: DVector<f64>,
    v_t: RealMatrix,
}

impl Svd {
    fn recompose(&self) -> RealMatrix {
        &self.u * RealMatrix::from_diagonal(&self.s) * &self.v_t
    }
}

fn reconstructs(d: &Svd, a: &RealMatrix) -> bool {
    max_abs(&(d.recompose() - a)) <= 1e-10 * max_abs(a).max(f64::MIN_POSITIVE)
}

// nalgebra's bidiagonal SVD occasionally returns a wrong factorization for
// nearly rank-deficient input; such results are caught by recomposition and
// redone from the eigendecomposition of [[0, A], [Aᵀ, 0]].
fn svd(a: &RealMatrix) -> Result<Svd> {
    if let Some(dec) = SVD::try_new(a.clone(), true, true, f64::EPSILON, MAX_ITER) {
        let d = Svd { u: dec.u.expect("u requested"), s: dec.singular_values, v_t: dec.v_t.expect("v_t requested") };
        if reconstructs(&d, a) {
            return Ok(d);
        }
    }
    let d = svd_jordan_wielandt(a)?;
    if !reconstructs(&d, a) {
        return Err(Error::Singular("SVD failed to reproduce its input".into()));
    }
    Ok(d)
}

fn svd_jordan_wielandt(a: &RealMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut h = RealMatrix::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::Singular("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m + n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut u = RealMatrix::zeros(m, k);
    let mut v = RealMatrix::zeros(n, k);
    let mut s = DVector::zeros(k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(i);
        let (cu, cv) = (col.rows(0, m), col.rows(m, n));
        let (nu, nv) = (cu.norm(), cv.norm());
        s[c] = eig.eigenvalues[i].max(0.0);
        if nu > 1e-8 && nv > 1e-8 {
            u.set_column(c, &(cu / nu));
            v.set_column(c, &(cv / nv));
        }
    }
    // Columns for zero singular values are completed to orthonormal sets.
    complete_orthonormal(&mut u);
    complete_orthonormal(&mut v);
    Ok(Svd { u, s, v_t: v.transpose() })
}

fn complete_orthonormal(q: &mut RealMatrix) {
    let (rows, cols) = q.shape();
    let mut basis = 0;
    for c in 0..cols {
        if q.column(c).norm() > 0.5 {
            continue;
        }
        while basis < rows {
            let mut e = DVector::zeros(rows);
            e[basis] = 1.0;
            basis += 1;
            for j in 0..cols {
                if j != c && q.column(j).norm() > 0.5 {
                    let p = q.column(j).dot(&e);
                    e -= q.column(j) * p;
                }
            }
            let norm = e.norm();
            if norm > 1e-6 {
                q.set_column(c, &(e / norm));
                break;
            }
        }
    }
}

/// Minimizes ‖Ax − b‖₂ through a truncated SVD.
pub fn least_squares(a: &RealMatrix, b: &DVector<f64>) -> Result<LsqReport> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch(format!("degenerate {m}x{n} system")));
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!("rhs has {} rows, matrix {m}", b.len())));
    }
    let dec = svd(a)?;
    let sv = &dec.s;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let thresh = RANK_RTOL * sigma_max;
    let rank = sv.iter().filter(|&&s| s > thresh).count();
    let (u, vt) = (&dec.u, &dec.v_t);
    let mut coef = u.transpose() * b;
    for (c, s) in coef.iter_mut().zip(sv.iter()) {
        *c = if *s > thresh { *c / s } else { 0.0 };
    }
    let solution = vt.transpose() * coef;
    let residual = (a * &solution - b).norm();
    // Missing singular values of a wide matrix count as zero.
    let sigma_min = if m < n { 0.0 } else { sv.iter().copied().fold(f64::INFINITY, f64::min) };
    Ok(LsqReport { solution, residual, rank, sigma_min, sigma_max })
}

pub fn singular_values(a: &RealMatrix) -> Result<DVector<f64>> {
    Ok(svd(a)?.s)
}

/// 2-norm condition number.
pub fn condition_number(a: &RealMatrix) -> Result<f64> {
    let sv = singular_values(a)?;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

pub fn solve(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch("solve".into()));
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular("LU solve".into()))
}

pub fn inverse(a: &RealMatrix) -> Result<RealMatrix> {
    solve(a, &RealMatrix::identity(a.nrows(), a.nrows()))
}

pub fn complex_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("inverse of non-square matrix".into()));
    }
    a.clone().try_inverse().ok_or_else(|| Error::Singular("complex inverse".into()))
}

/// Pfaffian by skew-symmetric Gaussian elimination with partial pivoting.
pub fn pfaffian(a: &ComplexMatrix) -> Result<Complex64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("pfaffian of non-square matrix".into()));
    }
    let n = a.nrows();
    let scale = max_abs(a);
    let dev = max_abs(&(a + a.transpose()));
    if dev > 1e-10 * scale {
        return Err(Error::NotAntisymmetric(dev));
    }
    if n % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut m = a.clone();
    let mut pf = Complex64::new(1.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        let mut kp = k + 1;
        let mut best = m[(k + 1, k)].norm();
        for i in k + 2..n {
            let v = m[(i, k)].norm();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            m.swap_rows(k + 1, kp);
            m.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = m[(k, k + 1)];
        if piv == Complex64::new(0.0, 0.0) {
            return Ok(piv);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|j| m[(k, j)] / piv).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| m[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    m[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    Ok(pf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eig_of_identity_and_diag() {
        let e = sym_eig(&RealMatrix::identity(4, 4)).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let d = RealMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0]));
        let e = sym_eig(&d).unwrap();
        assert_eq!(e.values.as_slice(), &[2.0, 3.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_nonsymmetric() {
        let m = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn lsq_identity() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let r = least_squares(&RealMatrix::identity(3, 3), &b).unwrap();
        assert!((r.solution - &b).norm() < 1e-15);
        assert!(r.residual < 1e-15);
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn lsq_consistent_overdetermined() {
        let a = RealMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let x = DVector::from_vec(vec![0.25, -3.0]);
        let r = least_squares(&a, &(&a * &x)).unwrap();
        assert!(r.residual < 1e-12);
        assert!((r.solution - x).norm() < 1e-12);
    }

    #[test]
    fn lsq_rejects_empty() {
        let a = RealMatrix::zeros(0, 2);
        assert!(least_squares(&a, &DVector::zeros(0)).is_err());
    }

    #[test]
    fn svd_of_rank_one_projection() {
        for i in 0..2000 {
            let t = i as f64 * std::f64::consts::TAU / 2000.0 + 2.9898612990892923;
            let (c, s) = (t.cos(), t.sin());
            let m = RealMatrix::from_row_slice(2, 2, &[1.0 + c, s, s, 1.0 - c]);
            let sv = singular_values(&m).unwrap();
            assert!((sv.max() - 2.0).abs() < 1e-12, "{t}: {sv}");
            assert!(sv.min() < 1e-12);
        }
    }

    #[test]
    fn pfaffian_two_by_two() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 1.0), c(-2.0, -1.0), c(0.0, 0.0)]);
        assert_eq!(pfaffian(&a).unwrap(), c(2.0, 1.0));
    }

    #[test]
    fn pfaffian_odd_is_zero() {
        let mut a = ComplexMatrix::zeros(3, 3);
        a[(0, 1)] = c(1.0, 0.0);
        a[(1, 0)] = c(-1.0, 0.0);
        a[(1, 2)] = c(0.0, 2.0);
        a[(2, 1)] = c(0.0, -2.0);
        assert_eq!(pfaffian(&a).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn pfaffian_rejects_symmetric() {
        let a = ComplexMatrix::identity(2, 2);
        assert!(matches!(pfaffian(&a), Err(Error::NotAntisymmetric(_))));
    }
}
