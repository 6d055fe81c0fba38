//! Dense linear-algebra kernels shared by the whole crate: symmetric
//! eigendecomposition (cyclic Jacobi), Cholesky factorization and solves,
//! matrix products, Kronecker products, and entrywise norms.
//!
//! Everything here operates on plain row-major `f64` storage and is
//! deterministic: no randomized pivoting, fixed sweep orders.

use crate::error::{Error, Result};

/// Relative tolerance used when validating symmetry on construction.
const SYMMETRY_RTOL: f64 = 1e-10;

/// A dense row-major matrix of finite `f64` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting NaN/Inf entries.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix construction",
                expected: format!("{} entries", rows * cols),
                found: format!("{}", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "matrix entries" });
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for arithmetic results; skips the finiteness
    /// check so diverging iterates can be observed rather than panicking.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product `self * other`. Panics on shape mismatch (internal use
    /// only goes through shape-checked call sites).
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert!(self.same_shape(other), "add shape mismatch");
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert!(self.same_shape(other), "sub shape mismatch");
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, t: f64) -> Matrix {
        self.map(|v| v * t)
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        assert!(self.same_shape(other), "hadamard shape mismatch");
        self.zip_with(other, |a, b| a * b)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Sum of the absolute values of all entries.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Max-norm: largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Column-stacking vectorization (the `vec` operator).
    pub fn vec_col_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self.get(i, j));
            }
        }
        v
    }

    /// Inverse of [`Matrix::vec_col_major`].
    pub fn from_vec_col_major(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        assert_eq!(v.len(), rows * cols);
        Matrix::from_fn(rows, cols, |i, j| v[j * rows + i])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A symmetric matrix with exactly mirrored storage. Construction from
/// general data validates near-symmetry and then averages `(A + A^T)/2`
/// to absorb floating-point drift.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>, // row-major, kept exactly symmetric
}

impl SymMatrix {
    pub fn try_new(dim: usize, data: Vec<f64>) -> Result<Self> {
        let m = Matrix::from_rows(dim, dim, data)?;
        Self::from_matrix(&m)
    }

    /// Validates that `m` is square and symmetric to relative tolerance,
    /// then symmetrizes.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension {
                context: "symmetric matrix construction",
                expected: "square matrix".to_string(),
                found: format!("{}x{}", m.rows(), m.cols()),
            });
        }
        if !m.is_finite() {
            return Err(Error::NonFinite { what: "symmetric matrix entries" });
        }
        let scale = m.max_abs();
        let tol = SYMMETRY_RTOL * scale;
        let mut max_asym = 0.0f64;
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                max_asym = max_asym.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        if max_asym > tol {
            return Err(Error::NotSymmetric { max_asymmetry: max_asym, tolerance: tol });
        }
        Ok(Self::symmetrized(m))
    }

    /// Unconditional `(A + A^T)/2`; for products that are symmetric by
    /// construction up to rounding.
    pub fn symmetrized(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "symmetrized requires a square matrix");
        let dim = m.rows();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        Self::from_fn(dim, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_raw(self.dim, self.dim, self.data.clone())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn scale(&self, t: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|v| v * t).collect() }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `tr(self * other)` for symmetric arguments.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Positive definiteness up to `-tol` on the spectrum, checked by a
    /// shifted Cholesky (cheap at any dimension).
    pub fn is_psd_within(&self, tol: f64) -> bool {
        let shifted = SymMatrix::from_fn(self.dim, |i, j| {
            self.get(i, j) + if i == j { tol } else { 0.0 }
        });
        cholesky(&shifted).is_ok()
    }
}

/// Lower-triangular Cholesky factor of a positive definite matrix.
#[derive(Clone, Debug)]
pub struct CholFactor {
    l: Matrix,
}

/// Cholesky factorization `A = L L^T`; fails with the offending pivot if a
/// non-positive pivot is met.
pub fn cholesky(a: &SymMatrix) -> Result<CholFactor> {
    let n = a.dim();
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(CholFactor { l: Matrix::from_raw(n, n, l) })
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l.get(i, i).ln()).sum::<f64>()
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l.get(i, k) * y[k];
            }
            y[i] /= l.get(i, i);
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= l.get(k, i) * y[k];
            }
            y[i] /= l.get(i, i);
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let n = self.dim();
        assert_eq!(b.rows(), n, "chol_solve shape mismatch");
        let mut out = Matrix::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b.get(i, j);
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out.set(i, j, x[i]);
            }
        }
        out
    }

    /// `A^{-1}` as a symmetric matrix.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        let inv = self.solve_matrix(&Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 }));
        SymMatrix::symmetrized(&inv)
    }
}

/// Solves `A X = B` with `A` symmetric positive definite.
pub fn chol_solve(a: &SymMatrix, b: &Matrix) -> Result<Matrix> {
    if a.dim() != b.rows() {
        return Err(Error::Dimension {
            context: "chol_solve",
            expected: format!("{} rows", a.dim()),
            found: format!("{}", b.rows()),
        });
    }
    Ok(cholesky(a)?.solve_matrix(b))
}

/// Eigendecomposition `A = V diag(values) V^T` with eigenvalues sorted in
/// descending order and eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigDecomp {
    pub fn min_eigenvalue(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.values[0]
    }

    /// `V diag(values) V^T`; used by tests and by spectral projections.
    pub fn reconstruct(&self) -> SymMatrix {
        self.apply_spectrum(|v| v)
    }

    /// `V diag(f(values)) V^T`.
    pub fn apply_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lam = f(self.values[k]);
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v.get(i, k) * lam;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + vik * v.get(j, k));
                }
            }
        }
        SymMatrix::symmetrized(&out)
    }

    /// Inverse via the spectrum; all eigenvalues must be positive.
    pub fn inverse(&self) -> Result<SymMatrix> {
        if self.min_eigenvalue() <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                pivot: self.values.len() - 1,
                value: self.min_eigenvalue(),
            });
        }
        Ok(self.apply_spectrum(|v| 1.0 / v))
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations. Deterministic:
/// fixed (p, q) sweep order, no pivot search.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigDecomp> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("eigendecomposition of empty matrix".into()));
    }
    let mut m = a.to_matrix();
    let mut v = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of m.
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                // Clean the rotated pair exactly.
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        // One final check: the last sweep may have finished the job.
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m.get(p, q).abs());
            }
        }
        if off > tol {
            return Err(Error::EigenNoConvergence { iterations: sweeps });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m.get(j, j)
            .partial_cmp(&m.get(i, i))
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(EigDecomp { values, vectors })
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a.get(i, j);
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out.set(i * br + k, j * bc + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

pub fn kron_sym(a: &SymMatrix, b: &SymMatrix) -> SymMatrix {
    SymMatrix::symmetrized(&kron(&a.to_matrix(), &b.to_matrix()))
}
