//! Dense small-matrix kernels.
//!
//! Everything here targets the desk-scale problems of this crate (state
//! dimension up to roughly 16, Kronecker systems up to 256 unknowns). The
//! matrices are row-major `f64` buffers; no BLAS, no sparsity.
//!
//! ```text
//! sym_eig                 cyclic Jacobi rotations, eigenvalues descending
//! cholesky                S = L Lᵀ, fails on non-positive pivots
//! solve_linear            LU with partial pivoting
//! solve_*_lyapunov        Kronecker vectorisation of AᵀSA − S = −Q / AᵀS + SA = −Q
//! generalized_*_eig       extreme λ of det(M − λS) = 0 via L⁻¹ M L⁻ᵀ
//! ```

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::Serialize;
use thiserror::Error;

/// Relative asymmetry accepted by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Pivots at or below `PIVOT_TOL * max|A_ij|` make a system singular.
pub const PIVOT_TOL: f64 = 1e-13;
/// Residual acceptance used throughout the test-suite.
pub const RESIDUAL_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is numerically singular (pivot {pivot:e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("Lyapunov equation has no unique solution")]
    NoSolution,
    #[error("non-finite entry in matrix data")]
    NonFinite,
    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major matrix of finite reals.
#[derive(Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row slices; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// A single column built from a vector.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Elementwise `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |S_ij − S_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows.min(self.cols) {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// (S + Sᵀ) / 2.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// xᵀ M x for square M.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert!(self.is_square() && x.len() == self.rows);
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += x[i] * dot(self.row(i), x);
        }
        acc
    }

    fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let asym = self.asymmetry();
        if asym > SYMMETRY_TOL * self.max_abs().max(f64::MIN_POSITIVE) {
            return Err(LinalgError::NotSymmetric { asymmetry: asym });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Full symmetric eigendecomposition.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

impl SymEigResult {
    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(s: &Matrix) -> Result<SymEigResult> {
    s.check_symmetric()?;
    let n = s.rows;
    let mut a = s.symmetrized();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if n == 0 {
        return Ok(SymEigResult {
            eigenvalues: Vec::new(),
            eigenvectors: v,
        });
    }

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau.abs() > 1e150 {
                    0.5 / tau
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                // A <- Jᵀ A J on rows/cols p, q
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, new)] = v[(k, old)];
        }
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = S`.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    s.check_symmetric()?;
    let n = s.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / djj;
        }
    }
    Ok(l)
}

/// LU factorisation with partial pivoting, `P A = L U` packed in one buffer.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows,
                cols: a.cols,
            });
        }
        let n = a.rows;
        let tol = PIVOT_TOL * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv_row, piv_abs) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(piv_abs > tol) {
                return Err(LinalgError::Singular { col: k, pivot: piv_abs });
            }
            if piv_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv_row, j)];
                    lu[(piv_row, j)] = tmp;
                }
                perm.swap(k, piv_row);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= factor * ukj;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[(i, k)] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.lu[(i, k)] * y[k];
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has length {}, matrix has {} rows",
            b.len(),
            a.rows
        )));
    }
    Ok(LuFactor::new(a)?.solve(b))
}

/// Solve with one step of iterative refinement.
fn solve_refined(k: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = LuFactor::new(k)?;
    let mut x = lu.solve(rhs);
    let kx = k.mul_vec(&x);
    let r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, v)| b - v).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    Ok(x)
}

fn check_lyapunov_inputs(a: &Matrix, q: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if q.rows != a.rows || q.cols != a.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "A is {}x{}, Q is {}x{}",
            a.rows, a.cols, q.rows, q.cols
        )));
    }
    q.check_symmetric()
}

fn lyapunov_from_kronecker(kron_op: Matrix, q: &Matrix) -> Result<Matrix> {
    let n = q.rows;
    let rhs: Vec<f64> = q.data.iter().map(|v| -v).collect();
    let vec_s = solve_refined(&kron_op, &rhs).map_err(|e| match e {
        LinalgError::Singular { .. } => LinalgError::NoSolution,
        other => other,
    })?;
    Ok(Matrix::new(n, n, vec_s)?.symmetrized())
}

/// Solves the discrete Lyapunov equation `AᵀSA − S = −Q`.
///
/// The returned `S` is symmetric; it is positive definite exactly when `A`
/// is Schur stable, which callers test with [`cholesky`].
pub fn solve_discrete_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    check_lyapunov_inputs(a, q)?;
    let at = a.transpose();
    let n = a.rows;
    let op = kron(&at, &at).add_scaled(-1.0, &Matrix::identity(n * n));
    lyapunov_from_kronecker(op, q)
}

/// Solves the continuous Lyapunov equation `AᵀS + SA = −Q`.
pub fn solve_continuous_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    check_lyapunov_inputs(a, q)?;
    let at = a.transpose();
    let eye = Matrix::identity(a.rows);
    let op = kron(&at, &eye).add_scaled(1.0, &kron(&eye, &at));
    lyapunov_from_kronecker(op, q)
}

/// `‖AᵀSA − S + Q‖_F`.
pub fn discrete_lyapunov_residual(a: &Matrix, s: &Matrix, q: &Matrix) -> f64 {
    a.transpose()
        .matmul(s)
        .matmul(a)
        .add_scaled(-1.0, s)
        .add_scaled(1.0, q)
        .frobenius_norm()
}

/// `‖AᵀS + SA + Q‖_F`.
pub fn continuous_lyapunov_residual(a: &Matrix, s: &Matrix, q: &Matrix) -> f64 {
    a.transpose()
        .matmul(s)
        .add_scaled(1.0, &s.matmul(a))
        .add_scaled(1.0, q)
        .frobenius_norm()
}

/// Inverse of a lower-triangular matrix by forward substitution.
fn lower_triangular_inverse(l: &Matrix) -> Matrix {
    let n = l.rows;
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut acc = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                acc -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = acc / l[(i, i)];
        }
    }
    inv
}

/// Spectrum of the pencil (M, S): eigenvalues of `L⁻¹ M L⁻ᵀ`, `S = L Lᵀ`.
pub fn generalized_eig(m: &Matrix, s: &Matrix) -> Result<SymEigResult> {
    m.check_symmetric()?;
    if m.rows != s.rows || m.cols != s.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "M is {}x{}, S is {}x{}",
            m.rows, m.cols, s.rows, s.cols
        )));
    }
    let l = cholesky(s)?;
    let linv = lower_triangular_inverse(&l);
    let reduced = linv.matmul(m).matmul(&linv.transpose()).symmetrized();
    sym_eig(&reduced)
}

/// Largest λ with det(M − λS) = 0.
pub fn generalized_max_eig(m: &Matrix, s: &Matrix) -> Result<f64> {
    Ok(generalized_eig(m, s)?.max())
}

/// Smallest λ with det(M − λS) = 0.
pub fn generalized_min_eig(m: &Matrix, s: &Matrix) -> Result<f64> {
    Ok(generalized_eig(m, s)?.min())
}

/// Largest singular value, √λ_max(MᵀM).
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.rows == 0 || m.cols == 0 {
        return 0.0;
    }
    let gram = m.transpose().matmul(m).symmetrized();
    let top = sym_eig(&gram).expect("Gram matrix is symmetric").max();
    top.max(0.0).sqrt()
}
