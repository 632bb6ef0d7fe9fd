//! Small dense linear algebra: symmetric eigendecomposition, pseudoinverses,
//! the zero-sum projector and central-difference Jacobians.
//!
//! Every matrix in this crate is at most a few dozen rows, so the routines
//! here favour accuracy and simplicity over asymptotic speed.

use std::fmt;

use crate::error::{Error, Result};

/// Default relative cutoff below which eigenvalues are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

/// Dense square matrix that is symmetric up to roundoff.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.dim.max(1)).collect();
        f.debug_struct("SymMatrix").field("dim", &self.dim).field("rows", &rows).finish()
    }
}

impl SymMatrix {
    /// Builds a symmetric matrix from row-major entries.
    ///
    /// The asymmetry tolerance is absolute for entries of order one and scales
    /// with the largest entry otherwise; accepted input is symmetrized exactly.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::EvaluationFailure("non-finite matrix entry".into()));
        }
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0_f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                worst = worst.max((data[i * dim + j] - data[j * dim + i]).abs());
            }
        }
        if worst > SYMMETRY_TOL * scale {
            return Err(Error::NonSymmetric(worst));
        }
        let mut m = SymMatrix { dim, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * dim + i] = *d;
        }
        m
    }

    /// Sum of `w_k u_k u_kᵀ`; used to assemble spectral reconstructions.
    fn from_outer_products(dim: usize, terms: impl Iterator<Item = (f64, Vec<f64>)>) -> Self {
        let mut m = Self::zeros(dim);
        for (w, u) in terms {
            for i in 0..dim {
                for j in 0..dim {
                    m.data[i * dim + j] += w * u[i] * u[j];
                }
            }
        }
        m.symmetrize();
        m
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j) == 0.0))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// `aᵀ M b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.mul_vec(b))
    }

    pub fn mul(&self, other: &SymMatrix) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `P M P` for a symmetric `P`; the result is symmetric by construction.
    pub fn congruence(&self, p: &SymMatrix) -> SymMatrix {
        let pm = p.mul(self);
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = (0..n).map(|k| pm.get(i, k) * p.get(k, j)).sum();
            }
        }
        let mut m = SymMatrix { dim: n, data };
        m.symmetrize();
        m
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        SymMatrix { dim: self.dim, data }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        SymMatrix { dim: self.dim, data }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// Principal submatrix on the given index set.
    pub fn restrict(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut data = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        SymMatrix { dim: k, data }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Relative Frobenius distance `‖a − b‖ / max(‖a‖, ‖b‖, 1)`.
pub fn rel_frobenius(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let scale = a.frobenius().max(b.frobenius()).max(1.0);
    a.sub(b).frobenius() / scale
}

/// General dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `(A + Aᵀ) / 2` for a square matrix.
    pub fn symmetric_part(&self) -> SymMatrix {
        let n = self.rows;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = 0.5 * (self.get(i, j) + self.get(j, i));
            }
        }
        SymMatrix { dim: n, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// Spectral decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// `vectors[k]` is a unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomp {
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.values.len();
        SymMatrix::from_outer_products(
            n,
            self.values.iter().copied().zip(self.vectors.iter().cloned()),
        )
    }
}

/// Eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym(m: &SymMatrix) -> EigenDecomp {
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    EigenDecomp {
        values: order.iter().map(|&k| a[k * n + k]).collect(),
        vectors: order.iter().map(|&k| (0..n).map(|i| v[i * n + k]).collect()).collect(),
    }
}

/// Moore-Penrose pseudoinverse of a symmetric matrix.
///
/// Eigenvalues with `|λ| < rank_tol · max|λ|` are treated as zero.
pub fn pseudoinverse(m: &SymMatrix, rank_tol: f64) -> SymMatrix {
    let ed = eig_sym(m);
    let lmax = ed.values.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    if lmax == 0.0 {
        return SymMatrix::zeros(m.dim);
    }
    let cut = rank_tol * lmax;
    SymMatrix::from_outer_products(
        m.dim,
        ed.values
            .iter()
            .zip(&ed.vectors)
            .filter(|(l, _)| l.abs() >= cut)
            .map(|(l, u)| (1.0 / l, u.clone())),
    )
}

/// Numerical rank with the same cutoff convention as [`pseudoinverse`].
pub fn rank(m: &SymMatrix, rank_tol: f64) -> usize {
    let ed = eig_sym(m);
    let lmax = ed.values.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    if lmax == 0.0 {
        return 0;
    }
    ed.values.iter().filter(|l| l.abs() >= rank_tol * lmax).count()
}

/// `Φ = I − (1/n) 𝟏𝟏ᵀ`, the Euclidean projector onto zero-sum vectors.
pub fn zero_sum_projector(n: usize) -> SymMatrix {
    let inv = 1.0 / n as f64;
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.data[i * n + j] = if i == j { 1.0 - inv } else { -inv };
        }
    }
    m
}

/// Orthonormal basis of the zero-sum subspace, as the unit-eigenvalue
/// eigenvectors of `Φ`.
pub fn zero_sum_basis(n: usize) -> Vec<Vec<f64>> {
    let ed = eig_sym(&zero_sum_projector(n));
    ed.values
        .iter()
        .zip(ed.vectors)
        .filter(|(l, _)| **l > 0.5)
        .map(|(_, u)| u)
        .collect()
}

/// Central-difference Jacobian `J[i][j] = ∂f_i/∂x_j`.
pub fn finite_diff_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument("difference step must be positive".into()));
    }
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        if fp.len() != fm.len() {
            return Err(Error::EvaluationFailure("inconsistent output length".into()));
        }
        let col: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::EvaluationFailure(format!("non-finite value at stencil {j}")));
        }
        cols.push(col);
    }
    let m = cols.first().map_or(0, Vec::len);
    let mut jac = Matrix::zeros(m, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            jac.set(i, j, *v);
        }
    }
    Ok(jac)
}

/// Outcome of a square linear solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearSolution {
    Unique(Vec<f64>),
    /// The system is rank deficient; `consistent` tells whether solutions exist.
    Singular { consistent: bool },
}

/// Gaussian elimination with full pivoting; pivots below `pivot_tol` times
/// the largest entry count as zero.
pub fn solve_linear(a: &Matrix, b: &[f64], pivot_tol: f64) -> LinearSolution {
    let n = a.rows;
    assert_eq!(a.cols, n, "solve_linear needs a square system");
    let mut m = a.data.clone();
    let mut rhs = b.to_vec();
    let mut colperm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(b.iter().fold(0.0_f64, |s, v| s.max(v.abs()))).max(1e-300);
    let cut = pivot_tol * scale;
    let mut rank = n;
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                let v = m[i * n + j].abs();
                if v > best {
                    best = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= cut {
            rank = k;
            break;
        }
        if pi != k {
            for j in 0..n {
                m.swap(k * n + j, pi * n + j);
            }
            rhs.swap(k, pi);
        }
        if pj != k {
            for i in 0..n {
                m.swap(i * n + k, i * n + pj);
            }
            colperm.swap(k, pj);
        }
        for i in (k + 1)..n {
            let f = m[i * n + k] / m[k * n + k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    if rank < n {
        let consistent = rhs[rank..].iter().all(|r| r.abs() <= cut.max(1e-9 * scale));
        return LinearSolution::Singular { consistent };
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| m[k * n + j] * y[j]).sum();
        y[k] = (rhs[k] - s) / m[k * n + k];
    }
    let mut x = vec![0.0; n];
    for (k, &c) in colperm.iter().enumerate() {
        x[c] = y[k];
    }
    LinearSolution::Unique(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
