//! Dense real linear algebra at desk scale.
//!
//! The symmetric eigensolver is the classic two-stage scheme: Householder
//! reduction to tridiagonal form followed by the implicit QL iteration with
//! Wilkinson-type shifts. Eigenvector columns are kept in column-major storage
//! so the Givens updates in the QL sweep run over contiguous memory.

use std::fmt::Write as _;

use crate::error::{Result, SpectraError};

/// Largest matrix dimension accepted by [`SymMatrix`].
pub const DEFAULT_DIMENSION_CAP: usize = 2048;

const QL_MAX_ITERATIONS: usize = 60;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SpectraError::Dimension {
                expected: format!("{} entries", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(SpectraError::Dimension {
                expected: format!("{} rows", self.cols),
                found: format!("{} rows", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Max-abs deviation of `QᵀQ` from the identity, for a matrix with orthonormal columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..self.cols {
            for b in a..self.cols {
                let s: f64 = (0..self.rows).map(|i| self.get(i, a) * self.get(i, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Writes the matrix as CSV: a `rows,cols` header line, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{},{}", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SpectraError::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SpectraError::Parse(format!("bad header `{header}`: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(SpectraError::Parse(format!("bad header `{header}`")));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            let values: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| SpectraError::Parse(format!("row {i}: {e}")))?;
            if values.len() != cols {
                return Err(SpectraError::Dimension {
                    expected: format!("{cols} columns"),
                    found: format!("{} columns in row {i}", values.len()),
                });
            }
            data.extend(values);
        }
        Matrix::from_row_major(rows, cols, data)
    }
}

/// Square symmetric matrix. Symmetry holds exactly: constructors copy the
/// upper triangle onto the lower one.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    /// Builds from a closure evaluated on the upper triangle (`i <= j`).
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_cap(n)?;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        Ok(Self { inner: m })
    }

    /// Symmetrizes a square matrix by copying its upper triangle.
    pub fn from_matrix_upper(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(SpectraError::Dimension {
                expected: "square matrix".into(),
                found: format!("{}x{}", m.rows(), m.cols()),
            });
        }
        Self::from_upper(m.rows(), |i, j| m.get(i, j))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_upper(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_upper(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.get(i, j) == 0.0))
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > DEFAULT_DIMENSION_CAP {
        return Err(SpectraError::Parameter {
            name: "dimension",
            reason: format!("{n} exceeds the cap of {DEFAULT_DIMENSION_CAP}"),
        });
    }
    Ok(())
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }

    /// Rebuilds `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors.get(i, k) * self.values[k] * self.vectors.get(j, k))
                .sum()
        })
    }
}

/// Full symmetric eigendecomposition, eigenvalues sorted descending.
pub fn eigh(a: &SymMatrix) -> Result<EigenDecomposition> {
    let (values, z) = tridiagonal_ql(a, true)?;
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| values[q].total_cmp(&values[p]));
    let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = &z[k * n..(k + 1) * n];
        for (i, v) in src.iter().enumerate() {
            vectors.set(i, col, *v);
        }
    }
    Ok(EigenDecomposition {
        values: sorted,
        vectors,
    })
}

/// Eigenvalues only, sorted descending.
pub fn eigvalsh(a: &SymMatrix) -> Result<Vec<f64>> {
    let (mut values, _) = tridiagonal_ql(a, false)?;
    values.sort_by(|p, q| q.total_cmp(p));
    Ok(values)
}

/// Householder tridiagonalization + implicit QL. Returns unsorted eigenvalues and,
/// when requested, eigenvectors stored column-major (`z[k*n + i]` is entry `i`
/// of vector `k`).
fn tridiagonal_ql(a: &SymMatrix, want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if a.as_matrix().as_slice().iter().any(|v| !v.is_finite()) {
        return Err(SpectraError::Domain("matrix has non-finite entries".into()));
    }
    // Column-major working copy; A is symmetric so this is also row-major.
    let mut z: Vec<f64> = a.as_matrix().as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let idx = |row: usize, col: usize| col * n + row;

    // Householder reduction.
    for j in 0..n {
        d[j] = z[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = z[idx(i - 1, j)];
                z[idx(i, j)] = 0.0;
                z[idx(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                z[idx(j, i)] = f;
                g = e[j] + z[idx(j, j)] * f;
                let col_j = &z[j * n..j * n + i];
                for k in (j + 1)..i {
                    g += col_j[k] * d[k];
                    e[k] += col_j[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col_j = &mut z[j * n..j * n + i];
                for k in j..i {
                    col_j[k] -= f * e[k] + g * d[k];
                }
                d[j] = z[idx(i - 1, j)];
                z[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if want_vectors {
        // Accumulate the transformations.
        for i in 0..n - 1 {
            z[idx(n - 1, i)] = z[idx(i, i)];
            z[idx(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = z[idx(k, i + 1)] / h;
                }
                let (left, right) = z.split_at_mut((i + 1) * n);
                let col_next = &right[..n];
                for j in 0..=i {
                    let col_j = &mut left[j * n..j * n + n];
                    let g: f64 = (0..=i).map(|k| col_next[k] * col_j[k]).sum();
                    for k in 0..=i {
                        col_j[k] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                z[idx(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = z[idx(n - 1, j)];
            z[idx(n - 1, j)] = 0.0;
        }
        z[idx(n - 1, n - 1)] = 1.0;
    } else {
        for j in 0..n {
            d[j] = z[idx(j, j)];
        }
    }
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > QL_MAX_ITERATIONS {
                    return Err(SpectraError::NoConvergence {
                        what: "implicit QL",
                        iterations: QL_MAX_ITERATIONS,
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        let (left, right) = z.split_at_mut((i + 1) * n);
                        let col_i = &mut left[i * n..];
                        let col_next = &mut right[..n];
                        for (vi, vn) in col_i.iter_mut().zip(col_next.iter_mut()) {
                            let hk = *vn;
                            *vn = s * *vi + c * hk;
                            *vi = c * *vi - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, if want_vectors { z } else { Vec::new() }))
}

/// Symmetric positive semidefinite square root `V diag(√λ) Vᵀ`.
///
/// Eigenvalues down to `-1e-10·‖A‖` are clipped to zero; anything more
/// negative is a domain error.
pub fn sym_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    if a.is_diagonal() {
        let diag: Vec<f64> = (0..a.dim()).map(|i| a.get(i, i)).collect();
        let roots = clipped_roots(&diag, a.as_matrix().max_abs())?;
        return SymMatrix::diagonal(&roots);
    }
    let eig = eigh(a)?;
    let roots = clipped_roots(&eig.values, a.as_matrix().max_abs())?;
    let n = a.dim();
    SymMatrix::from_upper(n, |i, j| {
        (0..n)
            .map(|k| eig.vectors.get(i, k) * roots[k] * eig.vectors.get(j, k))
            .sum()
    })
}

fn clipped_roots(values: &[f64], norm: f64) -> Result<Vec<f64>> {
    let tol = 1e-10 * norm.max(1.0);
    values
        .iter()
        .map(|&v| {
            if v < -tol {
                Err(SpectraError::Domain(format!(
                    "matrix is not positive semidefinite (eigenvalue {v:e})"
                )))
            } else {
                Ok(v.max(0.0).sqrt())
            }
        })
        .collect()
}

/// Toeplitz matrix with entries `rho^|i-j|`.
pub fn toeplitz(rho: f64, m: usize) -> Result<SymMatrix> {
    if !rho.is_finite() {
        return Err(SpectraError::Parameter {
            name: "rho",
            reason: format!("{rho} is not finite"),
        });
    }
    let powers: Vec<f64> = (0..m).map(|k| rho.powi(k as i32)).collect();
    SymMatrix::from_upper(m, |i, j| powers[j - i])
}

/// `Q = S X Xᵀ S` for a symmetric `S` (M×M) and data matrix `X` (M×N).
pub fn sample_covariance(s_half: &SymMatrix, x: &Matrix) -> Result<SymMatrix> {
    if s_half.dim() != x.rows() {
        return Err(SpectraError::Dimension {
            expected: format!("{} rows in X", s_half.dim()),
            found: format!("{} rows", x.rows()),
        });
    }
    if s_half.is_diagonal() {
        let diag: Vec<f64> = (0..s_half.dim()).map(|i| s_half.get(i, i)).collect();
        return scaled_gram(&diag, x);
    }
    let y = s_half.as_matrix().matmul(x)?;
    gram(&y)
}

/// `diag(s) X Xᵀ diag(s)` without forming the dense scale matrix.
pub fn scaled_gram(scale: &[f64], x: &Matrix) -> Result<SymMatrix> {
    if scale.len() != x.rows() {
        return Err(SpectraError::Dimension {
            expected: format!("{} scale entries", x.rows()),
            found: format!("{}", scale.len()),
        });
    }
    let mut y = x.clone();
    for (i, s) in scale.iter().enumerate() {
        for v in y.row_mut(i) {
            *v *= s;
        }
    }
    gram(&y)
}

/// `Y Yᵀ`, computed on the upper triangle.
pub fn gram(y: &Matrix) -> Result<SymMatrix> {
    SymMatrix::from_upper(y.rows(), |i, j| dot(y.row(i), y.row(j)))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
