//! Dense linear algebra used by forest training: column statistics,
//! standardization, covariance and regularized canonical correlation
//! analysis.
//!
//! The eigen- and singular value decompositions are delegated to
//! `nalgebra`; everything around them (centering, ridge whitening, rank
//! handling, ordering and sign conventions) lives here.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant column.
pub const CONSTANT_STDDEV: f64 = 1e-12;

/// Eigen-directions of a covariance with eigenvalue at or below
/// `RANK_TOL * largest` are treated as null directions and dropped before
/// whitening.
pub const RANK_TOL: f64 = 1e-10;

/// Default ridge strength applied to both covariance blocks.
pub const DEFAULT_GAMMA: f64 = 1e-8;

/// Row-major dense matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    /// Copies the given rows, in order, keeping every column.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the sub-matrix at the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Matrix {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols && !(self.rows == 0 || other.rows == 0) {
            return Err(Error::dim(format!(
                "cannot stack {} columns onto {}",
                other.cols, self.cols
            )));
        }
        let cols = if self.rows == 0 {
            other.cols
        } else {
            self.cols
        };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &l) in lhs_row.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                for (o, &r) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += l * r;
                }
            }
        }
        Ok(out)
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m[(r, c)]);
            }
        }
        Matrix { rows, cols, data }
    }
}

/// Per-column sample means and standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl ColumnStats {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn is_constant(&self, col: usize) -> bool {
        self.stddev[col] < CONSTANT_STDDEV
    }

    /// Divisor actually applied to a column by [`standardize`].
    #[inline]
    pub fn scale(&self, col: usize) -> f64 {
        if self.is_constant(col) {
            1.0
        } else {
            self.stddev[col]
        }
    }

    /// Standardizes one row in place.
    #[inline]
    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.mean[j]) / self.scale(j);
        }
    }
}

/// Column means and sample standard deviations (divisor `n - 1`; a single
/// row reports a standard deviation of zero).
pub fn column_stats(m: &Matrix) -> Result<ColumnStats> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::dim("column_stats of an empty matrix"));
    }
    let n = m.rows as f64;
    let mut mean = vec![0.0; m.cols];
    for row in m.row_iter() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);

    let mut stddev = vec![0.0; m.cols];
    if m.rows > 1 {
        for row in m.row_iter() {
            for ((acc, v), mu) in stddev.iter_mut().zip(row).zip(&mean) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        stddev.iter_mut().for_each(|v| *v = (*v / (n - 1.0)).sqrt());
    }
    Ok(ColumnStats { mean, stddev })
}

/// `(m - mean) / stddev` column-wise. Constant columns are only centered.
pub fn standardize(m: &Matrix, stats: &ColumnStats) -> Result<Matrix> {
    if stats.len() != m.cols || stats.stddev.len() != m.cols {
        return Err(Error::dim(format!(
            "stats for {} columns applied to a matrix with {}",
            stats.len(),
            m.cols
        )));
    }
    let mut out = m.clone();
    if m.cols > 0 {
        for row in out.data.chunks_exact_mut(m.cols) {
            stats.apply_row(row);
        }
    }
    Ok(out)
}

fn column_means(m: &Matrix) -> Vec<f64> {
    let n = m.rows as f64;
    let mut mean = vec![0.0; m.cols];
    for row in m.row_iter() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

fn centered(m: &Matrix, mean: &[f64]) -> DMatrix<f64> {
    let mut d = m.to_dmatrix();
    for (c, mu) in mean.iter().enumerate() {
        d.column_mut(c).add_scalar_mut(-mu);
    }
    d
}

fn check_paired(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.rows != y.rows {
        return Err(Error::dim(format!(
            "row mismatch: {} vs {}",
            x.rows, y.rows
        )));
    }
    if x.rows < 2 {
        return Err(Error::dim(format!("need at least 2 rows, got {}", x.rows)));
    }
    Ok(())
}

/// Sample cross-covariance of the columns of `x` with the columns of `y`
/// (a `x.cols × y.cols` matrix). `cross_covariance(x, x)` is the covariance
/// of `x`.
pub fn cross_covariance(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    check_paired(x, y)?;
    let xc = centered(x, &column_means(x));
    let yc = centered(y, &column_means(y));
    let c = xc.transpose() * yc / (x.rows as f64 - 1.0);
    Ok(Matrix::from_dmatrix(&c))
}

/// Canonical directions for a pair of data blocks.
///
/// `a` is `d × r`, `b` is `k × r`, `rho` holds the `r` canonical
/// correlations in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaResult {
    pub a: Matrix,
    pub b: Matrix,
    pub rho: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
}

impl CcaResult {
    pub fn rank(&self) -> usize {
        self.rho.len()
    }

    /// Canonical variates of `x` rows (centered with the training means).
    pub fn project_x(&self, x: &Matrix) -> Result<Matrix> {
        project(x, &self.a, &self.x_mean)
    }

    pub fn project_y(&self, y: &Matrix) -> Result<Matrix> {
        project(y, &self.b, &self.y_mean)
    }

    /// Column `c` of `a`.
    pub fn direction(&self, c: usize) -> Vec<f64> {
        self.a.column(c)
    }

    fn empty(d: usize, k: usize, x_mean: Vec<f64>, y_mean: Vec<f64>) -> Self {
        CcaResult {
            a: Matrix::zeros(d, 0),
            b: Matrix::zeros(k, 0),
            rho: Vec::new(),
            x_mean,
            y_mean,
        }
    }
}

/// `(m - means) · a`.
pub fn project(m: &Matrix, a: &Matrix, means: &[f64]) -> Result<Matrix> {
    if a.rows != m.cols || means.len() != m.cols {
        return Err(Error::dim(format!(
            "projection with {} rows and {} means applied to {} columns",
            a.rows,
            means.len(),
            m.cols
        )));
    }
    let mut out = Matrix::zeros(m.rows, a.cols);
    let mut buf = vec![0.0; m.cols];
    for i in 0..m.rows {
        for ((b, v), mu) in buf.iter_mut().zip(m.row(i)).zip(means) {
            *b = v - mu;
        }
        for c in 0..a.cols {
            let mut acc = 0.0;
            for (j, b) in buf.iter().enumerate() {
                acc += b * a.get(j, c);
            }
            out.data[i * a.cols + c] = acc;
        }
    }
    Ok(out)
}

/// Whitening map `W` (dim × rank) with `Wᵀ (C + ridge·I) W = I` on the
/// retained eigen-subspace of `C`.
fn whitening(c: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let dim = c.nrows();
    let sym = (c + c.transpose()) * 0.5;
    let ridge = gamma * sym.trace() / dim as f64;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;

    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Ok(DMatrix::zeros(dim, 0));
    }
    let mut keep: Vec<usize> = (0..dim)
        .filter(|&i| eig.eigenvalues[i] > RANK_TOL * max)
        .collect();
    keep.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });

    let mut w = DMatrix::zeros(dim, keep.len());
    for (out_col, &i) in keep.iter().enumerate() {
        let s = 1.0 / (eig.eigenvalues[i] + ridge).sqrt();
        w.set_column(out_col, &(eig.eigenvectors.column(i) * s));
    }
    Ok(w)
}

/// Regularized canonical correlation analysis.
///
/// Both covariance blocks are ridged by `gamma · tr(C) / dim` and whitened
/// through their eigendecompositions (null directions dropped); the
/// singular value decomposition of the whitened cross-covariance gives the
/// canonical pairs. Directions are mapped back to centered original
/// coordinates and sign-normalized so the first non-negligible entry of
/// each column of `a` is positive.
///
/// Inputs with no variance in either block yield a rank-0 result.
pub fn cca(x: &Matrix, y: &Matrix, gamma: f64) -> Result<CcaResult> {
    check_paired(x, y)?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cca regularizer must be finite and >= 0, got {gamma}"
        )));
    }
    let (d, k) = (x.cols, y.cols);
    let x_mean = column_means(x);
    let y_mean = column_means(y);
    if d == 0 || k == 0 {
        return Ok(CcaResult::empty(d, k, x_mean, y_mean));
    }

    let xc = centered(x, &x_mean);
    let yc = centered(y, &y_mean);
    let denom = x.rows as f64 - 1.0;
    let xt = xc.transpose();
    let cxx = &xt * &xc / denom;
    let cyy = yc.transpose() * &yc / denom;
    let cxy = &xt * &yc / denom;

    let wx = whitening(&cxx, gamma)?;
    let wy = whitening(&cyy, gamma)?;
    let r = wx.ncols().min(wy.ncols());
    if r == 0 {
        return Ok(CcaResult::empty(d, k, x_mean, y_mean));
    }

    let m = wx.transpose() * &cxy * &wy;
    let svd = m
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("singular value decomposition did not converge".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    order.truncate(r);

    let mut a = DMatrix::zeros(d, r);
    let mut b = DMatrix::zeros(k, r);
    let mut rho = Vec::with_capacity(r);
    for (out_col, &i) in order.iter().enumerate() {
        let mut ac = &wx * u.column(i);
        let mut bc = &wy * v_t.row(i).transpose();
        let peak = ac.amax();
        if let Some(first) = ac.iter().find(|v| v.abs() > 1e-12 * peak) {
            if *first < 0.0 {
                ac.neg_mut();
                bc.neg_mut();
            }
        }
        a.set_column(out_col, &ac);
        b.set_column(out_col, &bc);
        rho.push(svd.singular_values[i].clamp(0.0, 1.0));
    }

    let a = Matrix::from_dmatrix(&a);
    let b = Matrix::from_dmatrix(&b);
    if a.data.iter().chain(&b.data).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite canonical direction".into()));
    }
    Ok(CcaResult {
        a,
        b,
        rho,
        x_mean,
        y_mean,
    })
}

/// One-hot encoding of class indices into an `n × n_classes` matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        m.data[i * n_classes + l] = 1.0;
    }
    m
}
