//! Row-major dense matrices and the three GEMM shapes used by dense layers.

use crate::error::{Error, Result};

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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Columns `[start, start + width)` as a new matrix.
    pub fn columns(&self, start: usize, width: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..start + width]);
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "cannot concatenate {} rows with {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut out = Matrix::zeros(self.rows, cols);
        for i in 0..self.rows {
            let row = out.row_mut(i);
            row[..self.cols].copy_from_slice(self.row(i));
            row[self.cols..].copy_from_slice(other.row(i));
        }
        Ok(out)
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` on raw row/column strides.
///
/// Every index reachable through the strides is bounds-checked before the
/// kernel runs.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let last = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs;
    assert!(last(m, k, rsa, csa) < a.len(), "gemm: lhs out of bounds");
    assert!(last(k, n, rsb, csb) < b.len(), "gemm: rhs out of bounds");
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: output out of bounds");
    // SAFETY: all strided accesses were bounds-checked above and `c` does not
    // alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `x · wᵀ` for `x: (batch × in)`, `w: (out × in)`.
pub(crate) fn matmul_xwt(x: &Matrix, w: &[f64], out_dim: usize) -> Matrix {
    let (batch, in_dim) = (x.rows, x.cols);
    debug_assert_eq!(w.len(), out_dim * in_dim);
    let mut y = Matrix::zeros(batch, out_dim);
    gemm(
        batch,
        in_dim,
        out_dim,
        1.0,
        &x.data,
        (in_dim, 1),
        w,
        (1, in_dim),
        0.0,
        &mut y.data,
        (out_dim, 1),
    );
    y
}

/// `grad_w += dyᵀ · x` for `dy: (batch × out)`, `x: (batch × in)`.
pub(crate) fn accumulate_dyt_x(dy: &Matrix, x: &Matrix, grad_w: &mut [f64]) {
    let (batch, out_dim, in_dim) = (dy.rows, dy.cols, x.cols);
    debug_assert_eq!(x.rows, batch);
    debug_assert_eq!(grad_w.len(), out_dim * in_dim);
    gemm(
        out_dim,
        batch,
        in_dim,
        1.0,
        &dy.data,
        (1, out_dim),
        &x.data,
        (in_dim, 1),
        1.0,
        grad_w,
        (in_dim, 1),
    );
}

/// `dy · w` for `dy: (batch × out)`, `w: (out × in)`.
pub(crate) fn matmul_dy_w(dy: &Matrix, w: &[f64], in_dim: usize) -> Matrix {
    let (batch, out_dim) = (dy.rows, dy.cols);
    debug_assert_eq!(w.len(), out_dim * in_dim);
    let mut dx = Matrix::zeros(batch, in_dim);
    gemm(
        batch,
        out_dim,
        in_dim,
        1.0,
        &dy.data,
        (out_dim, 1),
        w,
        (in_dim, 1),
        0.0,
        &mut dx.data,
        (in_dim, 1),
    );
    dx
}

/// Adds `bias` to every row.
pub(crate) fn add_row_bias(y: &mut Matrix, bias: &[f64]) {
    debug_assert_eq!(y.cols, bias.len());
    for row in y.data.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// `grad_b += Σ_rows dy`.
pub(crate) fn accumulate_column_sums(dy: &Matrix, grad_b: &mut [f64]) {
    for row in dy.data.chunks_exact(dy.cols) {
        for (g, d) in grad_b.iter_mut().zip(row) {
            *g += d;
        }
    }
}
