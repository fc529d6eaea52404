//! Minimal dense linear algebra used by the penalized least-squares solver.
//!
//! The systems solved here are small (the large random-effect block is
//! eliminated analytically before anything lands in a dense matrix), so a
//! plain row-major matrix and an unpivoted Cholesky are all that is needed.
//! Keeping the kernels in-crate also guarantees bit-for-bit deterministic
//! results for a fixed input, which the fitting contract relies on.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
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
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `self' * self`, accumulated row by row in row order.
    pub fn gram(&self) -> SymMat {
        let n = self.cols;
        let mut g = SymMat::zeros(n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    *g.at_mut(i, j) += ri * row[j];
                }
            }
        }
        g
    }

    /// `self' * v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let vr = v[r];
            for (o, x) in out.iter_mut().zip(row) {
                *o += x * vr;
            }
        }
        out
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(self.row(r), v))
            .collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Symmetric matrix stored as the lower triangle, row-packed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    /// data[i*(i+1)/2 + j] = a_ij for j <= i
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.data[i * (i + 1) / 2 + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        &mut self.data[i * (i + 1) / 2 + j]
    }

    /// Rank-one downdate `self -= w * x x'` restricted to the lower triangle.
    #[inline]
    pub fn downdate(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.n);
        let mut idx = 0;
        for i in 0..self.n {
            let xi = x[i] * w;
            if xi == 0.0 {
                idx += i + 1;
                continue;
            }
            for j in 0..=i {
                self.data[idx] -= xi * x[j];
                idx += 1;
            }
        }
    }
}

/// Cholesky factor (lower triangular, same packed layout as [`SymMat`]).
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    data: Vec<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive definite matrix. On failure reports the
    /// column at which the pivot lost positivity, which callers surface as
    /// a conditioning diagnostic.
    pub fn new(a: &SymMat) -> Result<Self> {
        let n = a.n;
        let mut l = a.data.clone();
        for j in 0..n {
            let jj = j * (j + 1) / 2;
            let mut d = l[jj + j];
            for k in 0..j {
                let v = l[jj + k];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "penalized system is not positive definite at column {j} (pivot {d:.3e}); \
                     the model is likely numerically rank-deficient"
                )));
            }
            let dj = d.sqrt();
            l[jj + j] = dj;
            for i in (j + 1)..n {
                let ii = i * (i + 1) / 2;
                let mut s = l[ii + j];
                for k in 0..j {
                    s -= l[ii + k] * l[jj + k];
                }
                l[ii + j] = s / dj;
            }
        }
        Ok(Cholesky { n, data: l })
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (i + 1) / 2 + i]
    }

    /// Sum of `ln L_ii` over `range`; `2 *` this is the log-determinant of
    /// the corresponding leading/trailing Schur block.
    pub fn log_diag_sum(&self, range: std::ops::Range<usize>) -> f64 {
        range.map(|i| self.diag(i).ln()).sum()
    }

    /// Solve `A x = b` in place via forward and backward substitution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        // L y = b
        for i in 0..n {
            let ii = i * (i + 1) / 2;
            let mut s = b[i];
            for k in 0..i {
                s -= self.data[ii + k] * b[k];
            }
            b[i] = s / self.data[ii + i];
        }
        // L' x = y
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.data[k * (k + 1) / 2 + i] * b[k];
            }
            b[i] = s / self.data[i * (i + 1) / 2 + i];
        }
    }
}
