//! Dense row-major matrices and a one-sided Jacobi SVD.
//!
//! Only what the representation distances need: products of the form
//! `AᵀB`, Gram matrices, and thin singular value decompositions that reveal
//! numerical rank.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Relative cutoff below which singular values count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::MatrixShape {
                rows,
                cols,
                found: data.len(),
            });
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

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Keeps the listed rows, in the given order.
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

    /// Keeps the first `count` columns.
    pub fn leading_columns(&self, count: usize) -> Matrix {
        let count = count.min(self.cols);
        let mut data = Vec::with_capacity(self.rows * count);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[..count]);
        }
        Matrix {
            rows: self.rows,
            cols: count,
            data,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        let n = self.rows as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        sums
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.frobenius_norm_sq())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `selfᵀ · other`, both with the same number of rows.
    pub fn t_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_mul: row counts differ");
        let (p, q) = (self.cols, other.cols);
        let mut out = vec![0.0; p * q];
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let dst = &mut out[i * q..(i + 1) * q];
                for (d, &bj) in dst.iter_mut().zip(b) {
                    *d += ai * bj;
                }
            }
        }
        Matrix {
            rows: p,
            cols: q,
            data: out,
        }
    }

    /// `self · other`.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mul: inner dimensions differ");
        let q = other.cols;
        let mut out = vec![0.0; self.rows * q];
        for r in 0..self.rows {
            let dst = &mut out[r * q..(r + 1) * q];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Matrix {
            rows: self.rows,
            cols: q,
            data: out,
        }
    }

    /// `self · selfᵀ` (rows × rows).
    pub fn gram(&self) -> Matrix {
        let n = self.rows;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data: out,
        }
    }

    /// Frobenius inner product `<self, other>`.
    pub fn frobenius_dot(&self, other: &Matrix) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        dot(&self.data, &other.data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin SVD restricted to the numerically non-zero part of the spectrum:
/// `A ≈ U·diag(s)·Vᵀ` with `U` of shape rows × rank.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// Orthonormal left singular vectors, one column per retained value.
    pub left: Matrix,
    /// Singular values in descending order, all above the rank cutoff.
    pub singular_values: Vec<f64>,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Column-major working copy for one-sided Jacobi.
struct Columns {
    len: usize,
    data: Vec<Vec<f64>>,
}

impl Columns {
    fn from_matrix(a: &Matrix, transpose: bool) -> Columns {
        if transpose {
            // columns of Aᵀ are the rows of A
            Columns {
                len: a.cols,
                data: (0..a.rows).map(|r| a.row(r).to_vec()).collect(),
            }
        } else {
            let mut data = vec![Vec::with_capacity(a.rows); a.cols];
            for r in 0..a.rows {
                for (c, &v) in a.row(r).iter().enumerate() {
                    data[c].push(v);
                }
            }
            Columns { len: a.rows, data }
        }
    }
}

/// Orthogonalizes the columns of `work` in place by plane rotations
/// (Hestenes). Rotations are mirrored onto `accumulate` when given.
fn hestenes(work: &mut Columns, mut accumulate: Option<&mut Columns>) {
    let n = work.data.len();
    if n < 2 {
        return;
    }
    let eps = f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let a = &work.data[p];
                    let b = &work.data[q];
                    (dot(a, a), dot(b, b), dot(a, b))
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= eps * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut work.data, p, q, c, s);
                if let Some(acc) = accumulate.as_deref_mut() {
                    rotate(&mut acc.data, p, q, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    debug_assert!(work.data.iter().all(|c| c.len() == work.len));
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let a = &mut head[p];
    let b = &mut tail[0];
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// All `min(rows, cols)` singular values of `a`, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let mut work = Columns::from_matrix(a, a.rows < a.cols);
    hestenes(&mut work, None);
    let mut s: Vec<f64> = work.data.iter().map(|c| math::sqrt(dot(c, c))).collect();
    s.sort_unstable_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD of `a`, keeping singular values above
/// `RANK_TOLERANCE × largest`. A zero matrix yields rank 0.
pub fn thin_svd(a: &Matrix) -> ThinSvd {
    let tall = a.rows >= a.cols;
    let (values, left_cols): (Vec<f64>, Vec<Vec<f64>>) = if tall {
        // A = U S Vᵀ: orthogonalized columns of A are U·S.
        let mut work = Columns::from_matrix(a, false);
        hestenes(&mut work, None);
        let norms: Vec<f64> = work.data.iter().map(|c| math::sqrt(dot(c, c))).collect();
        (norms, work.data)
    } else {
        // Aᵀ = V S Uᵀ: rotations applied to the identity give U.
        let mut work = Columns::from_matrix(a, true);
        let mut acc = Columns {
            len: a.rows,
            data: (0..a.rows)
                .map(|i| {
                    let mut e = vec![0.0; a.rows];
                    e[i] = 1.0;
                    e
                })
                .collect(),
        };
        hestenes(&mut work, Some(&mut acc));
        let norms: Vec<f64> = work.data.iter().map(|c| math::sqrt(dot(c, c))).collect();
        (norms, acc.data)
    };

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let largest = order.first().map_or(0.0, |&i| values[i]);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| largest > 0.0 && values[i] > RANK_TOLERANCE * largest)
        .collect();

    let rank = keep.len();
    // rank may be 0 here; the empty basis is only used internally
    let mut left = Matrix {
        rows: a.rows,
        cols: rank,
        data: vec![0.0; a.rows * rank],
    };
    for (k, &i) in keep.iter().enumerate() {
        let col = &left_cols[i];
        let scale = if tall { 1.0 / values[i] } else { 1.0 };
        for r in 0..a.rows {
            left.data[r * rank + k] = col[r] * scale;
        }
    }
    ThinSvd {
        left,
        singular_values: keep.iter().map(|&i| values[i]).collect(),
    }
}
