//! Dense row-major `f64` matrix plus the handful of vector primitives the
//! kernels and metrics share.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    left: r.len(),
                    right: cols,
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows_iter().map(<[f64]>::to_vec).collect()
    }

    /// New matrix holding the first `n` rows.
    pub fn head(&self, n: usize) -> Matrix {
        let n = n.min(self.rows);
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    /// Largest absolute difference between `self` and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

// The reductions below keep four independent accumulators so the compiler
// can vectorize them; summation order is fixed, so results are reproducible.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn sq_euclidean(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            let d = a[l] - b[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        let d = a - b;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn manhattan(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] += (a[l] - b[l]).abs();
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += (a - b).abs();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dot products of two rows against two rows at once. Each of the four
/// results is summed in exactly the order [`dot`] uses, so the values are
/// bitwise identical; sharing the loads is what makes it faster.
#[inline]
fn dot_2x2(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> [f64; 4] {
    let mut acc = [[0.0f64; 4]; 4];
    let d = a0.len();
    let full = d - d % 4;
    let mut k = 0;
    while k < full {
        let (p0, p1) = (&a0[k..k + 4], &a1[k..k + 4]);
        let (q0, q1) = (&b0[k..k + 4], &b1[k..k + 4]);
        for l in 0..4 {
            acc[0][l] += p0[l] * q0[l];
            acc[1][l] += p0[l] * q1[l];
            acc[2][l] += p1[l] * q0[l];
            acc[3][l] += p1[l] * q1[l];
        }
        k += 4;
    }
    let mut tail = [0.0f64; 4];
    for k in full..d {
        tail[0] += a0[k] * b0[k];
        tail[1] += a0[k] * b1[k];
        tail[2] += a1[k] * b0[k];
        tail[3] += a1[k] * b1[k];
    }
    let mut out = [0.0; 4];
    for t in 0..4 {
        out[t] = (acc[t][0] + acc[t][1]) + (acc[t][2] + acc[t][3]) + tail[t];
    }
    out
}

/// Upper triangle of `X·Xᵀ`: entry `j − i` of row `i` is `dot(x_i, x_j)` for
/// `j ≥ i`. Rows are processed in register-blocked pairs, in parallel.
pub fn gram_upper(x: &Matrix) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    let n = x.nrows();
    let pairs = n.div_ceil(2);
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let i = 2 * p;
            if i + 1 == n {
                return (vec![dot(x.row(i), x.row(i))], Vec::new());
            }
            let (a0, a1) = (x.row(i), x.row(i + 1));
            let mut r0 = Vec::with_capacity(n - i);
            let mut r1 = Vec::with_capacity(n - i - 1);
            let mut j = i;
            while j + 1 < n {
                let [g00, g01, g10, g11] = dot_2x2(a0, a1, x.row(j), x.row(j + 1));
                r0.extend([g00, g01]);
                if j == i {
                    r1.push(g11);
                } else {
                    r1.extend([g10, g11]);
                }
                j += 2;
            }
            if j < n {
                r0.push(dot(a0, x.row(j)));
                r1.push(dot(a1, x.row(j)));
            }
            (r0, r1)
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for (r0, r1) in blocks {
        out.push(r0);
        // empty only for the unpaired last row
        if !r1.is_empty() {
            out.push(r1);
        }
    }
    out
}

pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    sq_euclidean(x, y).sqrt()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Median of a slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_match_naive_sums() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.5 - 2.0).collect();
        let y: Vec<f64> = (0..11).map(|i| (i * i) as f64 * 0.1).collect();
        let naive_dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let naive_sq: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let naive_l1: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        assert!((dot(&x, &y) - naive_dot).abs() < 1e-12);
        assert!((sq_euclidean(&x, &y) - naive_sq).abs() < 1e-12);
        assert!((manhattan(&x, &y) - naive_l1).abs() < 1e-12);
    }

    #[test]
    fn gram_matches_pairwise_dot_bitwise() {
        for (n, d) in [(1, 3), (2, 5), (5, 7), (6, 8), (9, 13)] {
            let data: Vec<f64> = (0..n * d).map(|t| ((t * 37 % 11) as f64 - 4.5) * 0.37).collect();
            let x = Matrix::from_vec(n, d, data).unwrap();
            let g = gram_upper(&x);
            assert_eq!(g.len(), n);
            for i in 0..n {
                assert_eq!(g[i].len(), n - i);
                for j in i..n {
                    assert_eq!(g[i][j - i].to_bits(), dot(x.row(i), x.row(j)).to_bits(), "n={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn from_rows_rejects_ragged() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.head(1).nrows(), 1);
    }
}
