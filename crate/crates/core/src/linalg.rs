//! Minimal dense row-major matrix used for parameter blocks and Hessians.
//!
//! Parameter matrices here are small (tens of rows/columns), so a flat
//! `Vec<f64>` with explicit indexing covers everything the estimators need.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat { rows: nrows, cols: ncols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Infinity norm of a slice.
pub fn inf_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Invert a square matrix in place via Gauss-Jordan with partial pivoting.
/// Returns `None` when a pivot falls below `1e-12` (numerically singular).
pub fn invert(mat: &Mat) -> Option<Mat> {
    let n = mat.rows();
    assert_eq!(n, mat.cols(), "invert requires a square matrix");
    let mut a = mat.clone();
    let mut inv = Mat::zeros(n, n);
    for i in 0..n {
        inv[(i, i)] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[(r, col)].abs() > a[(pivot, col)].abs() {
                pivot = r;
            }
        }
        let p = a[(pivot, col)];
        if p.abs() < 1e-12 || !p.is_finite() {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                let tmp = a[(col, c)];
                a[(col, c)] = a[(pivot, c)];
                a[(pivot, c)] = tmp;
                let tmp = inv[(col, c)];
                inv[(col, c)] = inv[(pivot, c)];
                inv[(pivot, c)] = tmp;
            }
        }
        let p = a[(col, col)];
        for c in 0..n {
            a[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for c in 0..n {
                a[(r, c)] -= factor * a[(col, c)];
                inv[(r, c)] -= factor * inv[(col, c)];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let m = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(m.col(1), vec![2.0, 5.0]);
    }

    #[test]
    fn invert_known_matrix() {
        // [[4,7],[2,6]]^-1 = [[0.6,-0.7],[-0.2,0.4]]
        let m = Mat::from_vec(2, 2, vec![4.0, 7.0, 2.0, 6.0]);
        let inv = invert(&m).unwrap();
        let expect = [[0.6, -0.7], [-0.2, 0.4]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((inv[(r, c)] - expect[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invert_times_original_is_identity() {
        let m = Mat::from_vec(
            3,
            3,
            vec![2.0, -1.0, 0.5, 0.3, 1.7, -0.2, -0.9, 0.4, 3.1],
        );
        let inv = invert(&m).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += m[(r, k)] * inv[(k, c)];
                }
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invert_rejects_singular() {
        let m = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(invert(&m).is_none());
    }
}
