//! Small dense factorizations. Matrices are row-major slices.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::math::sqrt;

/// In-place Cholesky of a symmetric positive definite `n x n` matrix.
/// Returns `false` if a pivot is not strictly positive.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = sqrt(d);
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`, adding a growing
/// diagonal shift when the plain factorization fails. `None` if even the
/// shifted system cannot be factored.
pub(crate) fn spd_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0_f64, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut l = a.to_vec();
        for i in 0..n {
            l[i * n + i] += shift;
        }
        if cholesky_in_place(&mut l, n) {
            let mut x = b.to_vec();
            cholesky_solve(&l, n, &mut x);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
    }
    None
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> CMatrix {
        CMatrix { rows: end - start, cols: self.cols, data: self.data[start * self.cols..end * self.cols].to_vec() }
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Plain (non-conjugating) product of a row vector and a column vector.
pub fn dot(row: &[Complex64], col: &[Complex64]) -> Complex64 {
    row.iter().zip(col).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
}

/// Solves `G Y = B` for Hermitian positive definite `G` (`n x n`) and
/// `B` (`n x m`). `None` when a pivot falls below `rel_tol * max diag(G)`.
pub(crate) fn hermitian_solve(g: &CMatrix, b: &CMatrix, rel_tol: f64) -> Option<CMatrix> {
    let n = g.rows;
    let max_diag = (0..n).map(|i| g.get(i, i).re).fold(0.0_f64, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = g.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > rel_tol * max_diag) {
            return None;
        }
        let d = sqrt(d);
        l.set(j, j, Complex64::new(d, 0.0));
        for i in (j + 1)..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / d);
        }
    }
    let mut y = b.clone();
    for c in 0..b.cols {
        // forward: L z = b
        for i in 0..n {
            let mut s = y.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * y.get(k, c);
            }
            y.set(i, c, s / l.get(i, i).re);
        }
        // backward: L^H y = z
        for i in (0..n).rev() {
            let mut s = y.get(i, c);
            for k in (i + 1)..n {
                s -= l.get(k, i).conj() * y.get(k, c);
            }
            y.set(i, c, s / l.get(i, i).re);
        }
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_recovers_known_solution() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect();
        let got = spd_solve(&a, 3, &b).unwrap();
        for (g, e) in got.iter().zip(x.iter()) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn spd_solve_regularizes_singular_matrix() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(spd_solve(&a, 2, &[1.0, 1.0]).is_some());
    }

    #[test]
    fn hermitian_solve_rejects_singular() {
        let mut g = CMatrix::zeros(2, 2);
        g.set(0, 0, Complex64::new(1.0, 0.0));
        g.set(0, 1, Complex64::new(1.0, 0.0));
        g.set(1, 0, Complex64::new(1.0, 0.0));
        g.set(1, 1, Complex64::new(1.0, 0.0));
        let b = CMatrix::zeros(2, 1);
        assert!(hermitian_solve(&g, &b, 1e-12).is_none());
    }
}
