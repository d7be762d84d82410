#![allow(dead_code)]

use proptest::prelude::*;
use prpca_core::Matrix;

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols)
        .prop_map(move |v| Matrix::from_row_slice(rows, cols, &v))
}

/// Random shape within the bounds, then a matrix of that shape.
pub fn any_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| matrix(r, c))
}

/// Product of uniform factors, rank `r` almost surely.
pub fn lowrank(rows: usize, cols: usize, r: usize) -> impl Strategy<Value = Matrix> {
    (matrix(rows, r), matrix(cols, r)).prop_map(|(a, b)| a * b.transpose())
}

/// Small deterministic generator for tests that need many draws.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.next())
    }

    pub fn lowrank(&mut self, rows: usize, cols: usize, r: usize) -> Matrix {
        self.matrix(rows, r) * self.matrix(cols, r).transpose()
    }

    /// Sparse matrix with roughly `density` nonzeros in [-5, 5].
    pub fn sparse(&mut self, rows: usize, cols: usize, density: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| {
            if (self.next() + 1.0) / 2.0 < density {
                5.0 * self.next()
            } else {
                0.0
            }
        })
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}
