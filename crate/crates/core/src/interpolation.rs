//! Interpolation matrices, admissible `(P, Q)` pairs and the piecewise-smooth
//! decomposition `Theta = J_N X0 J_M^T + Y0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{
    column_space_projector, ensure_finite, pseudoinverse, singular_values, Matrix,
};
use crate::projectors::check_full_column_rank;

/// Nonzero entries `(row, weight)` of column `k` (0-based) of `J_N`.
fn interpolation_column(big: usize, k: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        return vec![(0, 1.0), (1, 1.0), (2, 0.5)];
    }
    [(2 * k, 0.5), (2 * k + 1, 1.0), (2 * k + 2, 0.5)]
        .into_iter()
        .filter(|(i, _)| *i < big)
        .collect()
}

fn check_interpolation_dim(big: usize) -> Result<()> {
    if big < 4 || !big.is_multiple_of(2) {
        return Err(Error::UnsupportedDimension(format!(
            "interpolation needs an even dimension >= 4, got {big}"
        )));
    }
    Ok(())
}

/// The normalized `N x N/2` interpolation matrix `J_N`.
///
/// Even rows (1-based) reproduce the coarse rows, odd interior rows average
/// their two neighbours and the first row copies the second.
pub fn interpolation_matrix(big: usize) -> Result<Matrix> {
    check_interpolation_dim(big)?;
    let n = big / 2;
    let mut j = Matrix::zeros(big, n);
    for k in 0..n {
        for (i, w) in interpolation_column(big, k) {
            j[(i, k)] = w;
        }
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    Identity,
    Single,
    Double,
    RowOnly,
    ColOnly,
    Block,
    Custom,
}

impl PairKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairKind::Identity => "identity",
            PairKind::Single => "single",
            PairKind::Double => "double",
            PairKind::RowOnly => "row_only",
            PairKind::ColOnly => "col_only",
            PairKind::Block => "block",
            PairKind::Custom => "custom",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "identity" => PairKind::Identity,
            "single" => PairKind::Single,
            "double" => PairKind::Double,
            "row_only" => PairKind::RowOnly,
            "col_only" => PairKind::ColOnly,
            "block" => PairKind::Block,
            "custom" => PairKind::Custom,
            other => return Err(Error::param(format!("unknown pair kind '{other}'"))),
        })
    }
}

/// One side of a projector pair. Keeps a row-sparse copy when the factor is
/// sparse so that products cost `O(nnz)` per column.
#[derive(Debug, Clone)]
struct Factor {
    dense: Matrix,
    identity: bool,
    rows: Option<Vec<Vec<(usize, f64)>>>,
}

impl Factor {
    fn new(dense: Matrix) -> Self {
        let identity = dense.is_square() && dense == Matrix::identity(dense.nrows(), dense.ncols());
        let nnz = dense.iter().filter(|v| **v != 0.0).count();
        let rows = (nnz * 4 <= dense.len()).then(|| {
            dense
                .row_iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(k, v)| (k, *v))
                        .collect()
                })
                .collect()
        });
        Factor {
            dense,
            identity,
            rows,
        }
    }

    /// `F A`
    fn mul(&self, a: &Matrix) -> Matrix {
        if self.identity {
            return a.clone();
        }
        match &self.rows {
            Some(rows) => {
                let mut out = Matrix::zeros(self.dense.nrows(), a.ncols());
                for c in 0..a.ncols() {
                    let src = a.column(c);
                    let mut dst = out.column_mut(c);
                    for (i, row) in rows.iter().enumerate() {
                        dst[i] = row.iter().map(|&(k, w)| w * src[k]).sum();
                    }
                }
                out
            }
            None => &self.dense * a,
        }
    }

    /// `F^T A`
    fn tr_mul(&self, a: &Matrix) -> Matrix {
        if self.identity {
            return a.clone();
        }
        match &self.rows {
            Some(rows) => {
                let mut out = Matrix::zeros(self.dense.ncols(), a.ncols());
                for c in 0..a.ncols() {
                    let src = a.column(c);
                    let mut dst = out.column_mut(c);
                    for (i, row) in rows.iter().enumerate() {
                        for &(k, w) in row {
                            dst[k] += w * src[i];
                        }
                    }
                }
                out
            }
            None => self.dense.tr_mul(a),
        }
    }
}

/// An admissible `(P, Q)` pair with cached pseudoinverses, column-space
/// projectors and extreme singular values.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    kind: PairKind,
    p: Factor,
    q: Factor,
    p_pinv: Matrix,
    q_pinv: Matrix,
    p_star: Matrix,
    q_star: Matrix,
    p_sigma: (f64, f64),
    q_sigma: (f64, f64),
}

fn extreme_singular_values(m: &Matrix) -> Result<(f64, f64)> {
    let s = singular_values(m)?;
    Ok((*s.last().unwrap(), s[0]))
}

impl ProjectorPair {
    /// Wraps explicit factors. Both must be tall with full column rank.
    pub fn new(p: Matrix, q: Matrix, kind: PairKind) -> Result<Self> {
        check_full_column_rank(&p, "P")?;
        check_full_column_rank(&q, "Q")?;
        Ok(ProjectorPair {
            kind,
            p_pinv: pseudoinverse(&p)?,
            q_pinv: pseudoinverse(&q)?,
            p_star: column_space_projector(&p)?,
            q_star: column_space_projector(&q)?,
            p_sigma: extreme_singular_values(&p)?,
            q_sigma: extreme_singular_values(&q)?,
            p: Factor::new(p),
            q: Factor::new(q),
        })
    }

    pub fn custom(p: Matrix, q: Matrix) -> Result<Self> {
        Self::new(p, q, PairKind::Custom)
    }

    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn p(&self) -> &Matrix {
        &self.p.dense
    }

    pub fn q(&self) -> &Matrix {
        &self.q.dense
    }

    pub fn p_pinv(&self) -> &Matrix {
        &self.p_pinv
    }

    pub fn q_pinv(&self) -> &Matrix {
        &self.q_pinv
    }

    /// `P* = P P^+`
    pub fn p_star(&self) -> &Matrix {
        &self.p_star
    }

    /// `Q* = Q Q^+`
    pub fn q_star(&self) -> &Matrix {
        &self.q_star
    }

    /// `(sigma_min(P), sigma_max(P))`
    pub fn p_sigma(&self) -> (f64, f64) {
        self.p_sigma
    }

    /// `(sigma_min(Q), sigma_max(Q))`
    pub fn q_sigma(&self) -> (f64, f64) {
        self.q_sigma
    }

    /// `(N, M)`, the shape of the observation.
    pub fn outer_shape(&self) -> (usize, usize) {
        (self.p.dense.nrows(), self.q.dense.nrows())
    }

    /// `(n, m)`, the shape of the low-rank core.
    pub fn inner_shape(&self) -> (usize, usize) {
        (self.p.dense.ncols(), self.q.dense.ncols())
    }

    /// `P X Q^T`
    pub fn lift(&self, x: &Matrix) -> Matrix {
        debug_assert_eq!(x.shape(), self.inner_shape());
        let xq = self.q.mul(&x.transpose()); // M x n
        self.p.mul(&xq.transpose())
    }

    /// `P^T G Q`
    pub fn pull(&self, g: &Matrix) -> Matrix {
        debug_assert_eq!(g.shape(), self.outer_shape());
        let qg = self.q.tr_mul(&g.transpose()); // m x N
        self.p.tr_mul(&qg.transpose())
    }
}

fn block_matrix(big: usize) -> Result<Matrix> {
    if big < 2 || !big.is_multiple_of(2) {
        return Err(Error::UnsupportedDimension(format!(
            "block pair needs an even dimension, got {big}"
        )));
    }
    let mut b = Matrix::zeros(big, big / 2);
    for k in 0..big / 2 {
        b[(2 * k, k)] = 1.0;
        b[(2 * k + 1, k)] = 1.0;
    }
    Ok(b)
}

fn double_interpolation(big: usize) -> Result<Matrix> {
    if !big.is_multiple_of(4) || big / 2 < 4 {
        return Err(Error::UnsupportedDimension(format!(
            "double interpolation needs a dimension divisible by 4 and >= 8, got {big}"
        )));
    }
    Ok(interpolation_matrix(big)? * interpolation_matrix(big / 2)?)
}

fn identity(big: usize) -> Result<Matrix> {
    if big == 0 {
        return Err(Error::UnsupportedDimension("zero dimension".into()));
    }
    Ok(Matrix::identity(big, big))
}

/// Builds one of the standard pairs for an `N x M` observation.
pub fn projector_pair(kind: PairKind, big_n: usize, big_m: usize) -> Result<ProjectorPair> {
    let (p, q) = match kind {
        PairKind::Identity => (identity(big_n)?, identity(big_m)?),
        PairKind::Single => (interpolation_matrix(big_n)?, interpolation_matrix(big_m)?),
        PairKind::Double => (double_interpolation(big_n)?, double_interpolation(big_m)?),
        PairKind::RowOnly => (interpolation_matrix(big_n)?, identity(big_m)?),
        PairKind::ColOnly => (identity(big_n)?, interpolation_matrix(big_m)?),
        PairKind::Block => (block_matrix(big_n)?, block_matrix(big_m)?),
        PairKind::Custom => {
            return Err(Error::param(
                "custom pairs are built from explicit factors with ProjectorPair::custom",
            ))
        }
    };
    ProjectorPair::new(p, q, kind)
}

/// Number of unequal horizontally or vertically adjacent entry pairs.
pub fn count_jumps(theta: &Matrix) -> usize {
    let (rows, cols) = theta.shape();
    let mut s = 0;
    for j in 0..cols {
        for i in 0..rows {
            if i + 1 < rows && theta[(i, j)] != theta[(i + 1, j)] {
                s += 1;
            }
            if j + 1 < cols && theta[(i, j)] != theta[(i, j + 1)] {
                s += 1;
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// Largest violation of the interpolation smoothness relations along `axis`:
/// odd interior rows (columns) must average their neighbours and the first
/// must equal the second.
pub fn smoothness_residual(w: &Matrix, axis: Axis) -> Result<f64> {
    let w = match axis {
        Axis::Rows => w.clone(),
        Axis::Cols => w.transpose(),
    };
    check_interpolation_dim(w.nrows())?;
    let mut worst = (w.row(0) - w.row(1)).amax();
    // 0-based rows 2, 4, ..., N-2 are the 1-based odd rows 3..N-1
    for i in (2..w.nrows() - 1).step_by(2) {
        let dev = w.row(i) - (w.row(i - 1) + w.row(i + 1)) * 0.5;
        worst = worst.max(dev.amax());
    }
    Ok(worst)
}

/// `Theta = J_N X0 J_M^T + Y0` with `||Y0||_0` bounded by the jump count.
#[derive(Debug, Clone)]
pub struct PiecewiseDecomposition {
    pub x0: Matrix,
    pub y0: Matrix,
    pub jumps: usize,
}

/// Row of the observation that pins coarse index `k`: the first row for
/// `k = 0`, otherwise the even (1-based) row `2(k+1)`.
fn anchor(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        2 * k + 1
    }
}

fn agrees(theta: f64, smooth: f64) -> bool {
    (theta - smooth).abs() <= 64.0 * f64::EPSILON * (1.0 + theta.abs())
}

/// Splits an `N x M` matrix (both even, at least 4) into a doubly smooth part
/// `J_N X0 J_M^T` and a sparse residual `Y0`.
///
/// The coarse matrix starts from the anchor entries (index 1 and every even
/// index from 4 on, 1-based): rows 2, odd rows and the corresponding columns
/// are then filled in by interpolation, so a residual appears only next to a
/// jump. A local pass then re-chooses individual coarse entries when another
/// value makes more of the nine entries they influence exact, which removes
/// the spread caused by a jump sitting on an anchor.
pub fn decompose_piecewise(theta: &Matrix) -> Result<PiecewiseDecomposition> {
    ensure_finite(theta, "Theta")?;
    let (big_n, big_m) = theta.shape();
    check_interpolation_dim(big_n)?;
    check_interpolation_dim(big_m)?;
    let (n, m) = (big_n / 2, big_m / 2);
    let jn = interpolation_matrix(big_n)?;
    let jm = interpolation_matrix(big_m)?;

    let mut x = Matrix::from_fn(n, m, |k, l| theta[(anchor(k), anchor(l))]);
    let mut smooth = &jn * &x * jm.transpose();

    let row_cols: Vec<_> = (0..n).map(|k| interpolation_column(big_n, k)).collect();
    let col_cols: Vec<_> = (0..m).map(|l| interpolation_column(big_m, l)).collect();

    for _sweep in 0..8 {
        let mut changed = false;
        for k in 0..n {
            for l in 0..m {
                // smooth[i, j] = base + coef * x[k, l] on the influenced cells
                let cells: Vec<(usize, usize, f64, f64)> = row_cols[k]
                    .iter()
                    .flat_map(|&(i, a)| col_cols[l].iter().map(move |&(j, b)| (i, j, a * b)))
                    .map(|(i, j, coef)| (i, j, coef, smooth[(i, j)] - coef * x[(k, l)]))
                    .collect();
                let matches = |v: f64| {
                    cells
                        .iter()
                        .filter(|&&(i, j, coef, base)| agrees(theta[(i, j)], base + coef * v))
                        .count()
                };
                let current = cells
                    .iter()
                    .filter(|&&(i, j, _, _)| agrees(theta[(i, j)], smooth[(i, j)]))
                    .count();
                let mut best = (current, x[(k, l)]);
                for &(i, j, coef, base) in &cells {
                    let v = (theta[(i, j)] - base) / coef;
                    let hits = matches(v);
                    if hits > best.0 {
                        best = (hits, v);
                    }
                }
                if best.0 > current {
                    x[(k, l)] = best.1;
                    for &(i, j, coef, base) in &cells {
                        smooth[(i, j)] = base + coef * best.1;
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let smooth = &jn * &x * jm.transpose();
    let y0 = theta.zip_map(&smooth, |t, s| if agrees(t, s) { 0.0 } else { t - s });
    Ok(PiecewiseDecomposition {
        x0: x,
        y0,
        jumps: count_jumps(theta),
    })
}
