//! Dense real-matrix primitives shared by every other module.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>` values. Functions here validate
//! their inputs (non-empty, finite) and never mutate arguments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Singular values below this fraction of `sigma_max` are treated as zero when
/// inverting.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Relative cutoff used to decide the numerical rank of a factor such as `X0`.
pub const RANK_CUTOFF: f64 = 1e-10;

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidMatrix(format!("{what} is empty")));
    }
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(Error::InvalidMatrix(format!(
            "{what} has a non-finite entry at ({r}, {c})"
        )));
    }
    Ok(())
}

pub fn ensure_same_shape(a: &Matrix, b: &Matrix, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Thin singular value decomposition `M = U diag(s) V^T` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    /// Nonincreasing, nonnegative.
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel * sigma_max`.
    pub fn rank(&self, rel: f64) -> usize {
        let cut = rel * self.sigma_max();
        if self.sigma_max() == 0.0 {
            return 0;
        }
        self.s.iter().take_while(|&&s| s > cut).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Leading `r` left singular vectors.
    pub fn left(&self, r: usize) -> Matrix {
        self.u.columns(0, r).into_owned()
    }

    /// Leading `r` right singular vectors.
    pub fn right(&self, r: usize) -> Matrix {
        self.v.columns(0, r).into_owned()
    }
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD, computed by faer's sequential divide-and-conquer routine.
///
/// nalgebra's own SVD can return an inaccurate decomposition when deflating
/// near-zero singular values, which rank-deficient inputs trigger routinely.
pub fn svd_thin(m: &Matrix) -> Result<SvdFactors> {
    ensure_finite(m, "svd input")?;
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::NumericalFailure(format!("SVD failed: {e:?}")))?;
    let (u, sv, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = sv.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let s: Vec<f64> = order.iter().map(|&i| sv[i].max(0.0)).collect();
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite singular value".into()));
    }
    let u = Matrix::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]);
    let v = Matrix::from_fn(m.ncols(), k, |i, j| v[(i, order[j])]);
    Ok(SvdFactors { u, s, v })
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(m, "svd input")?;
    let mut s = to_faer(m)
        .singular_values()
        .map_err(|e| Error::NumericalFailure(format!("SVD failed: {e:?}")))?;
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite singular value".into()));
    }
    for x in s.iter_mut() {
        *x = x.max(0.0);
    }
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Sum of absolute entries.
    Vec1,
    /// Frobenius.
    Vec2,
    /// Largest absolute entry.
    VecInf,
    /// Number of nonzero entries.
    Vec0,
    Nuclear,
    /// Operator 2 -> 2 norm, the largest singular value.
    Spectral,
    /// Max absolute column sum.
    OneToOne,
    /// Max absolute row sum.
    InfToInf,
    /// `max(rho * ||M||_{1->1}, ||M||_{inf->inf} / rho)`.
    Star(f64),
}

pub fn norm(m: &Matrix, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::Vec1 => m.iter().map(|v| v.abs()).sum(),
        NormKind::Vec2 => m.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::VecInf => m.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())),
        NormKind::Vec0 => m.iter().filter(|v| **v != 0.0).count() as f64,
        NormKind::Nuclear => singular_values(m)?.iter().sum(),
        NormKind::Spectral => singular_values(m)?.first().copied().unwrap_or(0.0),
        NormKind::OneToOne => one_to_one(m),
        NormKind::InfToInf => inf_to_inf(m),
        NormKind::Star(rho) => {
            if !(rho > 0.0) {
                return Err(Error::param(format!("star norm needs rho > 0, got {rho}")));
            }
            (rho * one_to_one(m)).max(inf_to_inf(m) / rho)
        }
    })
}

fn one_to_one(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn inf_to_inf(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `||M||_{2->inf}`: the largest Euclidean row norm.
pub fn two_to_inf(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
}

pub fn pseudoinverse(m: &Matrix) -> Result<Matrix> {
    let f = svd_thin(m)?;
    let cut = PINV_CUTOFF * f.sigma_max();
    let mut v = f.v.clone();
    for (j, s) in f.s.iter().enumerate() {
        let inv = if *s > cut && *s > 0.0 { 1.0 / s } else { 0.0 };
        v.column_mut(j).scale_mut(inv);
    }
    Ok(v * f.u.transpose())
}

/// Orthogonal projector `M M^+` onto the column space of `M`.
pub fn column_space_projector(m: &Matrix) -> Result<Matrix> {
    ensure_finite(m, "column space input")?;
    if m.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidMatrix("column space of a zero matrix".into()));
    }
    let f = svd_thin(m)?;
    let r = f.rank(PINV_CUTOFF);
    let u = f.left(r);
    Ok(&u * u.transpose())
}

/// Kronecker product `A (x) B`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-stacking vectorisation.
pub fn vec(m: &Matrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}
