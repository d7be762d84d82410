//! Orthogonal projections onto the sparse support space, the projected
//! low-rank tangent space and the unprojected low-rank tangent space.
//!
//! Every projector stores only factor matrices; applying one to an `N x M`
//! matrix costs `O(NMr)`.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, svd_thin, Matrix, RANK_CUTOFF};

/// A linear orthogonal projection acting on matrices.
pub trait Projector {
    fn apply(&self, m: &Matrix) -> Matrix;

    fn complement(&self, m: &Matrix) -> Matrix {
        m - self.apply(m)
    }
}

/// Projection onto matrices supported inside `supp(Y0)`.
#[derive(Debug, Clone)]
pub struct SupportProjector {
    mask: nalgebra::DMatrix<bool>,
}

impl SupportProjector {
    pub fn new(y0: &Matrix) -> Self {
        SupportProjector {
            mask: y0.map(|v| v != 0.0),
        }
    }

    pub fn mask(&self) -> &nalgebra::DMatrix<bool> {
        &self.mask
    }

    /// Support size `s`.
    pub fn support_size(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    /// `sgn(Y0)` restricted to the support pattern, i.e. the 0/1 indicator.
    pub fn indicator(&self) -> Matrix {
        self.mask.map(|b| if b { 1.0 } else { 0.0 })
    }
}

impl Projector for SupportProjector {
    fn apply(&self, m: &Matrix) -> Matrix {
        assert_eq!(m.shape(), self.mask.shape(), "support projector shape");
        m.zip_map(&self.mask, |v, keep| if keep { v } else { 0.0 })
    }
}

pub fn support_projector(y0: &Matrix) -> SupportProjector {
    SupportProjector::new(y0)
}

/// Left and right singular vectors of `X0` belonging to its nonzero singular
/// values, with the rank decided by [`RANK_CUTOFF`].
pub fn singular_spaces(x0: &Matrix) -> Result<(Matrix, Matrix)> {
    ensure_finite(x0, "X0")?;
    let f = svd_thin(x0)?;
    let r = f.rank(RANK_CUTOFF);
    if r == 0 {
        return Err(Error::InvalidMatrix("X0 is zero".into()));
    }
    Ok((f.left(r), f.right(r)))
}

/// `U U^T M + M V V^T - U U^T M V V^T` for orthonormal `U`, `V`.
fn tangent_apply(u: &Matrix, v: &Matrix, m: &Matrix) -> Matrix {
    let ut_m = u.transpose() * m; // r x M
    let left = u * &ut_m;
    let mv = m * v; // N x r
    let right = &mv * v.transpose();
    let both = u * (&ut_m * v) * v.transpose();
    left + right - both
}

/// Projection onto the tangent space of `P X0 Q^T` inside the image of
/// `(P, Q)`.
#[derive(Debug, Clone)]
pub struct SmoothLowrankProjector {
    /// `N x r`, orthonormal basis of `range(P U0)`.
    pub ut: Matrix,
    /// `M x r`, orthonormal basis of `range(Q V0)`.
    pub vt: Matrix,
    pub rank: usize,
}

impl SmoothLowrankProjector {
    pub fn new(x0: &Matrix, p: &Matrix, q: &Matrix) -> Result<Self> {
        if p.ncols() != x0.nrows() || q.ncols() != x0.ncols() {
            return Err(Error::shape(format!(
                "X0 is {:?} but P is {:?} and Q is {:?}",
                x0.shape(),
                p.shape(),
                q.shape()
            )));
        }
        check_full_column_rank(p, "P")?;
        check_full_column_rank(q, "Q")?;
        let (u0, v0) = singular_spaces(x0)?;
        let rank = u0.ncols();
        let ut = svd_thin(&(p * &u0))?.left(rank);
        let vt = svd_thin(&(q * &v0))?.left(rank);
        Ok(SmoothLowrankProjector { ut, vt, rank })
    }

    /// `U~ U~^T`
    pub fn left_projector(&self) -> Matrix {
        &self.ut * self.ut.transpose()
    }

    /// `V~ V~^T`
    pub fn right_projector(&self) -> Matrix {
        &self.vt * self.vt.transpose()
    }
}

impl Projector for SmoothLowrankProjector {
    fn apply(&self, m: &Matrix) -> Matrix {
        tangent_apply(&self.ut, &self.vt, m)
    }
}

pub fn smooth_lowrank_projector(
    x0: &Matrix,
    p: &Matrix,
    q: &Matrix,
) -> Result<SmoothLowrankProjector> {
    SmoothLowrankProjector::new(x0, p, q)
}

pub(crate) fn check_full_column_rank(m: &Matrix, name: &str) -> Result<()> {
    if m.nrows() < m.ncols() {
        return Err(Error::InvalidProjectorPair(format!(
            "{name} is {}x{}, not tall",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, name)?;
    let s = crate::linalg::singular_values(m)?;
    let smin = s.last().copied().unwrap_or(0.0);
    if smin <= 1e-10 {
        return Err(Error::InvalidProjectorPair(format!(
            "{name} is not of full column rank (sigma_min = {smin:e})"
        )));
    }
    Ok(())
}

/// Projection onto the tangent space of `X0` itself.
#[derive(Debug, Clone)]
pub struct LowrankProjector {
    pub u0: Matrix,
    pub v0: Matrix,
}

impl LowrankProjector {
    pub fn new(x0: &Matrix) -> Result<Self> {
        let (u0, v0) = singular_spaces(x0)?;
        Ok(LowrankProjector { u0, v0 })
    }

    pub fn rank(&self) -> usize {
        self.u0.ncols()
    }
}

impl Projector for LowrankProjector {
    fn apply(&self, m: &Matrix) -> Matrix {
        tangent_apply(&self.u0, &self.v0, m)
    }
}

pub fn lowrank_projector(x0: &Matrix) -> Result<LowrankProjector> {
    LowrankProjector::new(x0)
}
