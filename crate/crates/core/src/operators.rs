//! Proximal operators of the nuclear norm and the entrywise l1 norm.

use crate::error::{Error, Result};
use crate::linalg::{svd_thin, Matrix};

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::param(format!(
            "threshold must be finite and >= 0, got {tau}"
        )));
    }
    Ok(())
}

/// Singular value thresholding: `argmin_X 0.5 ||X - M||_F^2 + tau ||X||_*`.
///
/// Singular values equal to `tau` are dropped.
pub fn svt(m: &Matrix, tau: f64) -> Result<Matrix> {
    svt_with_norm(m, tau).map(|(x, _)| x)
}

/// SVT output together with its nuclear norm, which falls out of the shrunken
/// singular values for free.
pub(crate) fn svt_with_norm(m: &Matrix, tau: f64) -> Result<(Matrix, f64)> {
    check_tau(tau)?;
    let f = svd_thin(m)?;
    let keep = f.s.iter().take_while(|&&s| s > tau).count();
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    if keep == 0 {
        return Ok((out, 0.0));
    }
    let nuclear = f.s.iter().take(keep).map(|s| s - tau).sum();
    let mut u = f.u.columns(0, keep).into_owned();
    for (j, s) in f.s.iter().take(keep).enumerate() {
        u.column_mut(j).scale_mut(s - tau);
    }
    out.gemm(1.0, &u, &f.v.columns(0, keep).transpose(), 0.0);
    Ok((out, nuclear))
}

/// Entrywise soft thresholding: `sgn(M) o (|M| - tau)_+`.
pub fn soft_threshold(m: &Matrix, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    Ok(m.map(|v| shrink(v, tau)))
}

#[inline]
pub(crate) fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, NormKind};

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn zero_threshold_is_identity() {
        let a = m(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        assert!((svt(&a, 0.0).unwrap() - &a).norm() < 1e-12);
        assert_eq!(soft_threshold(&a, 0.0).unwrap(), a);
    }

    #[test]
    fn svt_on_diagonal() {
        let out = svt(&m(2, 2, &[3.0, 0.0, 0.0, 1.0]), 1.0).unwrap();
        assert!((out - m(2, 2, &[2.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn svt_rank_counts_values_above_threshold() {
        let a = m(3, 3, &[5.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.5]);
        let out = svt(&a, 1.0).unwrap();
        let s = crate::linalg::singular_values(&out).unwrap();
        assert_eq!(s.iter().filter(|&&v| v > 1e-12).count(), 2);
        // ties map to zero
        let tie = svt(&m(2, 2, &[1.0, 0.0, 0.0, 1.0]), 1.0).unwrap();
        assert_eq!(norm(&tie, NormKind::VecInf).unwrap(), 0.0);
    }

    #[test]
    fn soft_threshold_examples() {
        let a = m(2, 2, &[2.0, -0.5, 0.0, 1.0]);
        assert_eq!(
            soft_threshold(&a, 1.0).unwrap(),
            m(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(soft_threshold(&a, 2.0).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(soft_threshold(&a, 10.0).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn negative_threshold_rejected() {
        let a = Matrix::identity(2, 2);
        assert!(matches!(svt(&a, -0.1), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            soft_threshold(&a, -1.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            soft_threshold(&a, f64::NAN),
            Err(Error::InvalidParameter(_))
        ));
    }
}
