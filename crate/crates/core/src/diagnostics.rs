//! Computable identifiability and recovery-guarantee quantities.
//!
//! * `alpha(rho)` measures how spread out the support of `Y0` is;
//! * `beta(rho)` measures how spiky the singular vectors of `P X0 Q^T` are;
//!   `inf_rho alpha * beta < 1` certifies that the decomposition is unique;
//! * `Gamma`, the error terms and the `delta` quantities feed the penalty
//!   conditions and the explicit error bounds.
//!
//! `eta0` (a norm-transfer constant defined through a maximum over all
//! matrices) is not computed; callers supply it.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::interpolation::ProjectorPair;
use crate::linalg::{norm, pseudoinverse, two_to_inf, Matrix, NormKind};
use crate::projectors::{singular_spaces, smooth_lowrank_projector, Projector, SupportProjector};

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// Largest number of nonzeros in any column and in any row of `Y0`.
#[derive(Debug, Clone, Copy)]
struct SupportSpread {
    per_col: f64,
    per_row: f64,
}

impl SupportSpread {
    fn of(y0: &Matrix) -> Self {
        let sgn = SupportProjector::new(y0).indicator();
        SupportSpread {
            per_col: norm(&sgn, NormKind::OneToOne).unwrap_or(0.0),
            per_row: norm(&sgn, NormKind::InfToInf).unwrap_or(0.0),
        }
    }

    fn alpha(&self, rho: f64) -> f64 {
        (rho * self.per_col).max(self.per_row / rho)
    }
}

/// `beta(rho) = u / rho + v * rho + cross`.
#[derive(Debug, Clone, Copy)]
struct Coherence {
    u: f64,
    v: f64,
    cross: f64,
}

impl Coherence {
    fn of(x0: &Matrix, pair: &ProjectorPair) -> Result<Self> {
        let pt = smooth_lowrank_projector(x0, pair.p(), pair.q())?;
        Ok(Coherence {
            u: pt.left_projector().amax(),
            v: pt.right_projector().amax(),
            cross: two_to_inf(&pt.ut) * two_to_inf(&pt.vt),
        })
    }

    fn beta(&self, rho: f64) -> f64 {
        self.u / rho + self.v * rho + self.cross
    }
}

/// `max(rho ||sgn(Y0)||_{1->1}, ||sgn(Y0)||_{inf->inf} / rho)`
pub fn alpha(y0: &Matrix, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(SupportSpread::of(y0).alpha(rho))
}

/// `||U~U~^T||_inf / rho + rho ||V~V~^T||_inf + ||U~||_{2->inf} ||V~||_{2->inf}`
/// where `U~`, `V~` span `P U0` and `Q V0`.
pub fn beta(x0: &Matrix, pair: &ProjectorPair, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(Coherence::of(x0, pair)?.beta(rho))
}

#[derive(Debug, Clone)]
pub struct GammaQuantities {
    pub gamma: Matrix,
    /// `||Gamma||_vec(inf)`
    pub gamma1: f64,
    /// `||Gamma||_{2->2}`
    pub gamma2: f64,
}

/// `Gamma = ((P U0)^+)^T V0^T Q^+ + (P^+)^T U0 (Q V0)^+ - ((P U0)^+)^T (Q V0)^+`.
///
/// Reduces to `U0 V0^T` for identity factors.
pub fn gamma_quantities(x0: &Matrix, pair: &ProjectorPair) -> Result<GammaQuantities> {
    if x0.shape() != pair.inner_shape() {
        return Err(Error::shape(format!(
            "X0 is {:?} but the pair expects {:?}",
            x0.shape(),
            pair.inner_shape()
        )));
    }
    let (u0, v0) = singular_spaces(x0)?;
    let pu_pinv_t = pseudoinverse(&(pair.p() * &u0))?.transpose(); // N x r
    let qv_pinv = pseudoinverse(&(pair.q() * &v0))?; // r x M
    let gamma = &pu_pinv_t * v0.transpose() * pair.q_pinv()
        + pair.p_pinv().transpose() * &u0 * &qv_pinv
        - &pu_pinv_t * &qv_pinv;
    let gamma1 = gamma.amax();
    let gamma2 = norm(&gamma, NormKind::Spectral)?;
    Ok(GammaQuantities {
        gamma,
        gamma1,
        gamma2,
    })
}

/// 21 log-spaced values in `[c / 10, 10 c]` with `c = sqrt(M / N)`.
pub fn default_rho_grid(big_n: usize, big_m: usize) -> Vec<f64> {
    let centre = (big_m as f64 / big_n as f64).sqrt();
    (0..21)
        .map(|i| centre * 10f64.powf(-1.0 + 2.0 * i as f64 / 20.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    /// `min_rho alpha(rho) beta(rho)` over the grid.
    pub value: f64,
    /// The minimising grid point.
    pub rho: f64,
}

impl Margin {
    /// Sufficient condition for a unique decomposition.
    pub fn identifiable(&self) -> bool {
        self.value < 1.0
    }
}

pub fn identifiability_margin(
    x0: &Matrix,
    y0: &Matrix,
    pair: &ProjectorPair,
    rho_grid: &[f64],
) -> Result<Margin> {
    if rho_grid.is_empty() {
        return Err(Error::param("rho grid is empty"));
    }
    for &rho in rho_grid {
        check_rho(rho)?;
    }
    let spread = SupportSpread::of(y0);
    let coh = Coherence::of(x0, pair)?;
    let mut best = Margin {
        value: f64::INFINITY,
        rho: rho_grid[0],
    };
    for &rho in rho_grid {
        let v = spread.alpha(rho) * coh.beta(rho);
        if v < best.value {
            best = Margin { value: v, rho };
        }
    }
    Ok(best)
}

/// Exact `inf_rho alpha(rho) beta(rho)`.
///
/// Below `rho* = sqrt(per_row / per_col)` the product equals
/// `per_row (u / rho^2 + cross / rho + v)` and decreases; above it equals
/// `per_col (u + cross rho + v rho^2)` and increases. The infimum is at `rho*`.
pub fn exact_margin(x0: &Matrix, y0: &Matrix, pair: &ProjectorPair) -> Result<Margin> {
    let spread = SupportSpread::of(y0);
    let coh = Coherence::of(x0, pair)?;
    if spread.per_col == 0.0 {
        return Ok(Margin {
            value: 0.0,
            rho: 1.0,
        });
    }
    let rho = (spread.per_row / spread.per_col).sqrt();
    Ok(Margin {
        value: spread.alpha(rho) * coh.beta(rho),
        rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorTerms {
    /// `||E||_{2->2}`
    pub eps_2to2: f64,
    /// `||P_T(E)||_inf + ||E||_inf`
    pub eps_inf: f64,
    /// Same as `eps_inf` with `P* E Q*` in place of `E`.
    pub eps_inf_prime: f64,
    /// `||P_T(P* E Q*)||_*`
    pub eps_star: f64,
}

pub fn error_terms(e: &Matrix, x0: &Matrix, pair: &ProjectorPair) -> Result<ErrorTerms> {
    if e.shape() != pair.outer_shape() {
        return Err(Error::shape(format!(
            "E is {:?} but the pair maps into {:?}",
            e.shape(),
            pair.outer_shape()
        )));
    }
    let pt = smooth_lowrank_projector(x0, pair.p(), pair.q())?;
    let projected = pair.p_star() * e * pair.q_star();
    let pt_projected = pt.apply(&projected);
    Ok(ErrorTerms {
        eps_2to2: norm(e, NormKind::Spectral)?,
        eps_inf: pt.apply(e).amax() + e.amax(),
        eps_inf_prime: pt_projected.amax() + projected.amax(),
        eps_star: norm(&pt_projected, NormKind::Nuclear)?,
    })
}

/// Scalars shared by the penalty conditions, the `delta` quantities and
/// the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Rank of `X0`.
    pub r: usize,
    /// Support size of `Y0`.
    pub s: usize,
    /// Slack constant, `c > 1`.
    pub c: f64,
    pub rho: f64,
    /// User-supplied norm-transfer constant.
    pub eta0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0) {
            return Err(Error::param(format!("c must exceed 1, got {}", self.c)));
        }
        check_rho(self.rho)?;
        for (name, v) in [
            ("eta0", self.eta0),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Structural quantities evaluated at one `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Structure {
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eps: ErrorTerms,
}

impl Structure {
    pub fn alpha_beta(&self) -> f64 {
        self.alpha * self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub delta1: f64,
    pub delta2: f64,
    pub delta: f64,
}

/// ```text
/// delta1 = r (2 alpha/(1-ab) (l2 + g1 l1 + e_inf) + 2 e_22 + l1 g2)
/// delta2 = s/(1-ab) (l2 + l1 g1 + e_inf)
/// delta  = (l1 g2 + e_22) delta1 + (l2 + e_inf) delta2
/// ```
pub fn delta_quantities(inputs: &BoundInputs, st: &Structure) -> Result<Deltas> {
    let ab = st.alpha_beta();
    if !(ab < 1.0) {
        return Err(Error::NotIdentifiable(ab));
    }
    let (l1, l2) = (inputs.lambda1, inputs.lambda2);
    let e = &st.eps;
    let gap = 1.0 - ab;
    let delta1 = inputs.r as f64
        * (2.0 * st.alpha / gap * (l2 + st.gamma1 * l1 + e.eps_inf)
            + 2.0 * e.eps_2to2
            + l1 * st.gamma2);
    let delta2 = inputs.s as f64 / gap * (l2 + l1 * st.gamma1 + e.eps_inf);
    let delta = (l1 * st.gamma2 + e.eps_2to2) * delta1 + (l2 + e.eps_inf) * delta2;
    Ok(Deltas {
        delta1,
        delta2,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenaltyConditions {
    /// `alpha beta < 1`
    pub identifiable: bool,
    /// Lower bound on `lambda1` against `lambda2` and the noise.
    pub lambda1_ok: bool,
    /// Lower bound on `lambda2` against `lambda1` and the noise.
    pub lambda2_ok: bool,
}

impl PenaltyConditions {
    pub fn all(&self) -> bool {
        self.identifiable && self.lambda1_ok && self.lambda2_ok
    }
}

/// Coefficients of the two penalty conditions, both linear in
/// `(lambda1, lambda2)`:
///
/// ```text
/// a1 l1 - b1 l2 >= k1
/// a2 l2 - b2 l1 >= k2
/// ```
struct ConditionLines {
    a1: f64,
    b1: f64,
    k1: f64,
    a2: f64,
    b2: f64,
    k2: f64,
}

fn condition_lines(c: f64, st: &Structure, pair: &ProjectorPair) -> ConditionLines {
    let ab = st.alpha_beta();
    let ratio = st.alpha / (1.0 - ab);
    let inv_spread = 1.0 / (pair.p_sigma().1 * pair.q_sigma().1);
    ConditionLines {
        a1: inv_spread - c * st.gamma1 * ratio,
        b1: c * ratio,
        k1: c * (ratio * st.eps.eps_inf + st.eps.eps_2to2),
        a2: 1.0 - (1.0 + c) * ab,
        b2: c * st.gamma1,
        k2: c * (2.0 - ab) * st.eps.eps_inf,
    }
}

pub fn penalty_conditions(
    inputs: &BoundInputs,
    st: &Structure,
    pair: &ProjectorPair,
) -> PenaltyConditions {
    let identifiable = st.alpha_beta() < 1.0;
    if !identifiable {
        return PenaltyConditions {
            identifiable,
            lambda1_ok: false,
            lambda2_ok: false,
        };
    }
    let lines = condition_lines(inputs.c, st, pair);
    let (l1, l2) = (inputs.lambda1, inputs.lambda2);
    PenaltyConditions {
        identifiable,
        lambda1_ok: lines.a1 * l1 - lines.b1 * l2 >= lines.k1,
        lambda2_ok: lines.a2 * l2 - lines.b2 * l1 >= lines.k2,
    }
}

/// Smallest `(lambda1, lambda2)` meeting both penalty conditions with
/// equality, inflated by `1 + slack`. `None` when no positive pair exists.
pub fn admissible_penalties(
    c: f64,
    st: &Structure,
    pair: &ProjectorPair,
    slack: f64,
) -> Option<(f64, f64)> {
    if !(st.alpha_beta() < 1.0) || !(c > 1.0) {
        return None;
    }
    let ConditionLines {
        a1,
        b1,
        k1,
        a2,
        b2,
        k2,
    } = condition_lines(c, st, pair);
    if !(a1 > 0.0) || !(a2 > 0.0) || !(a1 * a2 > b1 * b2) {
        return None;
    }
    let l2 = (k2 + b2 * k1 / a1) / (a2 - b2 * b1 / a1);
    let l1 = (k1 + b1 * l2) / a1;
    // degenerate noiseless inputs would give zero penalties
    let floor = f64::MIN_POSITIVE.sqrt();
    Some((
        (l1 * (1.0 + slack)).max(floor),
        (l2 * (1.0 + slack)).max(floor),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryBounds {
    /// Bound on `(1 - alpha beta) ||Y^ - Y0||_1`.
    pub y_vec1: f64,
    /// Bound on `(1 - alpha beta) ||P* (Y^ - Y0) Q*||_1`.
    pub projected_y_vec1: f64,
    /// Bound on `||P (X^ - X0) Q^T||_*`.
    pub x_nuclear: f64,
}

/// Right-hand sides of the error bounds for the sparse and the low-rank
/// components.
///
/// The low-rank bound needs the transfer constant between the projected and
/// unprojected tangent spaces; it is replaced by the smallest value
/// compatible with `eta0`, namely `eta0 / (sigma_max(P) sigma_max(Q))`, and
/// its final `sqrt(2r) ||P*(Y^-Y0)Q*||_2` term is bounded through the
/// projected `l1` bound.
pub fn recovery_bounds(
    inputs: &BoundInputs,
    st: &Structure,
    pair: &ProjectorPair,
) -> Result<RecoveryBounds> {
    inputs.validate()?;
    let cond = penalty_conditions(inputs, st, pair);
    if !cond.all() {
        return Err(Error::BoundNotApplicable(format!(
            "penalty conditions not met: {cond:?}"
        )));
    }
    let d = delta_quantities(inputs, st)?;
    let (l1, l2) = (inputs.lambda1, inputs.lambda2);
    let (r, s) = (inputs.r as f64, inputs.s as f64);
    let shrink = 1.0 - 1.0 / inputs.c;
    let inv_floor = 1.0 / (pair.p_sigma().0 * pair.q_sigma().0);
    let eta1 = inputs.eta0 / (pair.p_sigma().1 * pair.q_sigma().1);
    let e = &st.eps;

    let tail = 5.0 * l2 * s
        + 2.0 * s * e.eps_inf
        + 3.0 * s * e.eps_inf_prime
        + 2.0 * inv_floor * l1 * (s * r).sqrt();
    let projected_y_vec1 = d.delta / (l2 * shrink * inputs.eta0) + tail;
    let y_vec1 = (1.0 + 1.0 / inputs.eta0) * d.delta / (2.0 * shrink * l2) + tail;
    let x_nuclear = d.delta / (2.0 * shrink * l1 * eta1)
        + e.eps_star
        + 2.0 * inv_floor * l1 * r
        + (2.0 * r).sqrt() * projected_y_vec1 / (1.0 - st.alpha_beta());
    Ok(RecoveryBounds {
        y_vec1,
        projected_y_vec1,
        x_nuclear,
    })
}

/// User-facing settings for [`diagnose`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseSettings {
    pub c: f64,
    pub eta0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Evaluate at this `rho` instead of the grid minimiser.
    pub rho: Option<f64>,
    pub rho_grid: Option<Vec<f64>>,
}

impl DiagnoseSettings {
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        DiagnoseSettings {
            c: 1.5,
            eta0: 1.0,
            lambda1,
            lambda2,
            rho: None,
            rho_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub r: usize,
    pub s: usize,
    pub c: f64,
    pub eta0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub identifiability_margin: f64,
    pub eps: ErrorTerms,
    pub deltas: Option<Deltas>,
    pub penalty_ok: PenaltyConditions,
    pub bounds: Option<RecoveryBounds>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

impl DiagnosticsReport {
    pub fn structure(&self) -> Structure {
        Structure {
            alpha: self.alpha,
            beta: self.beta,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            eps: self.eps,
        }
    }

    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("r", self.r.to_string()),
            ("s", self.s.to_string()),
            ("c", self.c.to_string()),
            ("eta0", self.eta0.to_string()),
            ("lambda1", self.lambda1.to_string()),
            ("lambda2", self.lambda2.to_string()),
            ("rho", self.rho.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("gamma1", self.gamma1.to_string()),
            ("gamma2", self.gamma2.to_string()),
            (
                "identifiability_margin",
                self.identifiability_margin.to_string(),
            ),
            (
                "identifiable",
                (self.identifiability_margin < 1.0).to_string(),
            ),
            ("eps_2to2", self.eps.eps_2to2.to_string()),
            ("eps_inf", self.eps.eps_inf.to_string()),
            ("eps_inf_prime", self.eps.eps_inf_prime.to_string()),
            ("eps_star", self.eps.eps_star.to_string()),
            ("delta1", fmt_opt(self.deltas.map(|d| d.delta1))),
            ("delta2", fmt_opt(self.deltas.map(|d| d.delta2))),
            ("delta", fmt_opt(self.deltas.map(|d| d.delta))),
            ("penalty_ok_1", self.penalty_ok.identifiable.to_string()),
            ("penalty_ok_2", self.penalty_ok.lambda1_ok.to_string()),
            ("penalty_ok_3", self.penalty_ok.lambda2_ok.to_string()),
            ("bound_Y_vec1", fmt_opt(self.bounds.map(|b| b.y_vec1))),
            ("bound_X_nuclear", fmt_opt(self.bounds.map(|b| b.x_nuclear))),
        ]
    }

    /// One `key=value` per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn csv_header() -> String {
        // field names do not depend on the values
        let blank = DiagnosticsReport {
            r: 0,
            s: 0,
            c: 0.0,
            eta0: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            rho: 0.0,
            alpha: 0.0,
            beta: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            identifiability_margin: 0.0,
            eps: ErrorTerms::default(),
            deltas: None,
            penalty_ok: PenaltyConditions {
                identifiable: false,
                lambda1_ok: false,
                lambda2_ok: false,
            },
            bounds: None,
        };
        blank
            .fields()
            .iter()
            .map(|(k, _)| *k)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| v)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Evaluates every diagnostic for a ground-truth `(X0, Y0, E)` under `pair`.
pub fn diagnose(
    x0: &Matrix,
    y0: &Matrix,
    e: &Matrix,
    pair: &ProjectorPair,
    settings: &DiagnoseSettings,
) -> Result<DiagnosticsReport> {
    if y0.shape() != pair.outer_shape() {
        return Err(Error::shape(format!(
            "Y0 is {:?} but the pair maps into {:?}",
            y0.shape(),
            pair.outer_shape()
        )));
    }
    let (big_n, big_m) = pair.outer_shape();
    let grid = settings
        .rho_grid
        .clone()
        .unwrap_or_else(|| default_rho_grid(big_n, big_m));
    let margin = identifiability_margin(x0, y0, pair, &grid)?;
    let rho = settings.rho.unwrap_or(margin.rho);
    check_rho(rho)?;

    let spread = SupportSpread::of(y0);
    let coh = Coherence::of(x0, pair)?;
    let gamma = gamma_quantities(x0, pair)?;
    let eps = error_terms(e, x0, pair)?;
    let st = Structure {
        alpha: spread.alpha(rho),
        beta: coh.beta(rho),
        gamma1: gamma.gamma1,
        gamma2: gamma.gamma2,
        eps,
    };
    let inputs = BoundInputs {
        r: singular_spaces(x0)?.0.ncols(),
        s: SupportProjector::new(y0).support_size(),
        c: settings.c,
        rho,
        eta0: settings.eta0,
        lambda1: settings.lambda1,
        lambda2: settings.lambda2,
    };
    inputs.validate()?;
    let penalty_ok = penalty_conditions(&inputs, &st, pair);
    let deltas = delta_quantities(&inputs, &st).ok();
    let bounds = if penalty_ok.all() {
        Some(recovery_bounds(&inputs, &st, pair)?)
    } else {
        None
    };
    Ok(DiagnosticsReport {
        r: inputs.r,
        s: inputs.s,
        c: inputs.c,
        eta0: inputs.eta0,
        lambda1: inputs.lambda1,
        lambda2: inputs.lambda2,
        rho,
        alpha: st.alpha,
        beta: st.beta,
        gamma1: st.gamma1,
        gamma2: st.gamma2,
        identifiability_margin: margin.value,
        eps,
        deltas,
        penalty_ok,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolation::{projector_pair, PairKind};

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(&Matrix::zeros(3, 3), 1.0).unwrap(), 0.0);
        assert_eq!(alpha(&Matrix::identity(4, 4), 1.0).unwrap(), 1.0);
        assert_eq!(alpha(&m(2, 2, &[1.0, 1.0, 0.0, 0.0]), 1.0).unwrap(), 2.0);
        // one nonzero per column, two in the first row
        assert_eq!(alpha(&m(2, 2, &[1.0, 1.0, 0.0, 0.0]), 4.0).unwrap(), 4.0);
        assert!(alpha(&Matrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn beta_for_a_coordinate_rank_one() {
        let pair = projector_pair(PairKind::Identity, 2, 2).unwrap();
        let x0 = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((beta(&x0, &pair, 1.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((beta(&(x0 * 5.0), &pair, 1.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_identity_pair_is_uv() {
        let pair = projector_pair(PairKind::Identity, 3, 3).unwrap();
        let u = nalgebra::DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let v = nalgebra::DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let x0 = &u * v.transpose() * 2.5;
        let g = gamma_quantities(&x0, &pair).unwrap();
        let uv = &u * v.transpose();
        // singular vectors are determined up to a joint sign
        assert!((&g.gamma - &uv).amax() < 1e-12 || (&g.gamma + &uv).amax() < 1e-12);
        assert!((g.gamma2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_grid_is_centred() {
        let g = default_rho_grid(100, 400);
        assert_eq!(g.len(), 21);
        assert!((g[10] - 2.0).abs() < 1e-12);
        assert!((g[0] - 0.2).abs() < 1e-12);
        assert!((g[20] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn empty_grid_rejected() {
        let pair = projector_pair(PairKind::Identity, 2, 2).unwrap();
        let x0 = Matrix::identity(2, 2);
        assert!(identifiability_margin(&x0, &x0, &pair, &[]).is_err());
    }

    #[test]
    fn zero_sparse_part_is_identifiable() {
        let pair = projector_pair(PairKind::Single, 8, 8).unwrap();
        let x0 = Matrix::from_fn(4, 4, |i, j| (i + 2 * j) as f64);
        let margin =
            identifiability_margin(&x0, &Matrix::zeros(8, 8), &pair, &default_rho_grid(8, 8))
                .unwrap();
        assert_eq!(margin.value, 0.0);
        assert!(margin.identifiable());
    }

    #[test]
    fn zero_noise_gives_zero_error_terms() {
        let pair = projector_pair(PairKind::Single, 8, 8).unwrap();
        let x0 = Matrix::from_fn(4, 4, |i, j| ((i * 3 + j) % 4) as f64);
        let e = error_terms(&Matrix::zeros(8, 8), &x0, &pair).unwrap();
        assert_eq!(e, ErrorTerms::default());
    }

    fn structure(alpha: f64, beta: f64, gamma1: f64, gamma2: f64) -> Structure {
        Structure {
            alpha,
            beta,
            gamma1,
            gamma2,
            eps: ErrorTerms::default(),
        }
    }

    #[test]
    fn deltas_with_vanishing_terms() {
        let inputs = BoundInputs {
            r: 1,
            s: 1,
            c: 2.0,
            rho: 1.0,
            eta0: 1.0,
            lambda1: 0.7,
            lambda2: 0.3,
        };
        let st = structure(0.0, 0.0, 0.25, 1.5);
        let d = delta_quantities(&inputs, &st).unwrap();
        assert!((d.delta1 - 0.7 * 1.5).abs() < 1e-15);
        assert!((d.delta2 - (0.3 + 0.7 * 0.25)).abs() < 1e-15);
        assert!((d.delta - (0.7 * 1.5 * d.delta1 + 0.3 * d.delta2)).abs() < 1e-15);

        let doubled = delta_quantities(&BoundInputs { s: 2, ..inputs }, &st).unwrap();
        assert!((doubled.delta2 - 2.0 * d.delta2).abs() < 1e-15);
        assert!((doubled.delta - d.delta - 0.3 * d.delta2).abs() < 1e-15);
    }

    #[test]
    fn deltas_need_identifiability() {
        let inputs = BoundInputs {
            r: 1,
            s: 1,
            c: 2.0,
            rho: 1.0,
            eta0: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
        };
        assert!(matches!(
            delta_quantities(&inputs, &structure(2.0, 0.5, 0.1, 1.0)),
            Err(Error::NotIdentifiable(_))
        ));
    }

    #[test]
    fn conditions_fail_without_identifiability() {
        let pair = projector_pair(PairKind::Identity, 4, 4).unwrap();
        let inputs = BoundInputs {
            r: 1,
            s: 4,
            c: 1.5,
            rho: 1.0,
            eta0: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
        };
        let cond = penalty_conditions(&inputs, &structure(1.0, 1.0, 0.1, 1.0), &pair);
        assert!(!cond.identifiable && !cond.all());
        assert!(matches!(
            recovery_bounds(&inputs, &structure(1.0, 1.0, 0.1, 1.0), &pair),
            Err(Error::BoundNotApplicable(_))
        ));
    }

    #[test]
    fn noiseless_sparse_free_bound_is_delta_only() {
        let pair = projector_pair(PairKind::Identity, 4, 4).unwrap();
        let inputs = BoundInputs {
            r: 1,
            s: 0,
            c: 2.0,
            rho: 1.0,
            eta0: 1.0,
            lambda1: 0.5,
            lambda2: 1.0,
        };
        let st = structure(0.0, 0.4, 0.25, 1.0);
        let b = recovery_bounds(&inputs, &st, &pair).unwrap();
        let d = delta_quantities(&inputs, &st).unwrap();
        // (1 + 1/eta0) delta / (2 (1 - 1/c) lambda2)
        assert!((b.y_vec1 - 2.0 * d.delta / (2.0 * 0.5 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn admissible_penalties_satisfy_conditions() {
        let pair = projector_pair(PairKind::Single, 20, 20).unwrap();
        let st = Structure {
            alpha: 1.0,
            beta: 0.2,
            gamma1: 0.05,
            gamma2: 0.5,
            eps: ErrorTerms {
                eps_2to2: 3.0,
                eps_inf: 1.0,
                eps_inf_prime: 0.8,
                eps_star: 2.0,
            },
        };
        let (l1, l2) = admissible_penalties(1.5, &st, &pair, 0.01).unwrap();
        let inputs = BoundInputs {
            r: 1,
            s: 10,
            c: 1.5,
            rho: 1.0,
            eta0: 1.0,
            lambda1: l1,
            lambda2: l2,
        };
        assert!(penalty_conditions(&inputs, &st, &pair).all());
        let tight = BoundInputs {
            lambda1: l1 / 1.02,
            lambda2: l2 / 1.02,
            ..inputs
        };
        assert!(!penalty_conditions(&tight, &st, &pair).all());
    }

    #[test]
    fn report_serialises() {
        let pair = projector_pair(PairKind::Single, 8, 8).unwrap();
        let x0 = Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.1 * (i + j) as f64 });
        let mut y0 = Matrix::zeros(8, 8);
        y0[(2, 5)] = 3.0;
        let e = Matrix::from_fn(8, 8, |i, j| 0.01 * (((i * 5 + j * 3) % 7) as f64 - 3.0));
        let report = diagnose(&x0, &y0, &e, &pair, &DiagnoseSettings::new(1.0, 0.5)).unwrap();
        let kv = report.to_key_value();
        assert!(kv.lines().any(|l| l.starts_with("alpha=")));
        assert!(kv.lines().any(|l| l == "s=1"));
        let header = DiagnosticsReport::csv_header();
        assert_eq!(
            header.split(',').count(),
            report.csv_row().split(',').count()
        );
        assert_eq!(kv.lines().count(), header.split(',').count());
    }
}
