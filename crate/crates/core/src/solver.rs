//! Proximal-gradient solvers for
//!
//! ```text
//! min_{X, Y}  0.5 ||Z - P X Q^T - Y||_F^2 + lambda1 ||X||_* + lambda2 ||Y||_1
//! ```
//!
//! The SVD in every iteration acts on the `n x m` core `X`, never on the
//! `N x M` observation.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::interpolation::ProjectorPair;
use crate::linalg::{ensure_finite, norm, Matrix, NormKind};
use crate::operators::{shrink, svt_with_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// Step `1 / L` with `L` from [`lipschitz_bound`].
    FixedLipschitz,
    /// Start at a quarter of the bound and double until the quadratic upper
    /// model holds. `L` never decreases between iterations.
    Backtracking,
}

/// Where the accelerated variant evaluates the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientPoint {
    /// At the extrapolated point, as in FISTA.
    Extrapolated,
    /// At the current iterate while stepping from the extrapolated point.
    /// Kept for comparison only; it carries no acceleration guarantee and
    /// always uses the fixed step.
    Current,
}

#[derive(Debug, Clone)]
pub struct SolveConfig<'a> {
    pub z: &'a Matrix,
    pub pair: &'a ProjectorPair,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step_mode: StepMode,
    pub accelerate: bool,
    pub gradient_point: GradientPoint,
}

impl<'a> SolveConfig<'a> {
    pub fn new(z: &'a Matrix, pair: &'a ProjectorPair, lambda1: f64, lambda2: f64) -> Self {
        SolveConfig {
            z,
            pair,
            lambda1,
            lambda2,
            max_iters: 1000,
            rel_tol: 1e-7,
            step_mode: StepMode::FixedLipschitz,
            accelerate: true,
            gradient_point: GradientPoint::Extrapolated,
        }
    }

    pub fn max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn accelerate(mut self, on: bool) -> Self {
        self.accelerate = on;
        self
    }

    pub fn step_mode(mut self, mode: StepMode) -> Self {
        self.step_mode = mode;
        self
    }

    pub fn gradient_point(mut self, point: GradientPoint) -> Self {
        self.gradient_point = point;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::param(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        if self.z.shape() != self.pair.outer_shape() {
            return Err(Error::shape(format!(
                "Z is {:?} but the pair maps into {:?}",
                self.z.shape(),
                self.pair.outer_shape()
            )));
        }
        ensure_finite(self.z, "Z")
    }

    fn check_point(&self, x: &Matrix, y: &Matrix) -> Result<()> {
        if x.shape() != self.pair.inner_shape() {
            return Err(Error::shape(format!(
                "X is {:?}, expected {:?}",
                x.shape(),
                self.pair.inner_shape()
            )));
        }
        if y.shape() != self.z.shape() {
            return Err(Error::shape(format!(
                "Y is {:?}, expected {:?}",
                y.shape(),
                self.z.shape()
            )));
        }
        Ok(())
    }

    /// `P X Q^T + Y - Z`
    fn residual(&self, x: &Matrix, y: &Matrix) -> Matrix {
        self.pair.lift(x) + y - self.z
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_hat: Matrix,
    pub y_hat: Matrix,
    /// `P X^ Q^T + Y^`
    pub theta_hat: Matrix,
    /// Objective at the starting point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub wall_time: Duration,
    pub converged: bool,
    /// Step parameter `L` in force at the last iteration.
    pub final_lipschitz: f64,
    /// Shape of the matrices handed to the SVD.
    pub svd_shape: (usize, usize),
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds the initial value")
    }
}

fn half_sq(m: &Matrix) -> f64 {
    0.5 * m.norm_squared()
}

/// `0.5 ||Z - P X Q^T - Y||_F^2 + lambda1 ||X||_* + lambda2 ||Y||_1`
pub fn objective(x: &Matrix, y: &Matrix, config: &SolveConfig) -> Result<f64> {
    config.check_point(x, y)?;
    let r = config.residual(x, y);
    Ok(half_sq(&r)
        + config.lambda1 * norm(x, NormKind::Nuclear)?
        + config.lambda2 * norm(y, NormKind::Vec1)?)
}

/// Gradients `(P^T R Q, R)` of the smooth loss, with `R = P X Q^T + Y - Z`.
pub fn gradients(x: &Matrix, y: &Matrix, config: &SolveConfig) -> Result<(Matrix, Matrix)> {
    config.check_point(x, y)?;
    let r = config.residual(x, y);
    Ok((config.pair.pull(&r), r))
}

/// `sigma_max(P)^2 sigma_max(Q)^2 + 1`, the largest eigenvalue of the joint
/// Hessian `[A I]^T [A I]` with `A = Q (x) P`.
pub fn lipschitz_bound(pair: &ProjectorPair) -> f64 {
    let (_, p) = pair.p_sigma();
    let (_, q) = pair.q_sigma();
    p * p * q * q + 1.0
}

/// Noise-calibrated penalties `(sqrt(2N) sigma, sqrt(2) sigma)`.
pub fn default_penalties(big_n: usize, sigma: f64) -> Result<(f64, f64)> {
    if big_n == 0 {
        return Err(Error::param("N must be at least 1"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    Ok(((2.0 * big_n as f64).sqrt() * sigma, 2f64.sqrt() * sigma))
}

struct Candidate {
    x: Matrix,
    y: Matrix,
    x_nuclear: f64,
}

fn prox_step(
    config: &SolveConfig,
    fx: &Matrix,
    fy: &Matrix,
    gx: &Matrix,
    gy: &Matrix,
    l: f64,
) -> Result<Candidate> {
    let step = 1.0 / l;
    let (x, x_nuclear) = svt_with_norm(&(fx - gx * step), config.lambda1 * step)?;
    let tau = config.lambda2 * step;
    let y = fy.zip_map(gy, |a, g| shrink(a - step * g, tau));
    Ok(Candidate { x, y, x_nuclear })
}

/// One plain proximal-gradient step from `(x, y)` with step `1 / L`,
/// `L` = [`lipschitz_bound`].
pub fn prox_gradient_step(
    x: &Matrix,
    y: &Matrix,
    config: &SolveConfig,
) -> Result<(Matrix, Matrix)> {
    let (gx, gy) = gradients(x, y, config)?;
    let c = prox_step(config, x, y, &gx, &gy, lipschitz_bound(config.pair))?;
    Ok((c.x, c.y))
}

fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| u * v).sum()
}

/// Runs proximal gradient, accelerated when `config.accelerate` is set.
///
/// Starts from `X = 0, Y = 0`. Stops once both the relative objective change
/// `|f_k - f_{k-1}| / (1 + |f_k|)` and the relative iterate change fall below
/// `rel_tol`, or after `max_iters` iterations. With acceleration, a plain
/// proximal-gradient step from the final iterate must also move it by less
/// than `rel_tol` relative to its size.
pub fn solve(config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    let start = Instant::now();
    let pair = config.pair;
    let (n, m) = pair.inner_shape();
    let (big_n, big_m) = pair.outer_shape();
    let l_bound = lipschitz_bound(pair);
    let mut l = match config.step_mode {
        StepMode::FixedLipschitz => l_bound,
        StepMode::Backtracking => l_bound / 4.0,
    };
    let current_gradient = config.accelerate && config.gradient_point == GradientPoint::Current;
    if current_gradient {
        l = l_bound;
    }

    let mut x = Matrix::zeros(n, m);
    let mut y = Matrix::zeros(big_n, big_m);
    let mut x_prev = x.clone();
    let mut y_prev = y.clone();
    // residuals P X Q^T + Y - Z at the current and previous iterates
    let mut r = -config.z.clone();
    let mut r_prev = r.clone();
    let (mut t_prev, mut t) = (1.0f64, 1.0f64);

    let mut f_old = half_sq(&r);
    let mut trace = vec![f_old];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iters {
        iterations += 1;
        let beta = if config.accelerate {
            (t_prev - 1.0) / t
        } else {
            0.0
        };
        let (fx, fy, fr) = if beta != 0.0 {
            (
                &x + (&x - &x_prev) * beta,
                &y + (&y - &y_prev) * beta,
                &r + (&r - &r_prev) * beta,
            )
        } else {
            (x.clone(), y.clone(), r.clone())
        };
        let g_res = if current_gradient { &r } else { &fr };
        let gx = pair.pull(g_res);
        let smooth_at_f = half_sq(&fr);

        let (cand, r_new) = loop {
            let cand = prox_step(config, &fx, &fy, &gx, g_res, l)?;
            let r_new = config.residual(&cand.x, &cand.y);
            if config.step_mode == StepMode::FixedLipschitz || current_gradient || l >= l_bound {
                break (cand, r_new);
            }
            let dx = &cand.x - &fx;
            let dy = &cand.y - &fy;
            let model = smooth_at_f
                + inner(&gx, &dx)
                + inner(g_res, &dy)
                + 0.5 * l * (dx.norm_squared() + dy.norm_squared());
            if half_sq(&r_new) <= model + 1e-12 * (1.0 + model.abs()) {
                break (cand, r_new);
            }
            l = (2.0 * l).min(l_bound);
        };

        let f_new = half_sq(&r_new)
            + config.lambda1 * cand.x_nuclear
            + config.lambda2 * norm(&cand.y, NormKind::Vec1)?;
        if !f_new.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite objective at iteration {iterations} (trace: {} values)",
                trace.len()
            )));
        }
        trace.push(f_new);

        let step_sq = (&cand.x - &x).norm_squared() + (&cand.y - &y).norm_squared();
        let size_sq = cand.x.norm_squared() + cand.y.norm_squared();
        x_prev = std::mem::replace(&mut x, cand.x);
        y_prev = std::mem::replace(&mut y, cand.y);
        r_prev = std::mem::replace(&mut r, r_new);
        if config.accelerate {
            t_prev = t;
            t = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        }

        let obj_change = (f_new - f_old).abs() / (1.0 + f_new.abs());
        let iter_change = step_sq.sqrt() / (1.0 + size_sq.sqrt());
        f_old = f_new;
        if obj_change < config.rel_tol && iter_change < config.rel_tol {
            // momentum can make consecutive iterates close without either
            // being stationary, so confirm with one plain step
            let fixed = !config.accelerate || {
                let gx = pair.pull(&r);
                let plain = prox_step(config, &x, &y, &gx, &r, l_bound)?;
                let moved =
                    ((&plain.x - &x).norm_squared() + (&plain.y - &y).norm_squared()).sqrt();
                moved < config.rel_tol * (1.0 + (x.norm_squared() + y.norm_squared()).sqrt())
            };
            if fixed {
                converged = true;
                break;
            }
        }
    }

    let theta_hat = pair.lift(&x) + &y;
    Ok(SolveResult {
        x_hat: x,
        y_hat: y,
        theta_hat,
        objective_trace: trace,
        iterations,
        wall_time: start.elapsed(),
        converged,
        final_lipschitz: l,
        svd_shape: (n, m),
    })
}
