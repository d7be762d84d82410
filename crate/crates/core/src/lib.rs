//! Projected robust PCA.
//!
//! Recovers `Theta = P X0 Q^T + Y0` from a noisy observation
//! `Z = Theta + E`, where `X0` is a small low-rank core, `(P, Q)` are tall
//! full-column-rank factors (typically interpolation matrices that make the
//! low-rank part smooth) and `Y0` is sparse.

// `!(x > 0.0)` deliberately rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod image;
pub mod interpolation;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod projectors;
pub mod rng;
pub mod simulation;
pub mod solver;

pub use diagnostics::{
    diagnose, BoundInputs, DiagnoseSettings, DiagnosticsReport, ErrorTerms, PenaltyConditions,
    RecoveryBounds, Structure,
};
pub use error::{Error, Result};
pub use image::{
    add_noise, load_pgm, recover, save_pgm, GrayImage, RecoverMetrics, RecoverOptions,
};
pub use interpolation::{
    count_jumps, decompose_piecewise, interpolation_matrix, projector_pair, smoothness_residual,
    Axis, PairKind, PiecewiseDecomposition, ProjectorPair,
};
pub use linalg::{norm, Matrix, NormKind, SvdFactors};
pub use operators::{soft_threshold, svt};
pub use projectors::{LowrankProjector, Projector, SmoothLowrankProjector, SupportProjector};
pub use simulation::{generate_instance, rmse, run_grid, GridRow, Instance, SimulationSpec};
pub use solver::{
    default_penalties, gradients, lipschitz_bound, objective, solve, GradientPoint, SolveConfig,
    SolveResult, StepMode,
};
