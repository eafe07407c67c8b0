//! Radially symmetric 2D problem: angle-form shooting, the blow-up bounds,
//! the two-parameter inner problem and the dead-end point.

mod angle;
mod branch;
mod bvp;
mod inner;

pub use angle::{
    alpha_threshold, blowup_m, delta0_bar, integrate_angle_ivp, regime_split, sandwich_violations, verify_nonexistence_bounds, verify_rescaled_bounds, verify_rescaled_sample, AngleOutcome,
    AngleStop, AngleTrajectory, BlowUpReport, BoundCheck, BoundSample, BoundSampleSpec, BoundsReport, RescaledBoundsReport,
};
pub use branch::{asymptotic_branch_2d, branch_lambda, log_grid, predict_dead_end, BranchPoint, DeadEndCoefficients, DeadEndPrediction, FarFieldTable};
pub use bvp::{lambda_for_alpha, locate_dead_end_2d, solve_bvp_2d, sweep_bifurcation_2d, Bvp2dSolution, DeadEndNumeric, RadialProfile};
pub use inner::{default_fit_window, find_delta0_star, fit_far_field, inner_blows_up, solve_inner_2d, BlowUpSignal, FarFieldFit, InnerOutcome, ScalarInner};
pub(crate) use inner::{phase_a, FIT_SAMPLES, PHASE_A_END};

use crate::ode_core::{BisectError, IntegrationError, LsqError};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RadialError {
    #[error("{0}")]
    Domain(String),
    #[error("fit window [{rho_min:e}, {rho_max:e}] holds fewer than two oscillation periods")]
    FitWindowTooSmall { rho_min: f64, rho_max: f64 },
    #[error("delta0 = {delta0} is past the dead end")]
    BeyondDeadEnd { delta0: f64 },
    #[error("delta0 = {delta0} outside the tabulated range [{lo}, {hi}]")]
    OutOfTabulatedRange { delta0: f64, lo: f64, hi: f64 },
    #[error("no boundary-value solution found at alpha = {alpha}")]
    NoConvergence { alpha: f64 },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Lsq(#[from] LsqError),
    #[error(transparent)]
    Bisect(#[from] BisectError),
}
