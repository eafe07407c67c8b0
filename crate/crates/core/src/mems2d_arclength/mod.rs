//! Arc-length formulation of the radial 2D problem: two-parameter shooting
//! with sensitivities, branch continuation through the dead end, the
//! parametric inner problem and the outer expansion.

mod inner;
mod outer;
mod shoot;
mod trace;

pub use inner::{solve_parametric_inner, tabulate_parametric, DeficitFit, ParametricInnerSolution};
pub use outer::{asymptotic_branch_parametric, outer_solution_appc, OuterCoeffs2D, OuterPoint, APPC_RESIDUAL_TOL};
pub use shoot::{shoot_arclength, shoot_eval, ParametricProfile, ShootEval};
pub use trace::{trace_branch, TraceOptions, TracePoint, TraceResult};

use crate::mems2d_radial::RadialError;
use crate::ode_core::{IntegrationError, LsqError, NewtonError};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ArclengthError {
    #[error("{0}")]
    Domain(String),
    #[error("shooting trajectory hit r = 0 or z = -1 (lambda = {lambda}, ell = {ell})")]
    Singular { lambda: f64, ell: f64 },
    #[error("no solution found at alpha = {alpha}")]
    NoConvergence { alpha: f64 },
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Lsq(#[from] LsqError),
    #[error(transparent)]
    Newton(#[from] NewtonError),
}
