//! One-dimensional problem: asymptotic coefficients of the maximal branch,
//! the leading-order inner problem and a shooting solver for the full BVP.

mod bvp;
mod coeffs;
mod inner;

pub use bvp::{solve_bvp_1d, sweep_bifurcation_1d, Bvp1dSolution, Profile1D};
pub use coeffs::{appendix_a_asymptotic, appendix_a_integral, appendix_a_integrand, coeffs_1d, lambda1_closed, lambda_three_term, AsymCoeffs1D, LambdaExpansion};
pub use inner::{solve_inner_1d, Inner1DSolution};

use crate::ode_core::{IntegrationError, NewtonError};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Mems1dError {
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("{0}")]
    Domain(String),
    #[error("shooting did not converge for alpha = {alpha}")]
    NoConvergence { alpha: f64, trace: Vec<f64> },
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Newton(#[from] NewtonError),
}
