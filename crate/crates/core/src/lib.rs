//! Numerics for the electrostatic MEMS model with prescribed mean curvature:
//! closed-form asymptotics, inner problems, shooting solvers and continuation
//! for the 1D, radially symmetric 2D and arc-length formulations.

pub mod curve;
pub mod mems1d;
pub mod mems2d_arclength;
pub mod mems2d_radial;
pub mod ode_core;
pub mod params;
pub mod spline;

pub use curve::{BifurcationCurve, CurvePoint, TermCause};
pub use params::{ParamError, ProblemParams};

/// ω in the log-periodic far field sin(ω log ρ + φ).
pub const OMEGA: f64 = 2.0 * std::f64::consts::SQRT_2 / 3.0;
/// Leading-order load λ₀ of the 2D problem.
pub const LAMBDA0: f64 = 4.0 / 9.0;
