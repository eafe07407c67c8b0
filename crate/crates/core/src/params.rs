use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ParamError {
    #[error("eps must be nonnegative and finite, got {0}")]
    Eps(f64),
    #[error("lambda must be nonnegative and finite, got {0}")]
    Lambda(f64),
    #[error("alpha = u(0) must lie in (-1, 0], got {0}")]
    Alpha(f64),
}

/// (ε, λ, α) with the derived δ = 1 + α and δ₀ = ε²/δ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub eps: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
    pub delta0: f64,
}

impl ProblemParams {
    pub fn new(eps: f64, lambda: f64, alpha: f64) -> Result<Self, ParamError> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(ParamError::Eps(eps));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ParamError::Lambda(lambda));
        }
        if !(alpha > -1.0 && alpha <= 0.0) {
            return Err(ParamError::Alpha(alpha));
        }
        let delta = 1.0 + alpha;
        Ok(ProblemParams { eps, lambda, alpha, delta, delta0: eps * eps / delta })
    }

    pub fn abs_u0(&self) -> f64 {
        -self.alpha
    }
}
