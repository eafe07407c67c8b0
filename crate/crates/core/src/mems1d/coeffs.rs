use super::Mems1dError;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymCoeffs1D {
    pub eps: f64,
    pub lambda1: f64,
    pub lambda32: f64,
    pub lambda2: f64,
    pub b1: f64,
    pub a_half: f64,
    pub a_fivequarters: f64,
}

/// λ₁(ε) = (√(1+ε²) − 1)/(ε²√(1+ε²)), written without the cancellation at
/// small ε. Also valid at ε = 0 (value 1/2).
pub fn lambda1_closed(eps: f64) -> f64 {
    let s = (1.0 + eps * eps).sqrt();
    1.0 / ((s + 1.0) * s)
}

pub fn coeffs_1d(eps: f64) -> Result<AsymCoeffs1D, Mems1dError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Mems1dError::NonPositiveEps(eps));
    }
    let e2 = eps * eps;
    let lambda1 = lambda1_closed(eps);
    let p32 = (1.0 + e2).powf(1.5);
    let lambda32 = -lambda1;
    let b1 = -lambda1 * p32 * ((4.0 - 2.0 * e2 * lambda1).ln() - 1.0 / (1.0 + e2));
    let lambda2 = -b1 / p32;
    let a_half = -lambda1 * p32;
    let a_fivequarters = -(1.0 + e2).sqrt() * (a_half * (e2 - 2.0) * lambda1 + (1.0 + e2) * lambda32);
    Ok(AsymCoeffs1D { eps, lambda1, lambda32, lambda2, b1, a_half, a_fivequarters })
}

/// One-, two- and three-term truncations of λ(δ) on the maximal branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaExpansion {
    pub one_term: f64,
    pub two_term: f64,
    pub three_term: f64,
}

pub fn lambda_three_term(eps: f64, delta: f64) -> Result<LambdaExpansion, Mems1dError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Mems1dError::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let c = coeffs_1d(eps)?;
    let one_term = delta * c.lambda1;
    let two_term = one_term + delta * delta * delta.ln() * c.lambda32;
    let three_term = two_term + delta * delta * c.lambda2;
    Ok(LambdaExpansion { one_term, two_term, three_term })
}

fn a_of(eps: f64) -> f64 {
    eps * eps * lambda1_closed(eps)
}

/// Integrand of the quadrature y√λ₁ = ∫₁^{w} … dz for the inner profile.
pub fn appendix_a_integrand(eps: f64, z: f64) -> f64 {
    let a = a_of(eps);
    (a + (1.0 - a) * z) / ((2.0 - a) * z * z - 2.0 * (1.0 - a) * z - a).sqrt()
}

/// Closed form of ∫₁^{w_upper} appendix_a_integrand dz via inverse cosh.
pub fn appendix_a_integral(eps: f64, w_upper: f64) -> Result<f64, Mems1dError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Mems1dError::NonPositiveEps(eps));
    }
    if !(w_upper >= 1.0) {
        return Err(Mems1dError::Domain(format!("radicand is negative on [w_upper, 1] for w_upper = {w_upper}")));
    }
    let a = a_of(eps);
    let g = 2.0 - a;
    let x = g * w_upper - (1.0 - a);
    // X − 1 = (2−a)(w−1), kept exact to avoid losing digits near w = 1.
    let xm1 = g * (w_upper - 1.0);
    let root = (xm1 * (x + 1.0)).sqrt();
    let ach = (xm1 + root).ln_1p();
    Ok(a / g.sqrt() * ach + (1.0 - a) / g.powf(1.5) * (root + (1.0 - a) * ach))
}

/// Large-w expansion of the Appendix A integral, accurate to O(1/w).
pub fn appendix_a_asymptotic(eps: f64, w_upper: f64) -> f64 {
    let a = a_of(eps);
    let g = 2.0 - a;
    (1.0 - a) * w_upper / g.sqrt() + w_upper.ln() / g.powf(1.5) + ((4.0 - 2.0 * a).ln() - (1.0 - a).powi(2)) / g.powf(1.5)
}
