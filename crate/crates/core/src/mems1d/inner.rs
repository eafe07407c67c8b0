use super::coeffs::lambda1_closed;
use super::Mems1dError;
use crate::ode_core::{integrate, IntegratorConfig};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Inner1DSolution {
    pub eps: f64,
    pub lambda1: f64,
    pub y_grid: Vec<f64>,
    pub w0: Vec<f64>,
    pub w0_prime: Vec<f64>,
    /// Largest violation of the first integral along the computed nodes.
    pub first_integral_drift: f64,
    /// Numerical estimate of lim (w₀ − y + λ₁(1+ε²)^{3/2} log y).
    pub far_field_constant: f64,
}

/// First-integral residual, rearranged so that nothing cancels at small ε:
/// w'²/(s(s+1)) + λ₁/w − λ₁ with s = √(1+ε²w'²).
pub(crate) fn first_integral_residual(eps: f64, lambda1: f64, w: f64, wp: f64) -> f64 {
    let s = (1.0 + eps * eps * wp * wp).sqrt();
    wp * wp / (s * (s + 1.0)) + lambda1 / w - lambda1
}

/// Integrates the leading-order inner problem on [0, y_max] with λ₁ from the
/// closed form. The state is (w − y, w′) so that the slowly varying remainder
/// is resolved in absolute terms out to large y.
pub fn solve_inner_1d(eps: f64, y_max: f64) -> Result<Inner1DSolution, Mems1dError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Mems1dError::NonPositiveEps(eps));
    }
    if !(y_max >= 100.0 && y_max.is_finite()) {
        return Err(Mems1dError::Domain(format!("y_max must be at least 100, got {y_max}")));
    }
    let l1 = lambda1_closed(eps);
    let e2 = eps * eps;
    let rhs = move |y: f64, s: &[f64], ds: &mut [f64]| {
        let w = y + s[0];
        ds[0] = s[1] - 1.0;
        ds[1] = l1 * (1.0 + e2 * s[1] * s[1]).powf(1.5) / (w * w);
    };
    let cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-13, max_steps: 2_000_000, ..Default::default() }.dense();
    let tr = integrate(rhs, &[1.0, 0.0], (0.0, y_max), &cfg, &[])?;

    let mut y_grid = Vec::with_capacity(tr.len());
    let mut w0 = Vec::with_capacity(tr.len());
    let mut w0_prime = Vec::with_capacity(tr.len());
    let mut drift: f64 = 0.0;
    for (y, s) in tr.states() {
        let w = y + s[0];
        drift = drift.max(first_integral_residual(eps, l1, w, s[1]).abs());
        y_grid.push(y);
        w0.push(w);
        w0_prime.push(s[1]);
    }

    // R(y) = B + c₁ log y / y + c₂ / y, solved exactly on three abscissae.
    let slope = l1 * (1.0 + e2).powf(1.5);
    let ys = [0.25 * y_max, 0.5 * y_max, y_max];
    let mut m = Matrix3::zeros();
    let mut r = Vector3::zeros();
    for (i, &y) in ys.iter().enumerate() {
        let v = tr.eval(y).expect("dense output covers the span")[0];
        m[(i, 0)] = 1.0;
        m[(i, 1)] = y.ln() / y;
        m[(i, 2)] = 1.0 / y;
        r[i] = v + slope * y.ln();
    }
    let far_field_constant = m.lu().solve(&r).map(|c| c[0]).unwrap_or(f64::NAN);

    Ok(Inner1DSolution { eps, lambda1: l1, y_grid, w0, w0_prime, first_integral_drift: drift, far_field_constant })
}
