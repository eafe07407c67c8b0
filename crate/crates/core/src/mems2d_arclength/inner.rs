use super::ArclengthError;
use crate::mems2d_radial::{default_fit_window, fit_far_field, log_grid, phase_a, solve_inner_2d, FarFieldFit, FarFieldTable, InnerOutcome, FIT_SAMPLES, PHASE_A_END};
use crate::ode_core::{integrate, linear_lsq, IntegratorConfig, Trajectory};
use crate::LAMBDA0;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// Parametric inner solution (R₀(σ), Z₀(σ)) in its own arc parameter σ.
/// Beyond the near field the remainders P = R₀ − σ, Q = Z₀ − σ^{2/3} are
/// carried in t = ln σ.
pub struct ParametricInnerSolution {
    pub delta0: f64,
    pub near_sigma: Vec<f64>,
    pub near_r: Vec<f64>,
    pub near_z: Vec<f64>,
    /// (P, dP/dt, Q, dQ/dt) in t = ln σ; for δ₀ = 0 only (Q, dQ/dt).
    pub far: Trajectory,
    pub fit: FarFieldFit,
    /// Coefficient of σ^{1/3} in R₀ − σ.
    pub r0_linear_deficit: f64,
    pub sigma_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeficitFit {
    pub coefficient: f64,
    pub constant: f64,
    pub residual_norm: f64,
}

impl ParametricInnerSolution {
    fn q_index(&self) -> usize {
        if self.delta0 == 0.0 {
            0
        } else {
            2
        }
    }

    /// Z₀ − σ^{2/3} against {sin ωt, cos ωt, 1, σ^{-1/3}}.
    pub fn fit_z(&self, window: (f64, f64)) -> Result<FarFieldFit, ArclengthError> {
        let q = self.q_index();
        let decay = |t: f64| (-t / 3.0).exp();
        Ok(fit_far_field(self.delta0, window, FIT_SAMPLES, |t| self.far.eval(t).map(|y| y[q]), &[&decay])?)
    }

    /// R₀ − σ against {σ^{1/3}, 1}.
    pub fn fit_r_deficit(&self, window: (f64, f64)) -> Result<DeficitFit, ArclengthError> {
        if self.delta0 == 0.0 {
            return Ok(DeficitFit { coefficient: 0.0, constant: 0.0, residual_norm: 0.0 });
        }
        let (t0, t1) = (window.0.ln(), window.1.ln());
        let n = 400;
        let ts: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
        let mut obs = Vec::with_capacity(n);
        for &t in &ts {
            obs.push(self.far.eval(t).ok_or_else(|| ArclengthError::Domain("deficit window outside the computed range".into()))?[0]);
        }
        let basis = DMatrix::from_fn(n, 2, |i, j| if j == 0 { (ts[i] / 3.0).exp() } else { 1.0 });
        let f = linear_lsq(&basis, &obs)?;
        Ok(DeficitFit { coefficient: f.coefficients[0], constant: f.coefficients[1], residual_norm: f.residual_norm })
    }

    /// (R₀, Z₀) at σ in the far-field range.
    pub fn far_state(&self, sigma: f64) -> Option<(f64, f64)> {
        let y = self.far.eval(sigma.ln())?;
        if self.delta0 == 0.0 {
            Some((sigma, sigma.powf(2.0 / 3.0) + y[0]))
        } else {
            Some((sigma + y[0], sigma.powf(2.0 / 3.0) + y[2]))
        }
    }
}

fn far_rhs(d0: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |t, yy, dy| {
        let (p, pd, q, qd) = (yy[0], yy[1], yy[2], yy[3]);
        let sg = t.exp();
        let s23 = sg.powf(2.0 / 3.0);
        let pp = pd / sg;
        let y = p / sg;
        let x = q / s23;
        let slope = 2.0 / 3.0 / sg.cbrt() + qd / sg;
        let r = sg * (1.0 + y);
        let z = s23 * (1.0 + x);
        dy[0] = pd;
        dy[1] = d0 * sg * sg * (-LAMBDA0 * slope / (z * z) + slope * slope / r) + pd;
        dy[2] = qd;
        dy[3] = LAMBDA0 * s23 * (pp - x * (2.0 + x)) / ((1.0 + x) * (1.0 + x)) - 2.0 / 3.0 * s23 * (pp - y) / (1.0 + y) + qd * (y - pp) / (1.0 + y);
    }
}

pub fn solve_parametric_inner(delta0: f64, rho_max: f64) -> Result<ParametricInnerSolution, ArclengthError> {
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(ArclengthError::Domain(format!("delta0 must be nonnegative, got {delta0}")));
    }
    if !(rho_max >= 1e6 && rho_max.is_finite()) {
        return Err(ArclengthError::Domain(format!("rho_max must be at least 1e6, got {rho_max}")));
    }
    let window = default_fit_window(rho_max);
    if delta0 == 0.0 {
        // R₀ = σ; Z₀ is the scalar inner profile.
        return match solve_inner_2d(0.0, rho_max)? {
            InnerOutcome::Global(s, _) => {
                let mut sol = ParametricInnerSolution {
                    delta0,
                    near_sigma: s.near_rho.clone(),
                    near_r: s.near_rho.clone(),
                    near_z: s.near_w.clone(),
                    far: s.far,
                    fit: FarFieldFit { delta0, a_tilde: 0.0, phi_tilde: 0.0, const_term: 0.0, extra: vec![], residual_norm: 0.0, window },
                    r0_linear_deficit: 0.0,
                    sigma_max: rho_max,
                };
                sol.fit = sol.fit_z(window)?;
                Ok(sol)
            }
            InnerOutcome::BlowUp(_) => Err(ArclengthError::Domain("inner problem at delta0 = 0 blew up".into())),
        };
    }
    let a = phase_a(delta0, PHASE_A_END, false)?;
    let h = a.end.map_err(|_| ArclengthError::Domain("near field stopped early".into()))?;
    let sq = delta0.sqrt();
    let s = h.sigma;
    let s23 = s.powf(2.0 / 3.0);
    let y0 = [h.rho - s, s * (h.theta.cos() - 1.0), h.w - s23, s * h.theta.sin() / sq - 2.0 / 3.0 * s23];
    let cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-13, max_steps: 2_000_000, ..Default::default() }.dense();
    let far = integrate(far_rhs(delta0), &y0, (s.ln(), rho_max.ln()), &cfg, &[])?;
    let mut sol = ParametricInnerSolution {
        delta0,
        near_sigma: a.sigma,
        near_r: a.rho,
        near_z: a.w,
        far,
        fit: FarFieldFit { delta0, a_tilde: 0.0, phi_tilde: 0.0, const_term: 0.0, extra: vec![], residual_norm: 0.0, window },
        r0_linear_deficit: 0.0,
        sigma_max: rho_max,
    };
    sol.fit = sol.fit_z(window)?;
    sol.r0_linear_deficit = sol.fit_r_deficit(window)?.coefficient;
    Ok(sol)
}

/// (Ã₁, φ̃₁) on `n` log-spaced δ₀ in [lo, hi], computed in parallel.
pub fn tabulate_parametric(lo: f64, hi: f64, n: usize, rho_max: f64) -> Result<FarFieldTable, ArclengthError> {
    let fits = log_grid(lo, hi, n)?
        .into_par_iter()
        .map(|d0| solve_parametric_inner(d0, rho_max).map(|s| s.fit))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FarFieldTable::from_fits(fits)?)
}
