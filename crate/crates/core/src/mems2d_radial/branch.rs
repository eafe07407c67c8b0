use super::inner::{default_fit_window, solve_inner_2d, FarFieldFit, InnerOutcome};
use super::RadialError;
use crate::spline::CubicSpline;
use crate::LAMBDA0;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

/// Ã and φ̃ tabulated on a δ₀ grid, interpolated by natural cubic splines in
/// ln δ₀. The phase is unwrapped along the grid before interpolation.
#[derive(Clone, Debug)]
pub struct FarFieldTable {
    pub fits: Vec<FarFieldFit>,
    pub phi_unwrapped: Vec<f64>,
    amp: CubicSpline,
    phase: CubicSpline,
}

/// How far outside the tabulated range (in ln δ₀) evaluation still extrapolates.
const EDGE_SLACK: f64 = 1e-3;

impl FarFieldTable {
    pub fn from_fits(mut fits: Vec<FarFieldFit>) -> Result<Self, RadialError> {
        fits.sort_by(|a, b| a.delta0.total_cmp(&b.delta0));
        if fits.len() < 3 || fits[0].delta0 <= 0.0 || fits.windows(2).any(|w| !(w[1].delta0 > w[0].delta0)) {
            return Err(RadialError::Domain("far-field table needs at least 3 distinct positive delta0 values".into()));
        }
        let mut phi: Vec<f64> = Vec::with_capacity(fits.len());
        for f in &fits {
            let mut p = f.phi_tilde;
            if let Some(prev) = phi.last() {
                p += 2.0 * PI * ((prev - p) / (2.0 * PI)).round();
            }
            phi.push(p);
        }
        let x: Vec<f64> = fits.iter().map(|f| f.delta0.ln()).collect();
        let a: Vec<f64> = fits.iter().map(|f| f.a_tilde).collect();
        let amp = CubicSpline::natural(&x, &a).ok_or_else(|| RadialError::Domain("spline construction failed".into()))?;
        let phase = CubicSpline::natural(&x, &phi).ok_or_else(|| RadialError::Domain("spline construction failed".into()))?;
        Ok(FarFieldTable { fits, phi_unwrapped: phi, amp, phase })
    }

    /// Scalar inner fits on `n` log-spaced δ₀ in [lo, hi], computed in parallel.
    pub fn scalar(lo: f64, hi: f64, n: usize, rho_max: f64) -> Result<Self, RadialError> {
        let fits = log_grid(lo, hi, n)?
            .into_par_iter()
            .map(|d0| match solve_inner_2d(d0, rho_max)? {
                InnerOutcome::Global(_, f) => Ok(f),
                InnerOutcome::BlowUp(b) => Err(RadialError::BeyondDeadEnd { delta0: b.delta0 }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_fits(fits)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.fits[0].delta0, self.fits[self.fits.len() - 1].delta0)
    }

    /// (Ã, φ̃) at δ₀; φ̃ on the unwrapped branch.
    pub fn eval(&self, delta0: f64) -> Result<(f64, f64), RadialError> {
        let (lo, hi) = self.amp.domain();
        let x = delta0.ln();
        if !(x >= lo - EDGE_SLACK && x <= hi + EDGE_SLACK) {
            return Err(RadialError::OutOfTabulatedRange { delta0, lo: lo.exp(), hi: hi.exp() });
        }
        Ok((self.amp.eval(x), self.phase.eval(x)))
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, RadialError> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(RadialError::Domain(format!("invalid log grid [{lo}, {hi}] with {n} points")));
    }
    Ok((0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchPoint {
    pub delta: f64,
    pub abs_u0: f64,
    pub lambda: f64,
}

/// λ = λ₀ − δ(4/3)Ã sin(−√2 ln δ + φ̃).
pub fn branch_lambda(delta: f64, a_tilde: f64, phi_tilde: f64) -> f64 {
    LAMBDA0 - delta * 4.0 / 3.0 * a_tilde * (-SQRT_2 * delta.ln() + phi_tilde).sin()
}

/// Two-term upper branch with δ₀ = ε²/δ, refusing points past the dead end.
pub fn asymptotic_branch_2d(eps: f64, delta_grid: &[f64], table: &FarFieldTable, delta0_star: f64) -> Result<Vec<BranchPoint>, RadialError> {
    let mut out = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(RadialError::Domain(format!("delta must lie in (0, 1), got {delta}")));
        }
        let d0 = eps * eps / delta;
        if d0 > delta0_star * (1.0 + 1e-12) {
            return Err(RadialError::BeyondDeadEnd { delta0: d0 });
        }
        let (a, phi) = table.eval(d0)?;
        out.push(BranchPoint { delta, abs_u0: 1.0 - delta, lambda: branch_lambda(delta, a, phi) });
    }
    Ok(out)
}

/// Ã, φ̃ used for the dead-end formula, with where they came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeadEndCoefficients {
    pub delta0_star: f64,
    /// δ₀ at which Ã, φ̃ were fitted.
    pub delta0_fit: f64,
    pub a_tilde: f64,
    pub phi_tilde: f64,
    pub source: String,
}

impl DeadEndCoefficients {
    /// Parametric inner fit at δ₀* itself; the parametric problem stays regular there.
    pub fn parametric(delta0_star: f64) -> Result<Self, RadialError> {
        let sol = crate::mems2d_arclength::solve_parametric_inner(delta0_star, 1e16).map_err(|e| RadialError::Domain(e.to_string()))?;
        Ok(DeadEndCoefficients {
            delta0_star,
            delta0_fit: delta0_star,
            a_tilde: sol.fit.a_tilde,
            phi_tilde: sol.fit.phi_tilde,
            source: "parametric inner fit at delta0*".into(),
        })
    }

    /// Scalar inner fit at δ₀* − offset.
    pub fn scalar_proxy(delta0_star: f64, offset: f64) -> Result<Self, RadialError> {
        let d0 = delta0_star - offset;
        let rho_max = 1e16;
        match solve_inner_2d(d0, rho_max)? {
            InnerOutcome::Global(s, _) => {
                let f = s.fit(default_fit_window(rho_max))?;
                Ok(DeadEndCoefficients { delta0_star, delta0_fit: d0, a_tilde: f.a_tilde, phi_tilde: f.phi_tilde, source: format!("scalar inner fit at delta0* - {offset}") })
            }
            InnerOutcome::BlowUp(_) => Err(RadialError::BeyondDeadEnd { delta0: d0 }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeadEndPrediction {
    pub eps: f64,
    pub alpha_star_abs: f64,
    pub lambda_star: f64,
    pub delta0_star_used: f64,
    pub delta0_fit: f64,
    pub coefficient_source: String,
}

pub fn predict_dead_end(eps: f64, c: &DeadEndCoefficients) -> Result<DeadEndPrediction, RadialError> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(RadialError::Domain(format!("dead-end prediction needs 0 < eps <= 0.5, got {eps}")));
    }
    let delta = eps * eps / c.delta0_star;
    Ok(DeadEndPrediction {
        eps,
        alpha_star_abs: 1.0 - delta,
        lambda_star: branch_lambda(delta, c.a_tilde, c.phi_tilde),
        delta0_star_used: c.delta0_star,
        delta0_fit: c.delta0_fit,
        coefficient_source: c.source.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_fit(d0: f64, a: f64, phi: f64) -> FarFieldFit {
        FarFieldFit { delta0: d0, a_tilde: a, phi_tilde: phi, const_term: 0.0, extra: vec![], residual_norm: 0.0, window: (1.0, 2.0) }
    }

    #[test]
    fn phase_is_unwrapped_across_two_pi() {
        let fits: Vec<_> = (0..6).map(|i| fake_fit(1.0 + i as f64, 1.0, (5.5 + 0.4 * i as f64).rem_euclid(2.0 * PI))).collect();
        let t = FarFieldTable::from_fits(fits).unwrap();
        assert!(t.phi_unwrapped.windows(2).all(|w| (w[1] - w[0] - 0.4).abs() < 1e-12));
        let (_, p) = t.eval(2.5).unwrap();
        assert!(p > 5.5 && p < 7.9);
        assert!(t.eval(7.0).is_err());
    }

    #[test]
    fn branch_refuses_points_past_dead_end() {
        let fits: Vec<_> = (0..5).map(|i| fake_fit(0.1 * 2f64.powi(i), 1.0, 1.0)).collect();
        let t = FarFieldTable::from_fits(fits).unwrap();
        let eps = 0.1;
        assert!(matches!(asymptotic_branch_2d(eps, &[0.01 / 1.5], &t, 1.2), Err(RadialError::BeyondDeadEnd { .. })));
        let pts = asymptotic_branch_2d(eps, &[0.05, 0.02], &t, 1.2).unwrap();
        for p in pts {
            assert!((p.lambda - LAMBDA0).abs() <= p.delta * 4.0 / 3.0 + 1e-15);
        }
    }

    #[test]
    fn prediction_limits() {
        let c = DeadEndCoefficients { delta0_star: 18.0, delta0_fit: 18.0, a_tilde: 3.0, phi_tilde: 1.0, source: "test".into() };
        for eps in [0.4, 0.1, 0.01, 0.001] {
            let p = predict_dead_end(eps, &c).unwrap();
            let dev = (p.lambda_star - LAMBDA0).abs();
            assert!(dev <= eps * eps * 4.0 / 3.0 * 3.0 / 18.0 + 1e-16);
            assert!((p.alpha_star_abs - (1.0 - eps * eps / 18.0)).abs() < 1e-15);
        }
        assert!(predict_dead_end(0.6, &c).is_err());
    }
}
