use super::RadialError;
use crate::ode_core::{bisect, integrate, linear_lsq, Direction, EventSpec, IntegratorConfig, Trajectory};
use crate::{LAMBDA0, OMEGA};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

/// Abscissa at which the near-axis series hands over to the integrator.
const SERIES_START: f64 = 1e-4;
/// End of the arc-length phase; beyond it the remainder form takes over.
pub(crate) const PHASE_A_END: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FarFieldFit {
    pub delta0: f64,
    pub a_tilde: f64,
    /// In [0, 2π).
    pub phi_tilde: f64,
    pub const_term: f64,
    /// Coefficients of any basis functions beyond {sin, cos, 1}.
    pub extra: Vec<f64>,
    pub residual_norm: f64,
    pub window: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowUpSignal {
    pub delta0: f64,
    pub rho: f64,
    pub w: f64,
}

/// State where the near-field integration stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Handover {
    pub sigma: f64,
    pub rho: f64,
    pub w: f64,
    pub theta: f64,
    /// ρ·w′
    pub rho_wp: f64,
}

pub(crate) struct PhaseA {
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    pub max_theta: f64,
    pub end: Result<Handover, BlowUpSignal>,
}

fn series(delta0: f64, rho: f64) -> (f64, f64) {
    let a = LAMBDA0 / 4.0;
    let b = delta0 * a * a * a - LAMBDA0 * a / 8.0;
    let r2 = rho * rho;
    (1.0 + a * r2 + b * r2 * r2, 2.0 * a * rho + 4.0 * b * r2 * rho)
}

/// Near field of (1/ρ)(ρw′/√(1+δ₀w′²))′ = λ₀/w², w(0) = 1, w′(0) = 0. For
/// δ₀ > 0 the curve is followed in arc length of (ρ, √δ₀ w) with inclination θ,
/// which stays regular through a vertical tangent.
pub(crate) fn phase_a(delta0: f64, sigma_end: f64, stop_at_vertical: bool) -> Result<PhaseA, RadialError> {
    let s0 = SERIES_START;
    let (w0, wp0) = series(delta0, s0);
    let cfg = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-15, max_steps: 2_000_000, ..Default::default() };
    if delta0 == 0.0 {
        let rhs = |r: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = LAMBDA0 / (y[0] * y[0]) - y[1] / r;
        };
        let tr = integrate(rhs, &[w0, wp0], (s0, sigma_end), &cfg, &[])?;
        let y = tr.last();
        let end = Handover { sigma: f64::NAN, rho: sigma_end, w: y[0], theta: f64::NAN, rho_wp: sigma_end * y[1] };
        return Ok(PhaseA { sigma: tr.t.clone(), rho: tr.t.clone(), w: tr.component(0), max_theta: 0.0, end: Ok(end) });
    }
    let sq = delta0.sqrt();
    let rhs = move |_s: f64, y: &[f64], dy: &mut [f64]| {
        let (st, ct) = y[2].sin_cos();
        dy[0] = ct;
        dy[1] = st / sq;
        dy[2] = sq * LAMBDA0 / (y[1] * y[1]) - st / y[0];
    };
    let events = [
        EventSpec::new(move |_s, y: &[f64]| sq * LAMBDA0 / (y[1] * y[1]) - y[2].sin() / y[0], Direction::Falling, false),
        EventSpec::new(|_s, y: &[f64]| y[2] - FRAC_PI_2, Direction::Rising, stop_at_vertical),
    ];
    let tr = integrate(rhs, &[s0, w0, (sq * wp0).atan()], (s0, sigma_end), &cfg, &events)?;
    // Only the first inclination maximum decides blow-up; later ones are smaller.
    let mut max_theta = tr.event(0).map_or(tr.last()[2], |e| e.y[2]);
    if tr.events.iter().any(|e| e.index == 1) {
        max_theta = max_theta.max(FRAC_PI_2);
    }
    let y = tr.last();
    let end = if tr.terminated_by == Some(1) {
        Err(BlowUpSignal { delta0, rho: y[0], w: y[1] })
    } else {
        Ok(Handover { sigma: tr.last_t(), rho: y[0], w: y[1], theta: y[2], rho_wp: y[0] * y[2].tan() / sq })
    };
    Ok(PhaseA { sigma: tr.t.clone(), rho: tr.component(0), w: tr.component(1), max_theta, end })
}

/// True when the inner solution develops a vertical tangent. Decided on the
/// first inclination maximum rather than on step nodes so the switch point is
/// resolved to roundoff.
pub fn inner_blows_up(delta0: f64) -> Result<bool, RadialError> {
    let a = phase_a(delta0, 40.0, true)?;
    Ok(a.end.is_err() || a.max_theta >= FRAC_PI_2)
}

/// Global inner solution: near field in (ρ, w), far field as v = w − ρ^{2/3}
/// in t = ln ρ.
pub struct ScalarInner {
    pub delta0: f64,
    pub near_rho: Vec<f64>,
    pub near_w: Vec<f64>,
    pub far: Trajectory,
    pub rho_max: f64,
}

pub enum InnerOutcome {
    Global(Box<ScalarInner>, FarFieldFit),
    BlowUp(BlowUpSignal),
}

impl ScalarInner {
    /// w(ρ) − ρ^{2/3} for ρ in the far-field range.
    pub fn remainder(&self, rho: f64) -> Option<f64> {
        self.far.eval(rho.ln()).map(|y| y[0])
    }

    pub fn fit(&self, window: (f64, f64)) -> Result<FarFieldFit, RadialError> {
        fit_far_field(self.delta0, window, FIT_SAMPLES, |t| self.far.eval(t).map(|y| y[0]), &[])
    }
}

pub(crate) const FIT_SAMPLES: usize = 2000;

/// [max(10², ρ_max·10⁻⁸), ρ_max]
pub fn default_fit_window(rho_max: f64) -> (f64, f64) {
    ((rho_max * 1e-8).max(1e2), rho_max)
}

/// Least-squares fit of `sample(t)` on t = ln ρ uniform in the window against
/// {sin ωt, cos ωt, 1} plus `extras`.
pub fn fit_far_field<F>(delta0: f64, window: (f64, f64), n: usize, mut sample: F, extras: &[&dyn Fn(f64) -> f64]) -> Result<FarFieldFit, RadialError>
where
    F: FnMut(f64) -> Option<f64>,
{
    let (t0, t1) = (window.0.ln(), window.1.ln());
    if !(t1 - t0 >= 4.0 * PI / OMEGA) {
        return Err(RadialError::FitWindowTooSmall { rho_min: window.0, rho_max: window.1 });
    }
    let cols = 3 + extras.len();
    let ts: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
    let mut obs = Vec::with_capacity(n);
    for &t in &ts {
        obs.push(sample(t).ok_or(RadialError::Domain(format!("fit window [{}, {}] outside the computed range", window.0, window.1)))?);
    }
    let basis = DMatrix::from_fn(n, cols, |i, j| match j {
        0 => (OMEGA * ts[i]).sin(),
        1 => (OMEGA * ts[i]).cos(),
        2 => 1.0,
        _ => extras[j - 3](ts[i]),
    });
    let fit = linear_lsq(&basis, &obs)?;
    let c = &fit.coefficients;
    Ok(FarFieldFit {
        delta0,
        a_tilde: c[0].hypot(c[1]),
        phi_tilde: c[1].atan2(c[0]).rem_euclid(2.0 * PI),
        const_term: c[2],
        extra: c[3..].to_vec(),
        residual_norm: fit.residual_norm,
        window,
    })
}

/// Integrates the inner problem to ρ_max and fits the far-field oscillation on
/// the default window, or reports where the vertical tangent occurs.
pub fn solve_inner_2d(delta0: f64, rho_max: f64) -> Result<InnerOutcome, RadialError> {
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(RadialError::Domain(format!("delta0 must be nonnegative, got {delta0}")));
    }
    if !(rho_max >= 1e6 && rho_max.is_finite()) {
        return Err(RadialError::Domain(format!("rho_max must be at least 1e6, got {rho_max}")));
    }
    let window = default_fit_window(rho_max);
    if window.1.ln() - window.0.ln() < 4.0 * PI / OMEGA {
        return Err(RadialError::FitWindowTooSmall { rho_min: window.0, rho_max: window.1 });
    }
    let a = phase_a(delta0, PHASE_A_END, true)?;
    if a.max_theta >= FRAC_PI_2 {
        return Ok(InnerOutcome::BlowUp(a.end.err().unwrap_or(BlowUpSignal { delta0, rho: f64::NAN, w: f64::NAN })));
    }
    let h = match a.end {
        Ok(h) => h,
        Err(b) => return Ok(InnerOutcome::BlowUp(b)),
    };
    let r23 = h.rho.powf(2.0 / 3.0);
    let y0 = [h.w - r23, h.rho_wp - 2.0 / 3.0 * r23];
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let r = t.exp();
        let r23 = r.powf(2.0 / 3.0);
        let p = 2.0 / 3.0 / r.cbrt() + y[1] / r;
        let e = 1.5 * (delta0 * p * p).ln_1p() - 2.0 * (y[0] / r23).ln_1p();
        dy[0] = y[1];
        dy[1] = LAMBDA0 * r23 * e.exp_m1() - delta0 * r * p * p * p;
    };
    let cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-13, max_steps: 2_000_000, ..Default::default() }.dense();
    let far = integrate(rhs, &y0, (h.rho.ln(), rho_max.ln()), &cfg, &[])?;
    let end_v = far.last()[0];
    if !(end_v.abs() < 0.1 * rho_max.powf(2.0 / 3.0)) {
        return Err(RadialError::Domain(format!("inner solution at delta0 = {delta0} does not track rho^(2/3)")));
    }
    let sol = ScalarInner { delta0, near_rho: a.rho, near_w: a.w, far, rho_max };
    let fit = sol.fit(window)?;
    Ok(InnerOutcome::Global(Box::new(sol), fit))
}

/// Bisection for the switch of the blow-up predicate.
pub fn find_delta0_star(bracket: (f64, f64), tol: f64) -> Result<f64, RadialError> {
    let mut err = None;
    let r = bisect(
        |d| match inner_blows_up(d) {
            Ok(b) => b,
            Err(e) => {
                err.get_or_insert(e);
                true
            }
        },
        bracket,
        tol,
    );
    if let Some(e) = err {
        return Err(e);
    }
    Ok(r?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global(d0: f64) -> (Box<ScalarInner>, FarFieldFit) {
        global_to(d0, 1e16)
    }

    fn global_to(d0: f64, rho_max: f64) -> (Box<ScalarInner>, FarFieldFit) {
        match solve_inner_2d(d0, rho_max).unwrap() {
            InnerOutcome::Global(s, f) => (s, f),
            InnerOutcome::BlowUp(b) => panic!("unexpected blow-up {b:?}"),
        }
    }

    #[test]
    fn series_satisfies_the_ode_to_fourth_order() {
        // Residual of the expanded operator at small ρ should be O(ρ⁴).
        let d0 = 3.0;
        let res = |r: f64| {
            let h = 1e-4 * r;
            let (w, wp) = series(d0, r);
            let (_, wpp) = series(d0, r + h);
            let (_, wpm) = series(d0, r - h);
            let wpp2 = (wpp - wpm) / (2.0 * h);
            let g = 1.0 + d0 * wp * wp;
            wpp2 / g.powf(1.5) + wp / (r * g.sqrt()) - LAMBDA0 / (w * w)
        };
        let ratio = res(2e-2) / res(1e-2);
        assert!((ratio - 16.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn zero_delta0_is_global() {
        let (s, f) = global(0.0);
        assert!(f.a_tilde > 0.0 && f.a_tilde.is_finite());
        assert!(f.const_term.abs() < 1e-3, "{f:?}");
        let w_end = s.remainder(1e12).unwrap();
        assert!(w_end.abs() < 1.0);
    }

    #[test]
    fn blows_up_above_threshold() {
        match solve_inner_2d(19.0, 1e8).unwrap() {
            InnerOutcome::BlowUp(b) => assert!(b.rho > 0.0 && b.w > 1.0),
            InnerOutcome::Global(..) => panic!("expected blow-up"),
        }
        assert!(!inner_blows_up(4.0).unwrap());
    }

    #[test]
    fn window_too_small() {
        assert!(matches!(solve_inner_2d(1.0, 1e6), Err(RadialError::FitWindowTooSmall { .. })));
    }

    #[test]
    fn disjoint_windows_agree() {
        for d0 in [1.0, 15.0] {
            let (s, _) = global_to(d0, 1e22);
            let a = s.fit((1e10, 1e16)).unwrap();
            let b = s.fit((1e16, 1e22)).unwrap();
            assert!((a.a_tilde - b.a_tilde).abs() < 1e-3 * b.a_tilde, "{a:?} {b:?}");
            assert!((a.phi_tilde - b.phi_tilde).abs() < 1e-3 * b.phi_tilde, "{a:?} {b:?}");
        }
    }

    #[test]
    fn residual_shrinks_outward() {
        let (s, _) = global(5.0);
        let near = s.fit((1e3, 1e9)).unwrap();
        let far = s.fit((1e9, 1e15)).unwrap();
        assert!(far.residual_norm < near.residual_norm);
    }

    #[test]
    fn remainder_form_matches_direct_graph_integration() {
        // Independent oracle: integrate the graph form w″ directly on ρ ∈ [1e-4, 1e3].
        let d0 = 2.0;
        let (s, _) = global(d0);
        let (w0, wp0) = series(d0, 1e-4);
        let rhs = move |r: f64, y: &[f64], dy: &mut [f64]| {
            let g = 1.0 + d0 * y[1] * y[1];
            dy[0] = y[1];
            dy[1] = g.powf(1.5) * LAMBDA0 / (y[0] * y[0]) - y[1] * g / r;
        };
        let cfg = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-14, ..Default::default() };
        let tr = integrate(rhs, &[w0, wp0], (1e-4, 1e3), &cfg, &[]).unwrap();
        let direct = tr.last()[0] - 1e3f64.powf(2.0 / 3.0);
        let ours = s.remainder(1e3).unwrap();
        assert!((direct - ours).abs() < 1e-7, "{direct} {ours}");
    }
}
