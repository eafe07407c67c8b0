use super::RadialError;
use crate::ode_core::{integrate, Direction, EventSpec, IntegratorConfig, Trajectory};
use crate::params::ProblemParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, SQRT_2};

/// Sampled (ρ, u, ψ) curve in the stretched variable ρ = r/ε, parameterised by arc length.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AngleTrajectory {
    pub tau: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowUpReport {
    pub rho1: f64,
    pub u1: f64,
    pub psi: f64,
    /// NaN when the radicand in M is negative (outside the lemma's hypotheses).
    pub m: f64,
    pub bounds: Vec<BoundCheck>,
}

impl BlowUpReport {
    pub fn all_pass(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleStop {
    /// Stop at the first rising crossing of ρ = 1/ε.
    pub at_domain_edge: bool,
    /// Stop when ψ reaches π/2.
    pub at_vertical: bool,
    pub tau_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for AngleStop {
    fn default() -> Self {
        AngleStop { at_domain_edge: true, at_vertical: true, tau_max: f64::INFINITY, rel_tol: 1e-12, abs_tol: 1e-14 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleOutcome {
    pub trajectory: AngleTrajectory,
    pub blowup: Option<BlowUpReport>,
    pub reached_edge: bool,
    /// Largest inclination along the curve, located by an event on ψ′ = 0.
    pub max_psi: f64,
}

impl AngleOutcome {
    pub fn last(&self) -> (f64, f64, f64) {
        let t = &self.trajectory;
        let n = t.rho.len() - 1;
        (t.rho[n], t.u[n], t.psi[n])
    }
}

/// M of the blow-up lemma; NaN if its radicand is negative.
pub fn blowup_m(k: f64, alpha: f64) -> f64 {
    let d = 1.0 + alpha;
    let rad = k * k - 12.0 * k * d + 4.0 * d * d;
    if rad < 0.0 {
        return f64::NAN;
    }
    (3.0 * alpha + 1.0) / 2.0 - d * d / k - d * rad.sqrt() / (2.0 * k)
}

/// Largest α (exclusive) for which nonexistence is guaranteed at k = ε²λ.
pub fn alpha_threshold(k: f64) -> f64 {
    if k <= regime_split() {
        -1.0 + (3.0 - 2.0 * SQRT_2) / 2.0 * k
    } else {
        ((k * (k - 8.0)).sqrt() - k - 4.0) / (4.0 * (k + 1.0))
    }
}

/// k = ε²λ at which the two regimes of the threshold meet.
pub fn regime_split() -> f64 {
    4.0 + 3.0 * SQRT_2
}

/// Integrates (ρ, u, ψ)′ = (cos ψ, sin ψ, k/(1+u)² − sin ψ/ρ), k = ε²λ, from a
/// series start near the axis.
pub fn integrate_angle_ivp(params: &ProblemParams, stop: &AngleStop) -> Result<AngleOutcome, RadialError> {
    if !(params.eps > 0.0) {
        return Err(RadialError::Domain("angle form needs eps > 0".into()));
    }
    if !(params.alpha > -1.0 && params.alpha < 0.0) || !(params.lambda > 0.0) {
        return Err(RadialError::Domain(format!("need alpha in (-1, 0) and lambda > 0, got alpha={} lambda={}", params.alpha, params.lambda)));
    }
    let k = params.eps * params.eps * params.lambda;
    let tau_max = if stop.tau_max.is_finite() { stop.tau_max } else { 20.0 * (1.0 / params.eps + 2.0 / k + 1.0) };
    Ok(integrate_angle_raw(k, params.alpha, Some(1.0 / params.eps), stop, tau_max, false)?.0)
}

pub(crate) fn integrate_angle_raw(k: f64, alpha: f64, edge: Option<f64>, stop: &AngleStop, tau_max: f64, dense: bool) -> Result<(AngleOutcome, Trajectory), RadialError> {
    let d = 1.0 + alpha;
    // Near the axis sin ψ = (kρ/(2d²))(1 − kρ²/(4d³)) + O(ρ⁵); the ρ³ term keeps
    // the start strictly inside the sandwich bound.
    let rho0 = 1e-4 * d.powf(1.5) / k.sqrt();
    let r2 = rho0 * rho0;
    let sin0 = k * rho0 / (2.0 * d * d) * (1.0 - k * r2 / (4.0 * d * d * d));
    let u0 = alpha + k * r2 / (4.0 * d * d) - k * k * r2 * r2 / (32.0 * d.powi(5)) + k.powi(3) * r2 * r2 / (64.0 * d.powi(6));
    let y0 = [rho0, u0, sin0.asin()];
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (s, co) = y[2].sin_cos();
        dy[0] = co;
        dy[1] = s;
        dy[2] = k / ((1.0 + y[1]) * (1.0 + y[1])) - s / y[0];
    };
    let mut events = vec![EventSpec::new(move |_t, y: &[f64]| k / ((1.0 + y[1]) * (1.0 + y[1])) - y[2].sin() / y[0], Direction::Falling, false)];
    let vert_idx = if stop.at_vertical {
        events.push(EventSpec::new(|_t, y: &[f64]| y[2] - FRAC_PI_2, Direction::Rising, true));
        Some(events.len() - 1)
    } else {
        None
    };
    let edge_idx = match (stop.at_domain_edge, edge) {
        (true, Some(e)) => {
            events.push(EventSpec::new(move |_t, y: &[f64]| y[0] - e, Direction::Rising, true));
            Some(events.len() - 1)
        }
        _ => None,
    };
    // The curve may spiral when ψ exceeds π; such trajectories are of no use.
    events.push(EventSpec::new(|_t, y: &[f64]| y[2] - std::f64::consts::PI, Direction::Rising, true));
    events.push(EventSpec::new(|_t, y: &[f64]| y[0], Direction::Falling, true));
    let mut cfg = IntegratorConfig { rel_tol: stop.rel_tol, abs_tol: stop.abs_tol, max_steps: 1_000_000, ..Default::default() };
    if dense {
        cfg = cfg.dense();
    }
    let tr = integrate(rhs, &y0, (0.0, tau_max), &cfg, &events)?;

    let mut max_psi = tr.last()[2];
    for e in tr.events.iter().filter(|e| e.index == 0) {
        max_psi = max_psi.max(e.y[2]);
    }
    let traj = AngleTrajectory { tau: tr.t.clone(), rho: tr.component(0), u: tr.component(1), psi: tr.component(2) };
    let reached_edge = edge_idx.is_some() && tr.terminated_by == edge_idx;
    let blowup = if vert_idx.is_some() && tr.terminated_by == vert_idx {
        let y = tr.last();
        Some(blowup_report(k, alpha, y[0], y[1], y[2]))
    } else {
        None
    };
    if blowup.is_some() {
        max_psi = max_psi.max(FRAC_PI_2);
    }
    Ok((AngleOutcome { trajectory: traj, blowup, reached_edge, max_psi }, tr))
}

fn blowup_report(k: f64, alpha: f64, rho1: f64, u1: f64, psi: f64) -> BlowUpReport {
    let d = 1.0 + alpha;
    let m = blowup_m(k, alpha);
    let rho_lo = 2.0 * d * d / k;
    let rho_hi = 2.0 * (1.0 + m) * (1.0 + m) / k;
    let u_lo = alpha + 2.0 * d * d / k;
    let bounds = vec![
        BoundCheck { name: "rho1_lower", lower: rho_lo, value: rho1, upper: f64::INFINITY, pass: rho1 > rho_lo },
        BoundCheck { name: "rho1_upper", lower: f64::NEG_INFINITY, value: rho1, upper: rho_hi, pass: rho1 <= rho_hi },
        BoundCheck { name: "u1_lower", lower: u_lo, value: u1, upper: f64::INFINITY, pass: u1 > u_lo },
        BoundCheck { name: "u1_below_M", lower: f64::NEG_INFINITY, value: u1, upper: m, pass: u1 < m },
        BoundCheck { name: "M_negative", lower: f64::NEG_INFINITY, value: m, upper: 0.0, pass: m < 0.0 },
    ];
    BlowUpReport { rho1, u1, psi, m, bounds }
}

/// Counts points that break k/(2(1+u)²) < sin ψ/ρ < k/(2(1+α)²), allowing a
/// relative slack for roundoff where the two sides touch near the axis.
pub fn sandwich_violations(k: f64, alpha: f64, t: &AngleTrajectory, slack: f64) -> usize {
    let upper = k / (2.0 * (1.0 + alpha) * (1.0 + alpha));
    t.rho
        .iter()
        .zip(&t.u)
        .zip(&t.psi)
        .filter(|((rho, u), psi)| {
            let q = psi.sin() / **rho;
            let lower = k / (2.0 * (1.0 + **u) * (1.0 + **u));
            !(q > lower * (1.0 - slack) && q < upper * (1.0 + slack))
        })
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundSampleSpec {
    pub samples: usize,
    pub seed: u64,
    pub eps_range: (f64, f64),
    /// Upper limit on k = ε²λ for regime (b) samples.
    pub k_max: f64,
}

impl Default for BoundSampleSpec {
    fn default() -> Self {
        BoundSampleSpec { samples: 200, seed: 7, eps_range: (0.1, 2.0), k_max: 60.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSample {
    pub eps: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub regime: char,
    pub report: Option<BlowUpReport>,
    pub sandwich_violations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundsReport {
    pub samples: Vec<BoundSample>,
    pub violations: Vec<String>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Monte Carlo check of the nonexistence theorem: half the samples in each
/// regime, α drawn strictly below the threshold.
pub fn verify_nonexistence_bounds(spec: &BoundSampleSpec) -> Result<BoundsReport, RadialError> {
    if spec.samples == 0 || !(spec.eps_range.0 > 0.0 && spec.eps_range.1 >= spec.eps_range.0) || !(spec.k_max > regime_split()) {
        return Err(RadialError::Domain("invalid bound sample specification".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draws: Vec<(f64, f64, f64, char)> = (0..spec.samples)
        .map(|i| {
            let eps = rng.gen_range(spec.eps_range.0..=spec.eps_range.1);
            let (k, regime) = if i % 2 == 0 {
                (rng.gen_range(0.05..=regime_split()), 'a')
            } else {
                (rng.gen_range(regime_split() * (1.0 + 1e-9)..=spec.k_max), 'b')
            };
            let thr = alpha_threshold(k);
            let alpha = -1.0 + (thr + 1.0) * rng.gen_range(0.02..0.98);
            (eps, k / (eps * eps), alpha, regime)
        })
        .collect();

    let mut report = BoundsReport::default();
    for (eps, lambda, alpha, regime) in draws {
        let k = eps * eps * lambda;
        let params = ProblemParams::new(eps, lambda, alpha).map_err(|e| RadialError::Domain(e.to_string()))?;
        let stop = AngleStop { at_domain_edge: false, ..Default::default() };
        let tag = format!("eps={eps:.6} lambda={lambda:.6} alpha={alpha:.6} regime={regime}");
        let out = integrate_angle_ivp(&params, &stop)?;
        let sv = sandwich_violations(k, alpha, &out.trajectory, 1e-9);
        if sv > 0 {
            report.violations.push(format!("{tag}: sandwich bound broken at {sv} points"));
        }
        match &out.blowup {
            None => report.violations.push(format!("{tag}: no vertical tangent found")),
            Some(b) => {
                for c in b.bounds.iter().filter(|c| !c.pass) {
                    report.violations.push(format!("{tag}: {} failed (lower {}, value {}, upper {})", c.name, c.lower, c.value, c.upper));
                }
                if !(b.u1 < 0.0) {
                    report.violations.push(format!("{tag}: blow-up at u1 = {} >= 0", b.u1));
                }
            }
        }
        report.samples.push(BoundSample { eps, lambda, alpha, regime, report: out.blowup, sandwich_violations: sv });
    }
    Ok(report)
}

/// δ̄₀ = 9(2√2 + 3)/2.
pub fn delta0_bar() -> f64 {
    9.0 * (2.0 * SQRT_2 + 3.0) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaledBoundsReport {
    pub delta0: f64,
    pub xi1: f64,
    pub v1: f64,
    pub bounds: Vec<BoundCheck>,
}

impl RescaledBoundsReport {
    pub fn passed(&self) -> bool {
        self.bounds.iter().all(|b| b.pass)
    }
}

/// The inner problem in ξ = ρ/√δ₀ is the angle IVP with k = 4δ₀/9 and v = 1 + u
/// started from u(0) = 0.
pub fn verify_rescaled_bounds(delta0: f64) -> Result<RescaledBoundsReport, RadialError> {
    let bar = delta0_bar();
    if !(delta0 >= bar * (1.0 - 1e-12)) || !delta0.is_finite() {
        return Err(RadialError::Domain(format!("delta0 must be at least {bar}, got {delta0}")));
    }
    let k = 4.0 * delta0 / 9.0;
    let stop = AngleStop { at_domain_edge: false, ..Default::default() };
    let (out, _) = integrate_angle_raw(k, 0.0, None, &stop, 50.0, false)?;
    let b = out.blowup.ok_or_else(|| RadialError::Domain(format!("no vertical tangent for delta0 = {delta0}")))?;
    let (xi1, v1) = (b.rho1, 1.0 + b.u1);
    let rad = (4.0 * delta0 * delta0 - 108.0 * delta0 + 81.0).max(0.0);
    let big_b = (6.0 * delta0 - 9.0 - rad.sqrt()) / (4.0 * delta0);
    let xi_lo = 9.0 / (2.0 * delta0);
    let xi_hi = xi_lo * big_b * big_b;
    let v_lo = 1.0 + xi_lo;
    let bounds = vec![
        BoundCheck { name: "xi1_lower", lower: xi_lo, value: xi1, upper: f64::INFINITY, pass: xi1 > xi_lo },
        BoundCheck { name: "xi1_upper", lower: f64::NEG_INFINITY, value: xi1, upper: xi_hi, pass: xi1 <= xi_hi },
        BoundCheck { name: "v1_lower", lower: v_lo, value: v1, upper: f64::INFINITY, pass: v1 > v_lo },
        BoundCheck { name: "v1_upper", lower: f64::NEG_INFINITY, value: v1, upper: big_b, pass: v1 < big_b },
    ];
    Ok(RescaledBoundsReport { delta0, xi1, v1, bounds })
}

/// Log-uniform δ₀ samples in [δ̄₀, δ_max] checked against the rescaled bounds.
pub fn verify_rescaled_sample(samples: usize, seed: u64, delta_max: f64) -> Result<(Vec<RescaledBoundsReport>, Vec<String>), RadialError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (delta0_bar().ln(), delta_max.ln());
    let mut out = Vec::with_capacity(samples);
    let mut violations = Vec::new();
    for _ in 0..samples {
        let d0 = rng.gen_range(lo..=hi).exp();
        let r = verify_rescaled_bounds(d0)?;
        for b in r.bounds.iter().filter(|b| !b.pass) {
            violations.push(format!("delta0={d0:.6}: {} failed (lower {}, value {}, upper {})", b.name, b.lower, b.value, b.upper));
        }
        out.push(r);
    }
    Ok((out, violations))
}
