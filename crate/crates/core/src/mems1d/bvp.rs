use super::coeffs::lambda1_closed;
use super::Mems1dError;
use crate::curve::{BifurcationCurve, TermCause};
use crate::ode_core::{find_root, integrate, newton_solve_joint, Direction, EventSpec, IntegratorConfig, NewtonOptions, Trajectory};
use crate::params::ProblemParams;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile1D {
    pub params: ProblemParams,
    pub x_grid: Vec<f64>,
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bvp1dSolution {
    pub lambda: f64,
    pub profile: Profile1D,
    /// |u(1)| after each Newton iterate.
    pub newton_trace: Vec<f64>,
}

// Slope at which a trajectory is declared to have a vertical tangent.
const BLOWUP_SLOPE: f64 = 1e6;
const SHOOT_TOL: f64 = 1e-12;

fn config() -> IntegratorConfig {
    IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, max_steps: 200_000, ..Default::default() }
}

enum Shot {
    Reached { u1: f64, du1: f64 },
    BlowUp,
}

fn rhs_with_sensitivity(eps: f64, lambda: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    let e2 = eps * eps;
    move |_x, s, ds| {
        let (u, p, ul, pl) = (s[0], s[1], s[2], s[3]);
        let g = 1.0 + e2 * p * p;
        let gs = g.sqrt();
        let inv = 1.0 / ((1.0 + u) * (1.0 + u));
        let f = lambda * g * gs * inv;
        ds[0] = p;
        ds[1] = f;
        ds[2] = pl;
        ds[3] = g * gs * inv - 2.0 * f / (1.0 + u) * ul + 3.0 * lambda * e2 * p * gs * inv * pl;
    }
}

fn shoot_traj(eps: f64, alpha: f64, lambda: f64) -> Result<Trajectory, ()> {
    let ev = [EventSpec::new(move |_x, s: &[f64]| eps * s[1].abs() - BLOWUP_SLOPE, Direction::Rising, true)];
    match integrate(rhs_with_sensitivity(eps, lambda), &[alpha, 0.0, 0.0, 0.0], (0.0, 1.0), &config(), &ev) {
        Ok(tr) if tr.terminated_by.is_none() => Ok(tr),
        _ => Err(()),
    }
}

fn shoot(eps: f64, alpha: f64, lambda: f64) -> Shot {
    match shoot_traj(eps, alpha, lambda) {
        Ok(tr) => {
            let s = tr.last();
            Shot::Reached { u1: s[0], du1: s[2] }
        }
        Err(()) => Shot::BlowUp,
    }
}

/// λ seed from the three-term expansion (finite at ε = 0 as well).
fn expansion_seed(eps: f64, delta: f64) -> f64 {
    let e2 = eps * eps;
    let l1 = lambda1_closed(eps);
    let l2 = l1 * ((4.0 - 2.0 * e2 * l1).ln() - 1.0 / (1.0 + e2));
    (delta * l1 * (1.0 - delta * delta.ln()) + delta * delta * l2).max(1e-6)
}

fn newton_from(eps: f64, alpha: f64, seed: f64) -> Option<(f64, Vec<f64>)> {
    let opts = NewtonOptions { tol: SHOOT_TOL, max_iter: 40, max_halvings: 30 };
    let res = newton_solve_joint(
        |x, _| {
            if !(x[0] > 0.0) {
                return None;
            }
            match shoot(eps, alpha, x[0]) {
                Shot::Reached { u1, du1 } => Some((vec![u1], Some(DMatrix::from_element(1, 1, du1)))),
                Shot::BlowUp => None,
            }
        },
        &[seed],
        &opts,
    )
    .ok()?;
    Some((res.root[0], res.trace))
}

fn bracketed(eps: f64, alpha: f64) -> Option<f64> {
    // u(1; λ) increases with λ; blow-up counts as overshoot.
    let value = |l: f64| match shoot(eps, alpha, l) {
        Shot::Reached { u1, .. } => u1,
        Shot::BlowUp => 1.0,
    };
    let mut hi = 0.05;
    while value(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return None;
        }
    }
    let lo = if hi > 0.05 { 0.5 * hi } else { 0.0 };
    find_root(value, (lo, hi), 1e-15).ok()
}

fn build_profile(eps: f64, alpha: f64, lambda: f64) -> Option<Profile1D> {
    let tr = shoot_traj(eps, alpha, lambda).ok()?;
    let params = ProblemParams::new(eps, lambda, alpha).ok()?;
    Some(Profile1D { params, x_grid: tr.t.clone(), u: tr.component(0), u_prime: tr.component(1) })
}

fn solve_seeded(eps: f64, alpha: f64, seeds: &[f64]) -> Result<Vec<Bvp1dSolution>, Mems1dError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Mems1dError::Domain(format!("eps must be nonnegative, got {eps}")));
    }
    if !(alpha > -1.0 && alpha < 0.0) {
        return Err(Mems1dError::Domain(format!("alpha must lie in (-1, 0), got {alpha}")));
    }
    let mut roots: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut last_trace = Vec::new();
    for &s in seeds {
        match newton_from(eps, alpha, s) {
            Some((l, tr)) if l > 0.0 => {
                if !roots.iter().any(|(r, _)| (r - l).abs() <= 1e-8 * l.max(1e-3)) {
                    roots.push((l, tr));
                }
            }
            Some((_, tr)) => last_trace = tr,
            None => {}
        }
    }
    if roots.is_empty() {
        if let Some(l) = bracketed(eps, alpha) {
            if let Some((l, tr)) = newton_from(eps, alpha, l) {
                roots.push((l, tr));
            }
        }
    }
    if roots.is_empty() {
        return Err(Mems1dError::NoConvergence { alpha, trace: last_trace });
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots
        .into_iter()
        .map(|(lambda, newton_trace)| {
            let profile = build_profile(eps, alpha, lambda).ok_or(Mems1dError::NoConvergence { alpha, trace: newton_trace.clone() })?;
            Ok(Bvp1dSolution { lambda, profile, newton_trace })
        })
        .collect()
}

/// Shooting in λ from x = 0 with u(0) = α, u′(0) = 0 onto u(1) = 0. Returns
/// every distinct root reached from the multi-start seeds, sorted by λ.
pub fn solve_bvp_1d(eps: f64, alpha: f64) -> Result<Vec<Bvp1dSolution>, Mems1dError> {
    // Pull-in load of the ε = 0 problem on (−1, 1).
    let base = 0.35;
    let seeds = [expansion_seed(eps, 1.0 + alpha), 0.1 * base, 0.5 * base, base];
    solve_seeded(eps, alpha, &seeds)
}

/// Continuation in α along `alpha_grid` (strictly decreasing in (−1, 0)),
/// warm-starting each solve from the previous one or two points.
pub fn sweep_bifurcation_1d(eps: f64, alpha_grid: &[f64]) -> Result<BifurcationCurve, Mems1dError> {
    if alpha_grid.is_empty() {
        return Err(Mems1dError::Domain("alpha grid is empty".into()));
    }
    if alpha_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Mems1dError::Domain("alpha grid must be strictly decreasing".into()));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(**a > -1.0 && **a < 0.0)) {
        return Err(Mems1dError::Domain(format!("alpha {a} outside (-1, 0)")));
    }
    let mut curve = BifurcationCurve::new(eps);
    let mut branch = 0u32;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut last_failed = false;
    for &alpha in alpha_grid {
        let mut seeds = Vec::new();
        match history.as_slice() {
            [.., (a0, l0), (a1, l1)] => seeds.push(l1 + (l1 - l0) / (a1 - a0) * (alpha - a1)),
            [(_, l1)] => seeds.push(*l1),
            [] => {}
        }
        seeds.push(expansion_seed(eps, 1.0 + alpha));
        if let Some((_, l)) = history.last() {
            seeds.push(*l);
        }
        match solve_seeded(eps, alpha, &seeds) {
            Ok(sols) => {
                let lambda = sols[0].lambda;
                if last_failed && !curve.is_empty() {
                    branch += 1;
                }
                curve.push(alpha, lambda, branch);
                history.push((alpha, lambda));
                last_failed = false;
            }
            Err(Mems1dError::NoConvergence { .. }) => {
                if let Some(p) = curve.points.last_mut() {
                    if !last_failed {
                        p.term_cause = TermCause::Gap;
                    }
                }
                history.clear();
                last_failed = true;
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(p) = curve.points.last_mut() {
        p.term_cause = if last_failed { TermCause::NoConvergence } else { TermCause::EndOfGrid };
    }
    curve.mark_folds_by_lambda();
    Ok(curve)
}
