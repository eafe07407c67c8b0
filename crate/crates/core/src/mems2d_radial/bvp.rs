use super::angle::{integrate_angle_raw, AngleStop};
use super::RadialError;
use crate::curve::{BifurcationCurve, TermCause};
use crate::ode_core::{bisect, find_root, integrate, IntegratorConfig, Trajectory};
use crate::params::ProblemParams;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

/// Discretised radial solution. For ε > 0, ψ is the inclination of the curve
/// (r/ε, u); for ε = 0 it is atan u′.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialProfile {
    pub params: ProblemParams,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bvp2dSolution {
    pub lambda: f64,
    pub profile: RadialProfile,
    pub max_psi: f64,
    /// False when the curve through the shooting data turns past vertical,
    /// i.e. it is not the graph of a classical solution.
    pub single_valued: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeadEndNumeric {
    pub eps: f64,
    pub alpha_star: f64,
    pub lambda_star: f64,
    /// 1 − |α*|
    pub delta_star: f64,
}

const PROFILE_POINTS: usize = 201;
const EDGE_RESIDUAL_TOL: f64 = 1e-10;

enum Edge {
    Reached { u: f64, max_psi: f64 },
    Overshoot,
}

fn stop() -> AngleStop {
    AngleStop { at_domain_edge: true, at_vertical: false, tau_max: f64::INFINITY, rel_tol: 1e-13, abs_tol: 1e-15 }
}

fn tau_max(eps: f64, k: f64) -> f64 {
    20.0 * (1.0 / eps + 2.0 / k + 1.0)
}

fn graph_traj(alpha: f64, lambda: f64, dense: bool) -> Result<Trajectory, RadialError> {
    let d = 1.0 + alpha;
    let r0 = (1e-4 * d.powf(1.5) / lambda.sqrt()).min(1e-4);
    let c = lambda / (4.0 * d * d);
    let rhs = move |r: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = lambda / ((1.0 + y[0]) * (1.0 + y[0])) - y[1] / r;
    };
    let mut cfg = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-15, max_steps: 1_000_000, ..Default::default() };
    if dense {
        cfg = cfg.dense();
    }
    Ok(integrate(rhs, &[alpha + c * r0 * r0, 2.0 * c * r0], (r0, 1.0), &cfg, &[])?)
}

fn shoot(eps: f64, alpha: f64, lambda: f64) -> Edge {
    if eps == 0.0 {
        return match graph_traj(alpha, lambda, false) {
            Ok(tr) if tr.last()[0].is_finite() => {
                let mp = tr.states().map(|(_, y)| y[1]).fold(0.0, f64::max);
                Edge::Reached { u: tr.last()[0], max_psi: mp.atan() }
            }
            _ => Edge::Overshoot,
        };
    }
    let k = eps * eps * lambda;
    match integrate_angle_raw(k, alpha, Some(1.0 / eps), &stop(), tau_max(eps, k), false) {
        Ok((out, _)) if out.reached_edge => Edge::Reached { u: out.last().1, max_psi: out.max_psi },
        _ => Edge::Overshoot,
    }
}

fn residual(eps: f64, alpha: f64, lambda: f64) -> f64 {
    match shoot(eps, alpha, lambda) {
        Edge::Reached { u, .. } => u,
        // Overshooting curves sit above the boundary value.
        Edge::Overshoot => 1.0,
    }
}

fn brent_lambda(eps: f64, alpha: f64, lo: f64, hi: f64) -> Option<f64> {
    let lam = find_root(|l| residual(eps, alpha, l), (lo, hi), 1e-15).ok()?;
    match shoot(eps, alpha, lam) {
        Edge::Reached { u, .. } if u.abs() < EDGE_RESIDUAL_TOL => Some(lam),
        _ => None,
    }
}

/// λ with u = 0 at the domain edge. With a guess the bracket grows around it;
/// otherwise the smallest root found by scanning upward.
pub fn lambda_for_alpha(eps: f64, alpha: f64, guess: Option<f64>) -> Result<f64, RadialError> {
    if let Some(g) = guess.filter(|g| *g > 0.0 && g.is_finite()) {
        let mut h = 0.01;
        for _ in 0..6 {
            let (lo, hi) = (g * (1.0 - h), g * (1.0 + h));
            if residual(eps, alpha, lo) < 0.0 && residual(eps, alpha, hi) >= 0.0 {
                if let Some(l) = brent_lambda(eps, alpha, lo, hi) {
                    return Ok(l);
                }
            }
            h = (2.0 * h).min(0.9);
        }
    }
    let mut lo = 1e-3;
    let mut f_lo = residual(eps, alpha, lo);
    while lo < 20.0 {
        let hi = lo * 1.08;
        let f_hi = residual(eps, alpha, hi);
        if f_lo < 0.0 && f_hi >= 0.0 {
            if let Some(l) = brent_lambda(eps, alpha, lo, hi) {
                return Ok(l);
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(RadialError::NoConvergence { alpha })
}

fn build_profile(eps: f64, alpha: f64, lambda: f64) -> Result<Bvp2dSolution, RadialError> {
    let params = ProblemParams::new(eps, lambda, alpha).map_err(|e| RadialError::Domain(e.to_string()))?;
    let n = PROFILE_POINTS;
    if eps == 0.0 {
        let tr = graph_traj(alpha, lambda, true)?;
        let r0 = tr.t[0];
        let (mut r, mut u, mut up, mut psi) = (vec![0.0], vec![alpha], vec![0.0], vec![0.0]);
        for i in 1..n {
            let x = r0 + (1.0 - r0) * i as f64 / (n - 1) as f64;
            let y = tr.eval(x).expect("dense output");
            r.push(x);
            u.push(y[0]);
            up.push(y[1]);
            psi.push(y[1].atan());
        }
        let max_psi = psi.iter().cloned().fold(0.0, f64::max);
        return Ok(Bvp2dSolution { lambda, profile: RadialProfile { params, r, u, u_prime: up, psi }, max_psi, single_valued: true });
    }
    let k = eps * eps * lambda;
    let (out, tr) = integrate_angle_raw(k, alpha, Some(1.0 / eps), &stop(), tau_max(eps, k), true)?;
    let (t0, t1) = (tr.t[0], tr.last_t());
    let (mut r, mut u, mut up, mut psi) = (vec![0.0], vec![alpha], vec![0.0], vec![0.0]);
    for i in 1..n {
        let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
        let y = tr.eval(t).expect("dense output");
        r.push(eps * y[0]);
        u.push(y[1]);
        up.push(y[2].tan() / eps);
        psi.push(y[2]);
    }
    Ok(Bvp2dSolution { lambda, profile: RadialProfile { params, r, u, u_prime: up, psi }, max_psi: out.max_psi, single_valued: out.max_psi < FRAC_PI_2 })
}

pub fn solve_bvp_2d(eps: f64, alpha: f64, guess: Option<f64>) -> Result<Bvp2dSolution, RadialError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(RadialError::Domain(format!("eps must be nonnegative, got {eps}")));
    }
    if !(alpha > -1.0 && alpha < 0.0) {
        return Err(RadialError::Domain(format!("alpha must lie in (-1, 0), got {alpha}")));
    }
    let lambda = lambda_for_alpha(eps, alpha, guess)?;
    build_profile(eps, alpha, lambda)
}

/// True when no classical solution continues to α: the λ root is lost or the
/// curve turns past vertical.
fn beyond_dead_end(eps: f64, alpha: f64, guess: f64) -> (bool, Option<f64>) {
    match lambda_for_alpha(eps, alpha, Some(guess)) {
        Ok(l) => match shoot(eps, alpha, l) {
            Edge::Reached { max_psi, .. } => (max_psi >= FRAC_PI_2, Some(l)),
            Edge::Overshoot => (true, None),
        },
        Err(_) => (true, None),
    }
}

fn bisect_dead_end(eps: f64, good: (f64, f64), bad_alpha: f64, tol: f64) -> Result<DeadEndNumeric, RadialError> {
    let mut last_good = good;
    let alpha_star = bisect(
        |a| {
            let (beyond, lam) = beyond_dead_end(eps, a, last_good.1);
            if !beyond {
                last_good = (a, lam.expect("root on the good side"));
            }
            !beyond
        },
        (good.0, bad_alpha),
        tol,
    )?;
    let lambda_star = lambda_for_alpha(eps, alpha_star, Some(last_good.1)).unwrap_or(last_good.1);
    Ok(DeadEndNumeric { eps, alpha_star, lambda_star, delta_star: 1.0 + alpha_star })
}

/// Continuation in α with warm starts. Stops at the first point without a
/// classical solution; if the previous solution was still a graph the stop is
/// refined by bisection and recorded as a dead end.
pub fn sweep_bifurcation_2d(eps: f64, alpha_grid: &[f64], dead_end_tol: f64) -> Result<BifurcationCurve, RadialError> {
    if alpha_grid.is_empty() {
        return Err(RadialError::Domain("alpha grid is empty".into()));
    }
    if alpha_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(RadialError::Domain("alpha grid must be strictly decreasing".into()));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(**a > -1.0 && **a < 0.0)) {
        return Err(RadialError::Domain(format!("alpha {a} outside (-1, 0)")));
    }
    let mut curve = BifurcationCurve::new(eps);
    let mut hist: Vec<(f64, f64)> = Vec::new();
    let mut cause = TermCause::EndOfGrid;
    for &alpha in alpha_grid {
        let guess = match hist.as_slice() {
            [.., (a0, l0), (a1, l1)] => Some(l1 + (l1 - l0) / (a1 - a0) * (alpha - a1)),
            [(_, l)] => Some(*l),
            [] => None,
        };
        let sol = lambda_for_alpha(eps, alpha, guess).ok().map(|l| (l, shoot(eps, alpha, l)));
        match sol {
            Some((l, Edge::Reached { max_psi, .. })) if max_psi < FRAC_PI_2 => {
                curve.push(alpha, l, 0);
                hist.push((alpha, l));
            }
            _ if eps > 0.0 && !hist.is_empty() => {
                let good = *hist.last().expect("nonempty");
                let de = bisect_dead_end(eps, good, alpha, dead_end_tol)?;
                curve.push(de.alpha_star, de.lambda_star, 0);
                cause = TermCause::DeadEnd;
                break;
            }
            _ => {
                cause = TermCause::NoConvergence;
                break;
            }
        }
    }
    if let Some(p) = curve.points.last_mut() {
        p.term_cause = cause;
    }
    curve.mark_folds_by_lambda();
    Ok(curve)
}

/// Follows the upper branch from α = −1/2 in geometric steps of δ = 1 + α and
/// refines the first loss of a classical solution to `tol` in α.
pub fn locate_dead_end_2d(eps: f64, tol: f64) -> Result<DeadEndNumeric, RadialError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(RadialError::Domain(format!("dead end needs eps > 0, got {eps}")));
    }
    let mut delta = 0.5;
    let mut good: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    while delta > 1e-9 {
        let alpha = delta - 1.0;
        let guess = match (prev, good) {
            (Some((a0, l0)), Some((a1, l1))) => Some(l1 + (l1 - l0) / (a1 - a0) * (alpha - a1)),
            (_, Some((_, l))) => Some(l),
            _ => None,
        };
        let (beyond, lam) = match guess {
            Some(g) => beyond_dead_end(eps, alpha, g),
            None => match lambda_for_alpha(eps, alpha, None) {
                Ok(l) => match shoot(eps, alpha, l) {
                    Edge::Reached { max_psi, .. } => (max_psi >= FRAC_PI_2, Some(l)),
                    Edge::Overshoot => (true, None),
                },
                Err(_) => (true, None),
            },
        };
        if beyond {
            return match good {
                Some(g) => bisect_dead_end(eps, g, alpha, tol),
                None => Err(RadialError::NoConvergence { alpha }),
            };
        }
        prev = good;
        good = Some((alpha, lam.expect("root")));
        delta *= 0.8;
    }
    Err(RadialError::Domain(format!("no dead end found for eps = {eps}")))
}

#[cfg(test)]
mod tests {
    use super::super::angle::alpha_threshold;
    use super::*;
    use crate::ode_core::find_root;

    // ε = 0 oracle: 1 + u = (1+α)W(s), s = √λ r/(1+α)^{3/2}, with W″ + W′/s = 1/W²,
    // W(0) = 1. Then λ(α) = (1+α)³ s₁² where W(s₁) = 1/(1+α).
    fn universal_lambda(alpha: f64) -> f64 {
        let d = 1.0 + alpha;
        let s0 = 1e-5;
        let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = 1.0 / (y[0] * y[0]) - y[1] / s;
        };
        let cfg = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-15, ..Default::default() }.dense();
        let tr = integrate(rhs, &[1.0 + s0 * s0 / 4.0, s0 / 2.0], (s0, 1e4), &cfg, &[]).unwrap();
        let s1 = find_root(|s| tr.eval(s).unwrap()[0] - 1.0 / d, (s0, 1e4), 1e-14).unwrap();
        d * d * d * s1 * s1
    }

    #[test]
    fn eps_zero_matches_similarity_reduction() {
        for alpha in [-0.1, -0.5, -0.9] {
            let s = solve_bvp_2d(0.0, alpha, None).unwrap();
            let o = universal_lambda(alpha);
            assert!((s.lambda - o).abs() < 1e-9 * o, "{alpha}: {} vs {o}", s.lambda);
        }
    }

    #[test]
    fn eps_zero_has_many_folds_near_four_ninths() {
        let grid: Vec<f64> = (1..=160).map(|i| -1.0 + 0.5 * 0.93f64.powi(i)).collect();
        let curve = sweep_bifurcation_2d(0.0, &grid, 1e-4).unwrap();
        assert_eq!(curve.last_cause(), Some(TermCause::EndOfGrid));
        assert!(curve.folds().count() >= 3);
        let tail = curve.points.last().unwrap().lambda;
        assert!((tail - 4.0 / 9.0).abs() < 1e-3);
    }

    #[test]
    fn moderate_eps_profile_is_a_graph_solution() {
        let s = solve_bvp_2d(0.5, -0.4, None).unwrap();
        assert!(s.single_valued);
        let p = &s.profile;
        assert!(p.u.last().unwrap().abs() < 1e-9);
        assert!((p.r.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(p.u.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn divergence_form_residual() {
        // (1/(ε²ρ)) d(ρ sinψ)/dρ = λ/(1+u)² on the angle trajectory, by
        // centred differences on dense output.
        let (eps, alpha) = (0.5, -0.6);
        let s = solve_bvp_2d(eps, alpha, None).unwrap();
        let k = eps * eps * s.lambda;
        let (_, tr) = integrate_angle_raw(k, alpha, Some(1.0 / eps), &stop(), tau_max(eps, k), true).unwrap();
        let (t0, t1) = (tr.t[0], tr.last_t());
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 1..50 {
            let t = t0 + (t1 - t0) * i as f64 / 50.0;
            let f = |t: f64| {
                let y = tr.eval(t).unwrap();
                (y[0] * y[2].sin(), y[0])
            };
            let (fp, rp) = f(t + h);
            let (fm, rm) = f(t - h);
            let y = tr.eval(t).unwrap();
            let lhs = (fp - fm) / (rp - rm) / (eps * eps * y[0]);
            let rhs = s.lambda / ((1.0 + y[1]) * (1.0 + y[1]));
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst < 1e-6, "residual {worst}");
    }

    #[test]
    fn sweep_terminates_at_dead_end_above_theorem_bound() {
        let grid: Vec<f64> = (1..=60).map(|i| -1.0 + 0.7 * 0.9f64.powi(i)).collect();
        let curve = sweep_bifurcation_2d(0.5, &grid, 1e-8).unwrap();
        assert_eq!(curve.last_cause(), Some(TermCause::DeadEnd));
        for p in &curve.points {
            assert!(p.alpha > alpha_threshold(0.25 * p.lambda), "{p:?}");
        }
        let de = locate_dead_end_2d(0.5, 1e-8).unwrap();
        assert!((de.alpha_star - curve.points.last().unwrap().alpha).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(sweep_bifurcation_2d(0.5, &[-0.2, -0.1], 1e-4).is_err());
        assert!(solve_bvp_2d(0.5, 0.1, None).is_err());
    }
}
