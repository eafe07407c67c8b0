use super::shoot::{shoot_eval, NEWTON_TOL};
use super::ArclengthError;
use crate::curve::{BifurcationCurve, TermCause};
use crate::ode_core::{bisect, newton_solve_joint, NewtonOptions};
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceOptions {
    /// Initial, smallest and largest step in the (ln(1+α), λ, ℓ) arc length.
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { ds: 0.05, ds_min: 1e-6, ds_max: 0.25, max_steps: 5000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub alpha: f64,
    pub lambda: f64,
    pub ell: f64,
    pub min_r_prime: f64,
    pub multivalued: bool,
    pub fold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceResult {
    pub curve: BifurcationCurve,
    pub points: Vec<TracePoint>,
    /// α at which r′ first touches zero, refined by bisection.
    pub multivalued_onset: Option<f64>,
    pub fold_count: usize,
}

/// Continuation unknowns x = (a, λ, ℓ) with a = ln(1+α).
fn corrector(eps: f64, guess: [f64; 3], tangent: [f64; 3], anchor: [f64; 3], ds: f64) -> Option<([f64; 3], f64)> {
    let opts = NewtonOptions { tol: NEWTON_TOL, max_iter: 12, max_halvings: 8 };
    let mut min_rp = f64::NAN;
    let res = newton_solve_joint(
        |x, _| {
            let alpha = x[0].exp() - 1.0;
            let e = shoot_eval(eps, alpha, x[1], x[2]).ok()?;
            min_rp = e.min_r_prime;
            let da = x[0].exp();
            let mut j = DMatrix::zeros(3, 3);
            for i in 0..2 {
                j[(i, 0)] = e.jacobian[(i, 2)] * da;
                j[(i, 1)] = e.jacobian[(i, 0)];
                j[(i, 2)] = e.jacobian[(i, 1)];
            }
            for k in 0..3 {
                j[(2, k)] = tangent[k];
            }
            let arc = (0..3).map(|k| tangent[k] * (x[k] - anchor[k])).sum::<f64>() - ds;
            Some((vec![e.residual[0], e.residual[1], arc], Some(j)))
        },
        &guess,
        &opts,
    )
    .ok()?;
    let r = &res.root;
    // Re-evaluate so min r′ belongs to the accepted root.
    let e = shoot_eval(eps, r[0].exp() - 1.0, r[1], r[2]).ok()?;
    min_rp = if e.min_r_prime.is_finite() { e.min_r_prime } else { min_rp };
    Some(([r[0], r[1], r[2]], min_rp / r[2]))
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Solve at fixed α from a guess (λ, ℓ).
fn solve_at(eps: f64, alpha: f64, guess: (f64, f64)) -> Option<(f64, f64, f64)> {
    let opts = NewtonOptions { tol: NEWTON_TOL, max_iter: 30, max_halvings: 20 };
    let res = newton_solve_joint(
        |x, _| {
            let e = shoot_eval(eps, alpha, x[0], x[1]).ok()?;
            Some((e.residual.to_vec(), Some(e.jacobian.columns(0, 2).into_owned())))
        },
        &[guess.0, guess.1],
        &opts,
    )
    .ok()?;
    let e = shoot_eval(eps, alpha, res.root[0], res.root[1]).ok()?;
    Some((res.root[0], res.root[1], e.min_r_prime / res.root[1]))
}

/// Pseudo-arclength continuation of the upper branch from `alpha_start` toward
/// `alpha_end` with a secant predictor. Steps halve on a failed corrector and
/// double after three successes.
pub fn trace_branch(eps: f64, alpha_start: f64, alpha_end: f64, start_guess: (f64, f64), opts: &TraceOptions) -> Result<TraceResult, ArclengthError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ArclengthError::Domain(format!("eps must be positive, got {eps}")));
    }
    if !(alpha_start > alpha_end && alpha_start < 0.0 && alpha_end > -1.0) {
        return Err(ArclengthError::Domain(format!("need 0 > alpha_start > alpha_end > -1, got {alpha_start}, {alpha_end}")));
    }
    if !(opts.ds_min > 0.0 && opts.ds_min <= opts.ds && opts.ds <= opts.ds_max) {
        return Err(ArclengthError::Domain("step sizes must satisfy 0 < ds_min <= ds <= ds_max".into()));
    }
    let a_end = (1.0 + alpha_end).ln();
    let (l0, e0, m0) = solve_at(eps, alpha_start, start_guess).ok_or(ArclengthError::NoConvergence { alpha: alpha_start })?;
    let a0 = (1.0 + alpha_start).ln();
    // First step in the natural parameter to get a secant.
    let a1 = a0 - opts.ds;
    let (l1, e1, m1) = solve_at(eps, a1.exp() - 1.0, (l0, e0)).ok_or(ArclengthError::NoConvergence { alpha: a1.exp() - 1.0 })?;
    let mut pts = vec![([a0, l0, e0], m0), ([a1, l1, e1], m1)];
    let mut tangents = vec![unit([a1 - a0, l1 - l0, e1 - e0])];
    let mut ds = opts.ds;
    let mut successes = 0;
    let mut cause = TermCause::EndOfGrid;
    for _ in 0..opts.max_steps {
        let (x, _) = *pts.last().expect("nonempty");
        if x[0] <= a_end {
            break;
        }
        let t = *tangents.last().expect("nonempty");
        let pred = [x[0] + ds * t[0], x[1] + ds * t[1], x[2] + ds * t[2]];
        match corrector(eps, pred, t, x, ds) {
            Some((y, m)) => {
                let nt = unit([y[0] - x[0], y[1] - x[1], y[2] - x[2]]);
                // Reject steps that double back on the branch.
                if nt[0] * t[0] + nt[1] * t[1] + nt[2] * t[2] < 0.5 {
                    ds *= 0.5;
                    successes = 0;
                } else {
                    pts.push((y, m));
                    tangents.push(nt);
                    successes += 1;
                    if successes >= 3 {
                        ds = (2.0 * ds).min(opts.ds_max);
                        successes = 0;
                    }
                    continue;
                }
            }
            None => {
                ds *= 0.5;
                successes = 0;
            }
        }
        if ds < opts.ds_min {
            cause = TermCause::Gap;
            break;
        }
    }
    if pts.last().expect("nonempty").0[0] > a_end && cause == TermCause::EndOfGrid {
        cause = TermCause::NoConvergence;
    }

    let mut points: Vec<TracePoint> = pts
        .iter()
        .map(|(x, m)| TracePoint { alpha: x[0].exp() - 1.0, lambda: x[1], ell: x[2], min_r_prime: *m, multivalued: *m < 0.0, fold: false })
        .collect();
    // Fold where the λ-component of the secant tangent changes sign.
    for i in 1..tangents.len() {
        if tangents[i][1] * tangents[i - 1][1] < 0.0 {
            points[i].fold = true;
        }
    }
    let fold_count = points.iter().filter(|p| p.fold).count();
    let mut curve = BifurcationCurve::new(eps);
    for p in &points {
        curve.push(p.alpha, p.lambda, 0);
        curve.points.last_mut().expect("pushed").fold_flag = p.fold;
    }
    if let Some(p) = curve.points.last_mut() {
        p.term_cause = cause;
    }
    let multivalued_onset = match points.iter().position(|p| p.multivalued) {
        Some(i) if i > 0 => refine_onset(eps, &points[i - 1], &points[i]),
        _ => None,
    };
    Ok(TraceResult { curve, points, multivalued_onset, fold_count })
}

/// Bisection in α on the sign of min r′ between two consecutive branch points.
fn refine_onset(eps: f64, good: &TracePoint, bad: &TracePoint) -> Option<f64> {
    let mut last = (good.alpha, good.lambda, good.ell);
    let mut failed = false;
    let a = bisect(
        |alpha| {
            let w = (alpha - last.0) / (bad.alpha - last.0);
            let g = (last.1 + w * (bad.lambda - last.1), last.2 + w * (bad.ell - last.2));
            match solve_at(eps, alpha, g) {
                Some((l, e, m)) if m >= 0.0 => {
                    last = (alpha, l, e);
                    true
                }
                Some(_) => false,
                None => {
                    failed = true;
                    false
                }
            }
        },
        (good.alpha, bad.alpha),
        1e-12,
    )
    .ok()?;
    (!failed).then_some(a)
}
