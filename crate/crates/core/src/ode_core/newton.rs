//! Damped Newton iteration for small nonlinear systems.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings in the backtracking line search.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50, max_halvings: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonResult {
    pub root: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm at the initial guess followed by one entry per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NewtonError {
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize, best: Vec<f64>, trace: Vec<f64> },
    #[error("Newton iteration did not converge (best residual {best_norm:e})")]
    NoConvergence { best: Vec<f64>, best_norm: f64, trace: Vec<f64> },
    #[error("residual is not finite at the initial guess")]
    NonFiniteStart,
}

impl NewtonError {
    pub fn trace(&self) -> &[f64] {
        match self {
            NewtonError::SingularJacobian { trace, .. } | NewtonError::NoConvergence { trace, .. } => trace,
            NewtonError::NonFiniteStart => &[],
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn finite_norm(r: &Option<Vec<f64>>) -> f64 {
    match r {
        Some(v) if v.iter().all(|x| x.is_finite()) => norm(v),
        _ => f64::INFINITY,
    }
}

/// Newton with separate residual and Jacobian callbacks. Either may return
/// `None` (e.g. a failed trajectory), which counts as a non-decrease.
pub fn newton_solve<R, J>(mut residual: R, mut jacobian: J, guess: &[f64], opts: &NewtonOptions) -> Result<NewtonResult, NewtonError>
where
    R: FnMut(&[f64]) -> Option<Vec<f64>>,
    J: FnMut(&[f64]) -> Option<DMatrix<f64>>,
{
    let mut cached: Option<(Vec<f64>, Vec<f64>)> = None;
    newton_solve_joint(
        |x, need_jac| {
            let r = match &cached {
                Some((cx, cr)) if cx.as_slice() == x => cr.clone(),
                _ => residual(x)?,
            };
            cached = Some((x.to_vec(), r.clone()));
            let j = if need_jac { Some(jacobian(x)?) } else { None };
            Some((r, j))
        },
        guess,
        opts,
    )
}

/// Newton where one callback yields the residual and, on request, the
/// Jacobian (useful when both come out of a single sensitivity integration).
pub fn newton_solve_joint<S>(mut system: S, guess: &[f64], opts: &NewtonOptions) -> Result<NewtonResult, NewtonError>
where
    S: FnMut(&[f64], bool) -> Option<(Vec<f64>, Option<DMatrix<f64>>)>,
{
    let n = guess.len();
    let mut x = guess.to_vec();
    let (mut r, mut jac) = match system(&x, true) {
        Some((r, j)) if r.iter().all(|v| v.is_finite()) => (r, j),
        _ => return Err(NewtonError::NonFiniteStart),
    };
    let mut rn = norm(&r);
    let mut trace = vec![rn];
    if rn <= opts.tol {
        return Ok(NewtonResult { root: x, residual_norm: rn, trace, iterations: 0 });
    }
    for it in 1..=opts.max_iter {
        let j = match jac.take() {
            Some(j) => j,
            None => match system(&x, true) {
                Some((_, Some(j))) => j,
                _ => return Err(NewtonError::SingularJacobian { iteration: it, best: x, trace }),
            },
        };
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let step = match j.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return Err(NewtonError::SingularJacobian { iteration: it, best: x, trace }),
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let trial = system(&xt, false);
            let tn = finite_norm(&trial.as_ref().map(|(r, _)| r.clone()));
            if tn < rn {
                accepted = Some((xt, trial.unwrap().0, tn));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((xt, rt, tn)) => {
                x = xt;
                r = rt;
                rn = tn;
                trace.push(rn);
            }
            None => return Err(NewtonError::NoConvergence { best: x, best_norm: rn, trace }),
        }
        if rn <= opts.tol {
            return Ok(NewtonResult { root: x, residual_norm: rn, trace, iterations: it });
        }
    }
    Err(NewtonError::NoConvergence { best: x, best_norm: rn, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_square_root() {
        let res = newton_solve(
            |x| Some(vec![x[0] * x[0] - 4.0]),
            |x| Some(DMatrix::from_element(1, 1, 2.0 * x[0])),
            &[3.0],
            &NewtonOptions { tol: 1e-14, ..Default::default() },
        )
        .unwrap();
        assert!((res.root[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn circle_diagonal_intersection() {
        let res = newton_solve(
            |x| Some(vec![x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]),
            |x| Some(DMatrix::from_row_slice(2, 2, &[2.0 * x[0], 2.0 * x[1], 1.0, -1.0])),
            &[1.0, 0.0],
            &NewtonOptions { tol: 1e-14, ..Default::default() },
        )
        .unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((res.root[0] - h).abs() < 1e-13 && (res.root[1] - h).abs() < 1e-13);
    }

    #[test]
    fn quadratic_convergence_on_polynomial() {
        // x^3 - 2x - 5, simple root near 2.0946
        let res = newton_solve(
            |x| Some(vec![x[0].powi(3) - 2.0 * x[0] - 5.0]),
            |x| Some(DMatrix::from_element(1, 1, 3.0 * x[0] * x[0] - 2.0)),
            &[3.0],
            &NewtonOptions { tol: 1e-15, ..Default::default() },
        )
        .unwrap();
        let tr = &res.trace;
        let k = tr.len();
        assert!(k >= 4);
        // e_{k+1} ≈ C e_k^2: the log-ratio ≈ 2 over the last informative steps
        let p = (tr[k - 2] / tr[k - 3]).ln() / (tr[k - 3] / tr[k - 4]).ln();
        assert!(p > 1.6, "observed order {p}");
    }

    #[test]
    fn singular_jacobian_reported() {
        let err = newton_solve(|x| Some(vec![x[0] * x[0] + 1.0]), |_| Some(DMatrix::zeros(1, 1)), &[0.0], &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, NewtonError::SingularJacobian { .. }));
    }

    #[test]
    fn no_real_root_gives_best_iterate() {
        let err = newton_solve(
            |x| Some(vec![x[0] * x[0] + 1.0]),
            |x| Some(DMatrix::from_element(1, 1, 2.0 * x[0])),
            &[0.5],
            &NewtonOptions { max_iter: 20, ..Default::default() },
        )
        .unwrap_err();
        match err {
            NewtonError::NoConvergence { best_norm, trace, .. } => {
                assert!(best_norm >= 1.0 && !trace.is_empty());
            }
            NewtonError::SingularJacobian { .. } => {}
            e => panic!("unexpected {e:?}"),
        }
    }
}
