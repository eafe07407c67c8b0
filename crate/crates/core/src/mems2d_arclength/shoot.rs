use super::ArclengthError;
use crate::ode_core::{integrate, newton_solve_joint, Direction, EventSpec, IntegratorConfig, NewtonOptions, Trajectory, VariationalSystem};
use nalgebra::DMatrix;
use serde::Serialize;

/// Solution curve (r(s), z(s)) on s ∈ [0, ℓ]; primes are d/ds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParametricProfile {
    pub eps: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub ell: f64,
    pub s_grid: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub r_prime: Vec<f64>,
    pub z_prime: Vec<f64>,
    pub min_r_prime: f64,
    pub multivalued_flag: bool,
    /// ‖F‖ after each Newton iterate.
    pub newton_trace: Vec<f64>,
}

/// F(λ, ℓ) = (r(1) − 1, z(1)) and its derivatives with respect to (λ, ℓ, α).
#[derive(Clone, Debug, PartialEq)]
pub struct ShootEval {
    pub residual: [f64; 2],
    /// Columns ∂/∂λ, ∂/∂ℓ, ∂/∂α.
    pub jacobian: DMatrix<f64>,
    /// min r′ over the curve, in the ξ scaling (r′ = ℓ at the axis).
    pub min_r_prime: f64,
}

const N: usize = 4;
const NP: usize = 3;
const PROFILE_POINTS: usize = 401;

fn cfg(dense: bool) -> IntegratorConfig {
    let c = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, max_steps: 1_000_000, ..Default::default() };
    if dense {
        c.dense()
    } else {
        c
    }
}

/// State (r, r′, z, z′) in ξ = s/ℓ:
///   r″ = −ε²λℓ z′/(1+z)² + ε² z′²/r,  z″ = λℓ r′/(1+z)² − r′z′/r.
fn rhs(e2: f64, lambda: f64, ell: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_x, y, dy| {
        let (r, p, z, q) = (y[0], y[1], y[2], y[3]);
        let g = 1.0 / ((1.0 + z) * (1.0 + z));
        dy[0] = p;
        dy[1] = -e2 * lambda * ell * q * g + e2 * q * q / r;
        dy[2] = q;
        dy[3] = lambda * ell * p * g - p * q / r;
    }
}

fn jacobians(e2: f64, lambda: f64, ell: f64) -> impl Fn(f64, &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    move |_x, y| {
        let (r, p, z, q) = (y[0], y[1], y[2], y[3]);
        let g = 1.0 / ((1.0 + z) * (1.0 + z));
        let g3 = g / (1.0 + z);
        let le = lambda * ell;
        let mut jy = DMatrix::zeros(N, N);
        jy[(0, 1)] = 1.0;
        jy[(1, 0)] = -e2 * q * q / (r * r);
        jy[(1, 2)] = 2.0 * e2 * le * q * g3;
        jy[(1, 3)] = -e2 * le * g + 2.0 * e2 * q / r;
        jy[(2, 3)] = 1.0;
        jy[(3, 0)] = p * q / (r * r);
        jy[(3, 1)] = le * g - q / r;
        jy[(3, 2)] = -2.0 * le * p * g3;
        jy[(3, 3)] = -p / r;
        let mut jp = DMatrix::zeros(N, NP);
        jp[(1, 0)] = -e2 * ell * q * g;
        jp[(1, 1)] = -e2 * lambda * q * g;
        jp[(3, 0)] = ell * p * g;
        jp[(3, 1)] = lambda * p * g;
        (jy, jp)
    }
}

/// Series start with sensitivities: c = λℓ²/(2(1+α)²), z = α + cξ²/2,
/// r = ℓξ − ε²c²ξ³/(6ℓ).
fn start(e2: f64, alpha: f64, lambda: f64, ell: f64) -> (f64, Vec<f64>) {
    let d = 1.0 + alpha;
    let x = 1e-3 * d.powf(1.5) / ell;
    let c = lambda * ell * ell / (2.0 * d * d);
    // ∂c/∂λ, ∂c/∂ℓ, ∂c/∂α
    let dc = [c / lambda, 2.0 * c / ell, -2.0 * c / d];
    let x2 = x * x;
    let x3 = x2 * x;
    let mut y = vec![ell * x - e2 * c * c * x3 / (6.0 * ell), ell - e2 * c * c * x2 / (2.0 * ell), alpha + c * x2 / 2.0, c * x];
    for (k, dck) in dc.iter().enumerate() {
        // ∂(c²/ℓ)
        let mut dq = 2.0 * c * dck / ell;
        let mut dr = 0.0;
        let mut dz = 0.0;
        if k == 1 {
            dq -= c * c / (ell * ell);
            dr = 1.0;
        }
        if k == 2 {
            dz = 1.0;
        }
        y.push(dr * x - e2 * dq * x3 / 6.0);
        y.push(dr - e2 * dq * x2 / 2.0);
        y.push(dz + dck * x2 / 2.0);
        y.push(dck * x);
    }
    (x, y)
}

pub(crate) fn shoot_traj(eps: f64, alpha: f64, lambda: f64, ell: f64, dense: bool) -> Result<Trajectory, ArclengthError> {
    if !(alpha > -1.0 && alpha < 0.0 && lambda > 0.0 && ell > 0.0 && lambda.is_finite() && ell.is_finite()) {
        return Err(ArclengthError::Domain(format!("bad shooting data alpha={alpha} lambda={lambda} ell={ell}")));
    }
    let e2 = eps * eps;
    let sys = VariationalSystem::new(N, NP, rhs(e2, lambda, ell), jacobians(e2, lambda, ell));
    let (x0, y0) = start(e2, alpha, lambda, ell);
    let events = [
        EventSpec::new(|_x, y: &[f64]| 1.0 + y[2] - 1e-10, Direction::Falling, true),
        EventSpec::new(|_x, y: &[f64]| y[0], Direction::Falling, true),
        // Minima of r′.
        EventSpec::new(move |_x, y: &[f64]| rhs_r2(e2, lambda, ell, y), Direction::Rising, false),
    ];
    let tr = integrate(|t, z, dz| sys.eval(t, z, dz), &y0, (x0, 1.0), &cfg(dense), &events)?;
    if tr.terminated_by.is_some() {
        return Err(ArclengthError::Singular { lambda, ell });
    }
    Ok(tr)
}

fn rhs_r2(e2: f64, lambda: f64, ell: f64, y: &[f64]) -> f64 {
    let g = 1.0 / ((1.0 + y[2]) * (1.0 + y[2]));
    -e2 * lambda * ell * y[3] * g + e2 * y[3] * y[3] / y[0]
}

fn min_r_prime(tr: &Trajectory) -> f64 {
    tr.events.iter().filter(|e| e.index == 2).map(|e| e.y[1]).fold(tr.last()[1].min(tr.state(0)[1]), f64::min)
}

pub fn shoot_eval(eps: f64, alpha: f64, lambda: f64, ell: f64) -> Result<ShootEval, ArclengthError> {
    let tr = shoot_traj(eps, alpha, lambda, ell, false)?;
    let y = tr.last();
    let jacobian = DMatrix::from_fn(2, NP, |i, k| y[N + k * N + if i == 0 { 0 } else { 2 }]);
    Ok(ShootEval { residual: [y[0] - 1.0, y[2]], jacobian, min_r_prime: min_r_prime(&tr) })
}

pub(crate) const NEWTON_TOL: f64 = 1e-11;

/// Newton on F(λ, ℓ) = (r(1) − 1, z(1)) from `guess`.
pub fn shoot_arclength(eps: f64, alpha: f64, guess: (f64, f64)) -> Result<ParametricProfile, ArclengthError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(ArclengthError::Domain(format!("eps must be nonnegative, got {eps}")));
    }
    if !(alpha > -1.0 && alpha < 0.0) {
        return Err(ArclengthError::Domain(format!("alpha must lie in (-1, 0), got {alpha}")));
    }
    let opts = NewtonOptions { tol: NEWTON_TOL, max_iter: 40, max_halvings: 30 };
    let res = newton_solve_joint(
        |x, _need| {
            let e = shoot_eval(eps, alpha, x[0], x[1]).ok()?;
            let j = e.jacobian.columns(0, 2).into_owned();
            Some((e.residual.to_vec(), Some(j)))
        },
        &[guess.0, guess.1],
        &opts,
    )?;
    build_profile(eps, alpha, res.root[0], res.root[1], res.trace)
}

pub(crate) fn build_profile(eps: f64, alpha: f64, lambda: f64, ell: f64, newton_trace: Vec<f64>) -> Result<ParametricProfile, ArclengthError> {
    let tr = shoot_traj(eps, alpha, lambda, ell, true)?;
    let x0 = tr.t[0];
    let n = PROFILE_POINTS;
    let mut p = ParametricProfile {
        eps,
        alpha,
        lambda,
        ell,
        s_grid: vec![0.0],
        r: vec![0.0],
        z: vec![alpha],
        r_prime: vec![1.0],
        z_prime: vec![0.0],
        min_r_prime: min_r_prime(&tr) / ell,
        multivalued_flag: false,
        newton_trace,
    };
    p.multivalued_flag = p.min_r_prime < 0.0;
    for i in 1..n {
        // x0 + (1 − x0) can round past the end of the trajectory.
        let x = (x0 + (1.0 - x0) * i as f64 / (n - 1) as f64).min(tr.last_t());
        let y = tr.eval(x).ok_or_else(|| ArclengthError::Domain(format!("profile abscissa {x} outside the trajectory")))?;
        p.s_grid.push(ell * x);
        p.r.push(y[0]);
        p.r_prime.push(y[1] / ell);
        p.z.push(y[2]);
        p.z_prime.push(y[3] / ell);
    }
    Ok(p)
}
