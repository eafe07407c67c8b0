use super::ArclengthError;
use crate::mems2d_radial::{branch_lambda, BranchPoint, FarFieldTable};
use crate::{LAMBDA0, OMEGA};
use serde::Serialize;
use std::f64::consts::SQRT_2;

/// Two-term parametric branch λ = λ₀ − δ(4/3)Ã₁ sin(φ̃₁ − √2 ln δ), δ₀ = ε²/δ.
pub fn asymptotic_branch_parametric(eps: f64, delta_grid: &[f64], table: &FarFieldTable) -> Result<Vec<BranchPoint>, ArclengthError> {
    delta_grid
        .iter()
        .map(|&delta| {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(ArclengthError::Domain(format!("delta must lie in (0, 1), got {delta}")));
            }
            let (a, phi) = table.eval(eps * eps / delta)?;
            Ok(BranchPoint { delta, abs_u0: 1.0 - delta, lambda: branch_lambda(delta, a, phi) })
        })
        .collect()
}

/// Outer-expansion constants. ℓ₀ = 1 and λ₀ = 4/9 are implied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OuterCoeffs2D {
    pub eps: f64,
    pub ell1: f64,
    pub ell2: f64,
    pub a1: f64,
    pub phi1: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Chosen so K₂ = 0.
    pub c2: f64,
    /// Free sine coefficient of the homogeneous part of z₂; the cosine one is
    /// fixed by z₂(1).
    pub hom_sin: f64,
}

impl OuterCoeffs2D {
    /// A₁ = Ã₁/δ₀, φ₁ = φ̃₁ − √2 ln δ, ℓ₁ = 2/3; ℓ₂ and λ₂ are left as inputs.
    pub fn from_matching(eps: f64, delta: f64, a_tilde1: f64, phi_tilde1: f64, ell2: f64, lambda2: f64) -> Result<Self, ArclengthError> {
        if !(eps > 0.0 && delta > 0.0 && delta < 1.0) {
            return Err(ArclengthError::Domain(format!("need eps > 0 and delta in (0, 1), got eps={eps} delta={delta}")));
        }
        let delta0 = eps * eps / delta;
        Ok(Self::new(eps, 2.0 / 3.0, ell2, a_tilde1 / delta0, phi_tilde1 - SQRT_2 * delta.ln(), lambda2, 0.0))
    }

    pub fn new(eps: f64, ell1: f64, ell2: f64, a1: f64, phi1: f64, lambda2: f64, hom_sin: f64) -> Self {
        let sp = phi1.sin();
        let lambda1 = (8.0 - 12.0 * ell1 - 36.0 * a1 * sp) / 27.0;
        let c2 = 2.0 / 27.0 - 2.0 * ell1 / 3.0 + ell1 * ell1 - ell2 - 2.0 / 9.0 * OMEGA * a1 * phi1.cos() - 20.0 / 27.0 * a1 * sp;
        OuterCoeffs2D { eps, ell1, ell2, a1, phi1, lambda1, lambda2, c2, hom_sin }
    }

    fn k1(&self, s: f64) -> f64 {
        let a = OMEGA * s.ln() + self.phi1;
        (2.0 + 4.0 * SQRT_2 * self.a1 * a.cos() - 16.0 * self.a1 * a.sin()) / 27.0
    }

    pub fn k2(&self) -> f64 {
        let (l1, a1, p1) = (self.ell1, self.a1, self.phi1);
        2.0 / 27.0 - 2.0 * l1 / 3.0 + l1 * l1 - self.ell2 - self.c2 - 2.0 / 9.0 * OMEGA * a1 * p1.cos() - 20.0 / 27.0 * a1 * p1.sin()
    }

    fn k3(&self, s: f64) -> f64 {
        let a = OMEGA * s.ln() + self.phi1;
        let a1 = self.a1;
        2.0 / 81.0 + a1 * a1 / 2.0 - 58.0 * SQRT_2 / 81.0 * a1 * a.cos() - 20.0 / 81.0 * a1 * a.sin() + 5.0 / 38.0 * a1 * a1 * (2.0 * a).cos() + 2.0 * SQRT_2 / 19.0 * a1 * a1 * (2.0 * a).sin()
    }

    fn k4(&self) -> f64 {
        let (l1, a1, p1) = (self.ell1, self.a1, self.phi1);
        (4.0 - 36.0 * l1 + 54.0 * l1 * l1 - 54.0 * self.ell2 - 54.0 * self.c2 - 8.0 * SQRT_2 * a1 * p1.cos() - 40.0 * a1 * p1.sin()) / 81.0
    }

    fn k5(&self) -> f64 {
        let (l1, a1, p1) = (self.ell1, self.a1, self.phi1);
        (48.0 * l1 - 36.0 * l1 * l1 - 16.0 - 162.0 * a1 * a1 + 243.0 * self.lambda2 + 108.0 * self.c2) / 324.0
            + (9.0 * a1 * a1 * (2.0 * p1).cos() - 2.0 * a1 * (3.0 * l1 - 2.0) * p1.sin()) / 18.0
    }

    /// z₂(1) from the boundary condition z(ℓ) = 0.
    pub fn z2_at_one(&self) -> f64 {
        let (l1, a1, p1) = (self.ell1, self.a1, self.phi1);
        l1 * (15.0 * l1 - 8.0) / 27.0 - 2.0 * self.ell2 / 3.0 + 2.0 * a1 * l1 / 3.0 * (p1.sin() - SQRT_2 * p1.cos())
    }

    /// r₂(1) from r(ℓ) = 1.
    pub fn r2_at_one(&self) -> f64 {
        self.ell1 * (self.ell1 - LAMBDA0) - self.ell2
    }

    fn hom_cos(&self) -> f64 {
        self.z2_at_one() - (self.k3(1.0) + self.k4() + 4.0 / 3.0 * self.a1 * self.phi1.sin() + self.k5())
    }

    pub fn r1(&self, s: f64) -> f64 {
        (2.0 / 3.0 - self.ell1) * s - 2.0 / 3.0 * s.cbrt()
    }

    pub fn z1(&self, s: f64) -> f64 {
        (27.0 * self.lambda1 + 8.0 - 12.0 * self.ell1) / 36.0 * s.powf(2.0 / 3.0) - 4.0 / 9.0 + self.a1 * (OMEGA * s.ln() + self.phi1).sin()
    }

    pub fn r2(&self, s: f64) -> f64 {
        let c = s.cbrt();
        self.k1(s) / c + self.k2() + (6.0 * self.ell1 - 4.0 + 36.0 * self.a1 * self.phi1.sin()) / 27.0 * c + self.c2 * s
    }

    pub fn z2(&self, s: f64) -> f64 {
        let c = s.cbrt();
        let w = OMEGA * s.ln();
        self.k3(s) / (c * c) + self.k4() / c + 4.0 / 3.0 * self.a1 * self.phi1.sin() + self.hom_sin * w.sin() + self.hom_cos() * w.cos() + self.k5() * c * c
    }

    /// Right-hand sides of r₂″ = M₁/s^{7/3} + M₂/s^{5/3} and
    /// z₂″ + z₂′/s + 2λ₀z₂/s² = 2r₂/(3s^{7/3}) − 2r₂′/(9s^{4/3}) − M₃/s² + M₄/s^{4/3} − M₅/s^{8/3}.
    fn m_terms(&self, s: f64) -> [f64; 5] {
        let a = OMEGA * s.ln() + self.phi1;
        let (l1, a1, sp) = (self.ell1, self.a1, self.phi1.sin());
        let m1 = (144.0 * SQRT_2 * a1 * a.cos() + 144.0 * a1 * a.sin() + 8.0) / 243.0;
        let m2 = (8.0 - 12.0 * l1 - 72.0 * a1 * sp) / 243.0;
        let m3 = 32.0 * (3.0 * l1 - 2.0 - 9.0 * a1 * sp) / 729.0;
        let m4 = (243.0 * self.lambda2 - 16.0 + 48.0 * l1 - 36.0 * l1 * l1 - 36.0 * a1 * (3.0 * l1 - 2.0) * sp - 324.0 * a1 * a1 * sp * sp) / 243.0;
        let m5 = 4.0 * (4.0 + 54.0 * SQRT_2 * a1 * a.cos() + 180.0 * a1 * a.sin()) / 729.0 - 4.0 / 3.0 * a1 * a1 * a.sin().powi(2);
        [m1, m2, m3, m4, m5]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OuterPoint {
    pub s: f64,
    pub r: f64,
    pub z: f64,
    pub r1: f64,
    pub z1: f64,
    pub r2: f64,
    pub z2: f64,
    /// Relative residuals of r₂, z₂ in their second-order ODEs.
    pub r2_residual: f64,
    pub z2_residual: f64,
}

/// Residual tolerance for the closed forms in their ODEs.
pub const APPC_RESIDUAL_TOL: f64 = 1e-8;

fn derivs(f: impl Fn(f64) -> f64, s: f64) -> (f64, f64) {
    // Sixth-order centred stencils.
    let h = 1e-2 * s;
    let v: Vec<f64> = (-3..=3).map(|k| f(s + k as f64 * h)).collect();
    let d1 = (-v[0] + 9.0 * v[1] - 45.0 * v[2] + 45.0 * v[4] - 9.0 * v[5] + v[6]) / (60.0 * h);
    let d2 = (2.0 * v[0] - 27.0 * v[1] + 270.0 * v[2] - 490.0 * v[3] + 270.0 * v[4] - 27.0 * v[5] + 2.0 * v[6]) / (180.0 * h * h);
    (d1, d2)
}

/// r = s + ε²r₁ + ε⁴r₂, z = −1 + s^{2/3} + ε²z₁ + ε⁴z₂, with the second-order
/// closed forms checked against their ODEs by finite differences.
pub fn outer_solution_appc(s: f64, c: &OuterCoeffs2D) -> Result<OuterPoint, ArclengthError> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(ArclengthError::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    let e2 = c.eps * c.eps;
    let (r1, z1, r2, z2) = (c.r1(s), c.z1(s), c.r2(s), c.z2(s));
    // The stencil reaches 3% past s; the closed forms are smooth there.
    let (_, r2pp) = derivs(|x| c.r2(x), s);
    let (r2p, _) = derivs(|x| c.r2(x), s);
    let (z2p, z2pp) = derivs(|x| c.z2(x), s);
    let [m1, m2, m3, m4, m5] = c.m_terms(s);
    let r_lhs = r2pp;
    let r_rhs = m1 / s.powf(7.0 / 3.0) + m2 / s.powf(5.0 / 3.0);
    let r_scale = r_lhs.abs() + (m1 / s.powf(7.0 / 3.0)).abs() + (m2 / s.powf(5.0 / 3.0)).abs();
    let z_terms = [
        z2pp,
        z2p / s,
        2.0 * LAMBDA0 * z2 / (s * s),
        -2.0 * r2 / (3.0 * s.powf(7.0 / 3.0)),
        2.0 * r2p / (9.0 * s.powf(4.0 / 3.0)),
        m3 / (s * s),
        -m4 / s.powf(4.0 / 3.0),
        m5 / s.powf(8.0 / 3.0),
    ];
    let z_res: f64 = z_terms.iter().sum();
    let z_scale: f64 = z_terms.iter().map(|t| t.abs()).sum();
    Ok(OuterPoint {
        s,
        r: s + e2 * r1 + e2 * e2 * r2,
        z: -1.0 + s.powf(2.0 / 3.0) + e2 * z1 + e2 * e2 * z2,
        r1,
        z1,
        r2,
        z2,
        r2_residual: (r_lhs - r_rhs).abs() / r_scale.max(1e-300),
        z2_residual: z_res.abs() / z_scale.max(1e-300),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs() -> OuterCoeffs2D {
        OuterCoeffs2D::from_matching(0.1, 0.002, 3.1, 2.2, 0.0, 0.0).unwrap()
    }

    #[test]
    fn first_order_boundary_rows() {
        let c = coeffs();
        assert!((c.lambda1 + 4.0 / 3.0 * c.a1 * c.phi1.sin()).abs() < 1e-14);
        assert!((c.z1(1.0) + 2.0 * c.ell1 / 3.0).abs() < 1e-14);
        assert!((c.r1(1.0) + c.ell1).abs() < 1e-14);
        assert!(c.k2().abs() < 1e-14);
    }

    #[test]
    fn second_order_boundary_rows() {
        for hom in [0.0, 0.7] {
            let mut c = coeffs();
            c.hom_sin = hom;
            assert!((c.r2(1.0) - c.r2_at_one()).abs() < 1e-13);
            assert!((c.z2(1.0) - c.z2_at_one()).abs() < 1e-13);
        }
    }

    #[test]
    fn closed_forms_solve_their_odes() {
        for (ell1, ell2, l2, hom) in [(2.0 / 3.0, 0.0, 0.0, 0.0), (0.5, 0.3, -0.2, 0.4)] {
            let base = coeffs();
            let c = OuterCoeffs2D::new(0.1, ell1, ell2, base.a1, base.phi1, l2, hom);
            for i in 0..=18 {
                let s = 0.1 + 0.05 * i as f64;
                let p = outer_solution_appc(s, &c).unwrap();
                assert!(p.r2_residual < APPC_RESIDUAL_TOL, "s={s} r {}", p.r2_residual);
                assert!(p.z2_residual < APPC_RESIDUAL_TOL, "s={s} z {}", p.z2_residual);
            }
        }
    }

    #[test]
    fn rejects_axis() {
        assert!(outer_solution_appc(0.0, &coeffs()).is_err());
    }

    #[test]
    fn leading_order_is_singular_solution() {
        // (1/r)(r u′)′ = λ₀/(1+u)² for u = r^{2/3} − 1.
        let u = |r: f64| r.powf(2.0 / 3.0) - 1.0;
        let s = 0.3;
        let h = 1e-4;
        let lhs = ((s + h) * (u(s + 2.0 * h) - u(s)) / (2.0 * h) - (s - h) * (u(s) - u(s - 2.0 * h)) / (2.0 * h)) / (2.0 * h) / s;
        assert!((lhs - LAMBDA0 / (1.0 + u(s)).powi(2)).abs() < 1e-6);
    }
}
