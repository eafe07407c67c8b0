use mems_core::mems1d::solve_bvp_1d;
use mems_core::mems2d_arclength::shoot_arclength;
use mems_core::mems2d_radial::solve_bvp_2d;
use proptest::prelude::*;

// ε = 0 on (−1, 1): the first integral u'² = 2λ(1/d − 1/(1+u)), d = 1 + α,
// integrates in closed form to x(0) = 1, giving λ(d) explicitly.
fn lambda_standard(alpha: f64) -> f64 {
    let d = 1.0 + alpha;
    let s = (1.0 - d).sqrt();
    let i = s + d * ((1.0 + s) / d.sqrt()).ln();
    0.5 * d * i * i
}

#[test]
fn standard_model_matches_closed_form() {
    for alpha in [-0.05, -0.2, -0.4, -0.6, -0.8, -0.95] {
        let sols = solve_bvp_1d(0.0, alpha).unwrap();
        assert!(!sols.is_empty(), "alpha {alpha}");
        let exact = lambda_standard(alpha);
        for s in &sols {
            assert!((s.lambda - exact).abs() < 1e-8 * exact, "alpha {alpha}: {} vs {exact}", s.lambda);
        }
    }
}

fn arc_length(eps: f64, r: &[f64], up: &[f64]) -> f64 {
    let f = |k: usize| (1.0 + eps * eps * up[k] * up[k]).sqrt();
    (1..r.len()).map(|i| 0.5 * (f(i) + f(i - 1)) * (r[i] - r[i - 1])).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // The graph and arc-length formulations describe the same solution while
    // the profile is single valued.
    #[test]
    fn radial_and_arclength_agree(eps in 0.1f64..1.0, alpha in -0.9f64..-0.1) {
        let rad = solve_bvp_2d(eps, alpha, None).unwrap();
        prop_assume!(rad.single_valued);
        let ell = arc_length(eps, &rad.profile.r, &rad.profile.u_prime);
        let arc = shoot_arclength(eps, alpha, (rad.lambda * 1.02, ell * 1.01)).unwrap();
        prop_assert!((arc.lambda - rad.lambda).abs() < 1e-7 * rad.lambda, "{} vs {}", arc.lambda, rad.lambda);
        prop_assert!((arc.ell - ell).abs() < 1e-3 * ell);
        prop_assert!(!arc.multivalued_flag);
    }
}
