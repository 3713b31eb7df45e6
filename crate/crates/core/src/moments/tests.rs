use std::sync::Arc;

use nalgebra::Matrix4;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::covmodel::{alpha_process, bargmann_fock, cauchy, ornstein_uhlenbeck, RegressionConvention, SharedCov};
use crate::rng::{stream, Purpose};

fn bf() -> SharedCov {
    Arc::new(bargmann_fock())
}

fn iid_bf() -> CovarianceModel {
    CovarianceModel::iid(bf()).unwrap()
}

fn ou_bf() -> CovarianceModel {
    CovarianceModel::independent(Arc::new(ornstein_uhlenbeck()), bf()).unwrap()
}

#[test]
fn pinned_integrals() {
    let q = QuadratureSpec::default();
    let i = integral_i(&iid_bf(), &q).unwrap();
    assert!((i.value - pinned::I_IID_BF).abs() < 1e-9, "{i:?}");
    assert!(i.error < 1e-8);
    let r = variance_rate_independent(&iid_bf(), &q).unwrap();
    assert!((r.v_inf.unwrap() - pinned::V_INF_IID_BF).abs() < 1e-10);
    assert!((r.v_inf_display.unwrap() - pinned::V_INF_DISPLAY_IID_BF).abs() < 1e-9);

    let i = integral_i(&ou_bf(), &q).unwrap();
    assert!((i.value - pinned::I_OU_BF).abs() < 1e-9, "{i:?}");
    assert!((i.exponent + 0.5).abs() < 1e-3);
    let r = variance_rate_independent(&ou_bf(), &q).unwrap();
    assert!((r.v_inf_display.unwrap() - pinned::V_INF_DISPLAY_OU_BF).abs() < 1e-9);
}

#[test]
fn expectation_rate_regression() {
    let m = CovarianceModel::regression(bf(), Arc::new(cauchy()), 0.6, RegressionConvention::Consistent).unwrap();
    let e = expectation_rate(&m).unwrap();
    assert!((e - 0.6 / (2.0 * PI)).abs() < 1e-12, "{e}");
    assert_eq!(expectation_rate(&iid_bf()).unwrap(), 0.0);
}

#[test]
fn general_integrand_agrees_with_independent_form() {
    let q = QuadratureSpec::default();
    for m in [iid_bf(), ou_bf()] {
        let g = variance_rate_general(&m, 1e4, &q).unwrap();
        let ind = variance_rate_independent(&m, &q).unwrap();
        let (a, b) = (g.v_inf.unwrap(), ind.v_inf.unwrap());
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        // h = -2 f' A in the independent case
        for t in [0.05, 0.5, 2.0] {
            let h = general_integrand(&m, t).unwrap();
            let direct = -2.0 * f_prime(&m, t).unwrap() * orthant_angle_fast(&m, t);
            assert!((h - direct).abs() < 1e-9 * (1.0 + h.abs()), "t={t}: {h} {direct}");
        }
    }
}

#[test]
fn small_lag_extrapolation_is_continuous() {
    let m = iid_bf();
    let below = general_integrand(&m, SMALL_LAG_CUTOFF * 0.999_999).unwrap();
    let at = general_integrand(&m, SMALL_LAG_CUTOFF).unwrap();
    assert!((below - at).abs() < 1e-6);
}

#[test]
fn wt_route_identities() {
    let q = QuadratureSpec::default();
    let m = iid_bf();
    let r = variance_wt_route(&m, 10.0, &q).unwrap();
    assert!((r.w_big - r.identity_corrected).abs() < 1e-8, "{r:?}");
    assert!((r.w_big - r.identity_display).abs() > 1.0);
    let g = variance_rate_general(&m, 10.0, &q).unwrap();
    assert!((r.v_t - g.v_t.unwrap()).abs() < 1e-8, "{} {}", r.v_t, g.v_t.unwrap());
}

#[test]
fn chaos_variances_bargmann_fock() {
    let q = QuadratureSpec::default();
    let c = chaos_projection_variances(&iid_bf(), &q).unwrap();
    assert!((c.var_i2_limit - 0.02245).abs() < 5e-5, "{c:?}");
    assert!((c.var_i2_spectral.unwrap() - c.var_i2_limit).abs() < 1e-8);
    let i4 = c.var_i4_limit.unwrap();
    assert!((i4 - 0.00794).abs() < 5e-5, "{i4}");
    assert!((c.var_i4_spectral.unwrap() - i4).abs() < 1e-5, "{c:?}");
    // the fourth chaos needs a twice differentiable r1
    let c = chaos_projection_variances(&ou_bf(), &q).unwrap();
    assert!(c.var_i4_limit.is_none());
    // the chaos projections together stay below the variance
    let v = variance_rate_independent(&iid_bf(), &q).unwrap().v_inf.unwrap();
    assert!(0.02245 + 0.00794 < v);
}

#[test]
fn first_chaos_decays() {
    let m = iid_bf();
    let a = var_i1(&m, 10.0).unwrap();
    let b = var_i1(&m, 100.0).unwrap();
    assert!(a > 0.0 && (a / b - 10.0).abs() < 1e-6);
}

#[test]
fn divergent_integral_is_reported() {
    let q = QuadratureSpec::default();
    let m = CovarianceModel::independent(
        Arc::new(alpha_process(0.8).unwrap()),
        Arc::new(alpha_process(1.0).unwrap()),
    )
    .unwrap();
    assert!(matches!(integral_i(&m, &q), Err(Error::Divergence(_))));
    assert!(matches!(
        variance_bound_two_alpha(&m, &[0.1], 20.0, &q),
        Err(Error::Hypothesis(_))
    ));
    assert!(matches!(variance_rate_general(&m, 10.0, &q), Err(Error::Capability(_))));
}

#[test]
fn non_independent_models_rejected_by_closed_form() {
    let m = CovarianceModel::regression(bf(), Arc::new(cauchy()), 0.4, RegressionConvention::Consistent).unwrap();
    let q = QuadratureSpec::default();
    assert!(matches!(variance_rate_independent(&m, &q), Err(Error::Hypothesis(_))));
    let g = variance_rate_general(&m, 50.0, &q).unwrap();
    assert!(g.v_t.unwrap() > 0.0 && g.err < 1e-6);
}

#[test]
fn two_alpha_smoothing_approaches_bound() {
    let q = QuadratureSpec::default();
    let m = CovarianceModel::independent(
        Arc::new(alpha_process(1.5).unwrap()),
        Arc::new(alpha_process(1.2).unwrap()),
    )
    .unwrap();
    let b = variance_bound_two_alpha(&m, &[0.2, 0.1, 0.05], 50.0, &q).unwrap();
    assert!(b.bound.is_finite() && b.bound > 0.0);
    assert!(b.shrinking, "{b:?}");
    assert!(b.rows.last().unwrap().gap < b.rows[0].gap);
}

#[test]
fn smoothed_covariance_is_a_correlation() {
    let m = CovarianceModel::independent(
        Arc::new(alpha_process(1.5).unwrap()),
        Arc::new(alpha_process(1.2).unwrap()),
    )
    .unwrap();
    let s = smoothed_covariance(&m, 0.1).unwrap();
    assert!(s.lambda > 0.0);
    assert!(s.one_minus_rho(0.0).abs() < 1e-12);
    // curvature from the second difference of ρ_ε
    let h = 1e-3;
    let fd = 2.0 * s.one_minus_rho(h) / (h * h);
    assert!((fd - s.lambda).abs() < 1e-3 * s.lambda, "{fd} {}", s.lambda);
    let d = s.rho_derivative(0.3).unwrap();
    let fd = (s.rho(0.3 + 1e-4) - s.rho(0.3 - 1e-4)) / 2e-4;
    assert!((d - fd).abs() < 1e-6);
}

/// Monte Carlo over the four-dimensional conditional law.
#[test]
fn conditional_expectation_matches_monte_carlo() {
    let m = CovarianceModel::regression(bf(), Arc::new(cauchy()), 0.5, RegressionConvention::Consistent).unwrap();
    for t in [0.4, 1.3] {
        let cc = conditional_cov(&m, t).unwrap();
        let exact = cc.quadrant_expectation().unwrap();
        let chol = Matrix4::from_fn(|i, j| cc.matrix[i][j]).cholesky().unwrap().l();
        let mut rng = stream(17, (t * 10.0) as u64, Purpose::Oracle);
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = nalgebra::Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let y = chol * z;
            let v = if y[2] > 0.0 && y[3] > 0.0 { y[0] * y[1] } else { 0.0 };
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "t={t}: {mean} ± {se} vs {exact}");
    }
}
