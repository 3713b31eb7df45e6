//! Numerical diagnostics for the regularity and mixing hypotheses.
//! Everything here is advisory: a finite computation cannot decide an
//! integrability statement, it can only report how the partial integrals behave.

use serde::{Deserialize, Serialize};

use super::{Component, CovarianceModel};
use crate::quadrature::{gauss_kronrod_pieces, semi_infinite, QuadOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
    NotCheckable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostic {
    pub status: CheckStatus,
    pub value: Option<f64>,
    pub tail: Option<f64>,
    pub detail: String,
}

impl Diagnostic {
    fn skip(status: CheckStatus, detail: impl Into<String>) -> Self {
        Diagnostic {
            status,
            value: None,
            tail: None,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Geman's condition on `X2`.
    pub geman: Diagnostic,
    /// Square integrability of `m(t) = max(|r2|, |r2''|, |r1|, |r12|, |r12'|)`.
    pub mixing_l2: Diagnostic,
    /// Presence of both spectral densities.
    pub spectral: Diagnostic,
    /// `∫_R r2² + (r12')² + (r2')² + |r1 r2''|`.
    pub variance_integrability: Diagnostic,
    /// `|r_i(t)| ≤ 1` on the supplied grid.
    pub bounded: Diagnostic,
}

impl ConditionReport {
    pub fn diagnostics(&self) -> [(&'static str, &Diagnostic); 5] {
        [
            ("geman", &self.geman),
            ("mixing_l2", &self.mixing_l2),
            ("spectral", &self.spectral),
            ("variance_integrability", &self.variance_integrability),
            ("bounded", &self.bounded),
        ]
    }
}

fn breaks(lag_max: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = 1e-3;
    while x < lag_max {
        b.push(x);
        x *= 4.0;
    }
    b.push(lag_max);
    b
}

/// Integral over `[0, lag_max]` and the share coming from `[lag_max/2, lag_max]`.
fn integral_with_tail(f: impl Fn(f64) -> f64, lag_max: f64) -> (f64, f64) {
    let opts = QuadOptions::with_tol(1e-13, 1e-10);
    let total = gauss_kronrod_pieces(&f, &breaks(lag_max), opts).value;
    let tail = gauss_kronrod_pieces(&f, &[0.5 * lag_max, lag_max], opts).value;
    (total, tail)
}

fn tail_status(total: f64, tail: f64) -> CheckStatus {
    if total.is_finite() && tail.is_finite() && tail <= 1e-4 * total.abs() + 1e-12 {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn geman(model: &CovarianceModel, lag_max: f64) -> Diagnostic {
    if !model.x2_differentiable() {
        return Diagnostic::skip(
            CheckStatus::NotApplicable,
            "-r2''(0) is infinite: X2 is not differentiable",
        );
    }
    let Some(lambda22) = model.lambda22() else {
        return Diagnostic::skip(CheckStatus::NotCheckable, "r2''(0) unavailable");
    };
    if model.derivative(Component::X2, 2, 0.5).is_none() {
        return Diagnostic::skip(CheckStatus::NotCheckable, "r2'' unavailable");
    }
    let integrand = |t: f64| (lambda22 + model.derivative(Component::X2, 2, t).unwrap_or(f64::NAN)) / t;
    let top = lag_max.min(1.0);
    let opts = QuadOptions::with_tol(1e-14, 1e-12);
    let mut total = 0.0;
    let mut increments = Vec::new();
    let mut hi = top;
    for _ in 0..10 {
        let lo = 0.25 * hi;
        let inc = gauss_kronrod_pieces(integrand, &[lo, hi], opts).value;
        total += inc;
        increments.push(inc.abs());
        hi = lo;
    }
    let last = *increments.last().unwrap_or(&f64::NAN);
    let converging = total.is_finite() && last <= 1e-8 * total.abs().max(1.0);
    Diagnostic {
        status: if converging {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        value: Some(total),
        tail: Some(last),
        detail: format!("∫_δ^{top} (λ22 + r2''(t))/t dt over δ = {top}·4^-k, k ≤ 10; last increment {last:.3e}"),
    }
}

fn mixing(model: &CovarianceModel, lag_max: f64) -> Diagnostic {
    let d = |c, k, t| model.derivative(c, k, t);
    if d(Component::X2, 2, 1.0).is_none() || d(Component::Cross, 1, 1.0).is_none() {
        return Diagnostic::skip(CheckStatus::NotCheckable, "m(t) needs r2'' and r12'");
    }
    let m = |t: f64| {
        let r12p = d(Component::Cross, 1, t).unwrap_or(f64::NAN).abs();
        let r12m = d(Component::Cross, 1, -t).unwrap_or(f64::NAN).abs();
        [
            model.r2(t).abs(),
            d(Component::X2, 2, t).unwrap_or(f64::NAN).abs(),
            model.r1(t).abs(),
            model.r12(t).abs().max(model.r12(-t).abs()),
            r12p.max(r12m),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    };
    let (total, tail) = integral_with_tail(|t| m(t).powi(2), lag_max);
    Diagnostic {
        status: tail_status(total, tail),
        value: Some(total),
        tail: Some(tail),
        detail: format!("∫_0^{lag_max} m², tail over [{}, {lag_max}]", 0.5 * lag_max),
    }
}

fn spectral(model: &CovarianceModel) -> Diagnostic {
    let (f1, f2) = (model.has_spectral(Component::X1), model.has_spectral(Component::X2));
    Diagnostic {
        status: if f1 && f2 { CheckStatus::Pass } else { CheckStatus::Fail },
        value: None,
        tail: None,
        detail: format!("f1 present: {f1}, f2 present: {f2}"),
    }
}

fn variance_integrability(model: &CovarianceModel, lag_max: f64) -> Diagnostic {
    let d = |c, k, t| model.derivative(c, k, t);
    if !model.x2_differentiable() || d(Component::Cross, 1, 1.0).is_none() {
        return Diagnostic::skip(CheckStatus::NotCheckable, "needs r2', r2'' and r12'");
    }
    let integrand = |t: f64| {
        let r2d = d(Component::X2, 1, t).unwrap_or(f64::NAN);
        let r2dd = d(Component::X2, 2, t).unwrap_or(f64::NAN);
        let c1 = d(Component::Cross, 1, t).unwrap_or(f64::NAN);
        let c2 = d(Component::Cross, 1, -t).unwrap_or(f64::NAN);
        2.0 * (model.r2(t).powi(2) + r2d * r2d + (model.r1(t) * r2dd).abs()) + c1 * c1 + c2 * c2
    };
    let (total, tail) = integral_with_tail(integrand, lag_max);
    Diagnostic {
        status: tail_status(total, tail),
        value: Some(total),
        tail: Some(tail),
        detail: format!("∫_R over |t| ≤ {lag_max}, tail over [{}, {lag_max}]", 0.5 * lag_max),
    }
}

fn bounded(model: &CovarianceModel, grid: &[f64]) -> Diagnostic {
    let worst = grid
        .iter()
        .map(|&t| model.r1(t).abs().max(model.r2(t).abs()))
        .fold(0.0, f64::max);
    let skip_origin = grid.iter().filter(|&&t| t != 0.0).count();
    Diagnostic {
        status: if worst <= 1.0 + 1e-12 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        value: Some(worst),
        tail: None,
        detail: format!("max |r_i(t)| over {} lags ({skip_origin} nonzero)", grid.len()),
    }
}

/// Run all diagnostics. `grid` is used for pointwise checks, `lag_max` bounds
/// the integrals.
pub fn check_conditions(model: &CovarianceModel, lag_max: f64, grid: &[f64]) -> ConditionReport {
    ConditionReport {
        geman: geman(model, lag_max),
        mixing_l2: mixing(model, lag_max),
        spectral: spectral(model),
        variance_integrability: variance_integrability(model, lag_max),
        bounded: bounded(model, grid),
    }
}

/// Largest deviation between `r(t)` and the cosine transform of its spectral
/// density on the given lags, or `None` without a density.
pub fn spectral_consistency(model: &CovarianceModel, c: Component, lags: &[f64]) -> Option<f64> {
    model.spectral_density(c, 0.0)?;
    let opts = QuadOptions::with_tol(1e-13, 1e-12);
    let mut worst: f64 = 0.0;
    for &t in lags {
        let f = |l: f64| (t * l).cos() * model.spectral_density(c, l).unwrap_or(f64::NAN);
        let cut = 60.0;
        let mut b = vec![0.0];
        let step = if t > 0.0 {
            (std::f64::consts::PI / t).min(1.0)
        } else {
            1.0
        };
        let mut x = step;
        while x < cut {
            b.push(x);
            x += step;
        }
        b.push(cut);
        let head = gauss_kronrod_pieces(f, &b, opts).value;
        let tail = semi_infinite(|l| model.spectral_density(c, l).unwrap_or(f64::NAN), cut, opts).value;
        let r = match c {
            Component::X1 => model.r1(t),
            Component::X2 => model.r2(t),
            Component::Cross => model.r12(t),
        };
        worst = worst.max((head - r).abs() + tail.abs());
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::covmodel::{bargmann_fock, cauchy, ornstein_uhlenbeck, RegressionConvention, SharedCov};

    #[test]
    fn bargmann_fock_conditions() {
        let bf: SharedCov = Arc::new(bargmann_fock());
        let m = CovarianceModel::iid(bf).unwrap();
        let grid: Vec<f64> = (0..100).map(|k| 0.1 * k as f64).collect();
        let rep = check_conditions(&m, 12.0, &grid);
        assert_eq!(rep.geman.status, CheckStatus::Pass);
        assert_eq!(rep.mixing_l2.status, CheckStatus::Pass);
        assert!(rep.mixing_l2.tail.unwrap() < 1e-8);
        assert_eq!(rep.spectral.status, CheckStatus::Pass);
        assert_eq!(rep.variance_integrability.status, CheckStatus::Pass);
        assert_eq!(rep.bounded.status, CheckStatus::Pass);
    }

    #[test]
    fn ou_x2_geman_not_applicable() {
        let ou: SharedCov = Arc::new(ornstein_uhlenbeck());
        let m = CovarianceModel::iid(ou).unwrap();
        let rep = check_conditions(&m, 20.0, &[0.0, 1.0]);
        assert_eq!(rep.geman.status, CheckStatus::NotApplicable);
        assert_eq!(rep.mixing_l2.status, CheckStatus::Pass);
    }

    #[test]
    fn regression_model_diagnostics_run() {
        let bf: SharedCov = Arc::new(bargmann_fock());
        let m = CovarianceModel::regression(bf.clone(), bf, 0.3, RegressionConvention::Consistent).unwrap();
        let rep = check_conditions(&m, 12.0, &[0.5, 1.0]);
        assert_eq!(rep.variance_integrability.status, CheckStatus::Pass);
        assert_eq!(rep.spectral.status, CheckStatus::Pass);
    }

    #[test]
    fn spectral_densities_reproduce_covariances() {
        let lags = [0.0, 0.3, 1.0, 2.5, 5.0];
        for f in [bargmann_fock(), cauchy()] {
            let m = CovarianceModel::iid(Arc::new(f)).unwrap();
            let err = spectral_consistency(&m, Component::X2, &lags).unwrap();
            assert!(err < 1e-8, "{err}");
        }
        let bf: SharedCov = Arc::new(bargmann_fock());
        let m = CovarianceModel::regression(bf.clone(), bf, 0.3, RegressionConvention::Consistent).unwrap();
        assert!(spectral_consistency(&m, Component::X1, &lags).unwrap() < 1e-8);
    }
}
