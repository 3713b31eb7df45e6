//! Two independent alpha-processes: the variance limit `∫ g1 g2` and its
//! approximation by mollifying `X2` with the bump kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{g_ratio, integral_i, orthant_angle_fast, require_independent, QuadratureSpec};
use crate::covmodel::{Component, CovarianceModel};
use crate::error::{Error, Result};
use crate::kernel::{autocorrelation, autocorrelation_derivative};
use crate::quadrature::{gauss_kronrod, gauss_kronrod_pieces, semi_infinite, QuadOptions, QuadResult};

/// Covariance of `ψ_ε * X2`, normalized to unit variance:
/// `r_ε(t) = ∫ K(u) r2(t - εu) du`.
pub struct SmoothedCov<'a> {
    model: &'a CovarianceModel,
    pub epsilon: f64,
    /// `r_ε(0)` before normalization.
    pub variance: f64,
    /// `-ρ_ε''(0)`.
    pub lambda: f64,
    opts: QuadOptions,
}

fn kernel_breaks(extra: &[f64]) -> Vec<f64> {
    let mut b = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
    b.extend(extra.iter().copied().filter(|x| x.abs() < 2.0));
    b.sort_by(|a, c| a.total_cmp(c));
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-15);
    b
}

pub fn smoothed_covariance(model: &CovarianceModel, epsilon: f64) -> Result<SmoothedCov<'_>> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let opts = QuadOptions::with_tol(1e-13, 1e-11);
    let variance = gauss_kronrod_pieces(
        |u| autocorrelation(u) * model.r2(epsilon * u),
        &kernel_breaks(&[]),
        opts,
    )
    .value;
    let mut bad = None;
    let curvature = gauss_kronrod_pieces(
        |u| {
            if u == 0.0 {
                return 0.0;
            }
            match model.require(Component::X2, 1, -epsilon * u) {
                Ok(d) => autocorrelation_derivative(u) * d,
                Err(e) => {
                    bad.get_or_insert(e);
                    0.0
                }
            }
        },
        &kernel_breaks(&[]),
        opts,
    )
    .value
        / epsilon;
    if let Some(e) = bad {
        return Err(e);
    }
    Ok(SmoothedCov {
        model,
        epsilon,
        variance,
        lambda: -curvature / variance,
        opts,
    })
}

impl SmoothedCov<'_> {
    pub fn rho(&self, t: f64) -> f64 {
        1.0 - self.one_minus_rho(t)
    }

    pub fn one_minus_rho(&self, t: f64) -> f64 {
        let e = self.epsilon;
        gauss_kronrod_pieces(
            |u| autocorrelation(u) * (self.model.r2(e * u) - self.model.r2(t - e * u)),
            &kernel_breaks(&[t / e]),
            self.opts,
        )
        .value
            / self.variance
    }

    pub fn rho_derivative(&self, t: f64) -> Result<f64> {
        let e = self.epsilon;
        let kink = t / e;
        let mut bad = None;
        let v = gauss_kronrod_pieces(
            |u| {
                let s = t - e * u;
                if s == 0.0 || u == kink {
                    return 0.0;
                }
                match self.model.require(Component::X2, 1, s) {
                    Ok(d) => autocorrelation(u) * d,
                    Err(err) => {
                        bad.get_or_insert(err);
                        0.0
                    }
                }
            },
            &kernel_breaks(&[kink]),
            self.opts,
        )
        .value;
        match bad {
            Some(e) => Err(e),
            None => Ok(v / self.variance),
        }
    }

    /// `ρ_ε'(t) / sqrt(1 - ρ_ε(t)²)`; tends to `-sqrt(λ_ε)` at zero.
    pub fn g(&self, t: f64) -> Result<f64> {
        if t < 1e-3 * self.epsilon {
            return Ok(-self.lambda.sqrt());
        }
        let om = self.one_minus_rho(t);
        let d = self.rho_derivative(t)?;
        Ok(d / (om * (2.0 - om)).sqrt())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// `∫_0^∞ g1 g_ε`.
    pub integral: f64,
    /// `Var/T` limit of the smoothed problem, `integral / (2π²)`.
    pub v_eps: f64,
    /// `π/2 - f_ε(T) A(T) + ∫_0^T g1 g_ε`.
    pub w_t_eps: f64,
    /// `|integral - I|`.
    pub gap: f64,
    /// Change of `integral` from the previous (larger) epsilon.
    pub step: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoAlphaBound {
    pub alpha1: f64,
    pub alpha2: f64,
    /// `∫_0^∞ g1 g2`, the limsup of the smoothed quantities.
    pub bound: f64,
    pub bound_err: f64,
    /// `bound / (2π²)`.
    pub v_inf: f64,
    pub horizon: f64,
    pub rows: Vec<EpsilonRow>,
    /// Gaps to the bound decrease along the epsilon sequence.
    pub shrinking: bool,
}

/// `∫_0^upper g1 g_ε` after `t = u^m` to absorb the `t^{α1/2 - 1}` behaviour of `g1`.
fn smoothed_integral(
    model: &CovarianceModel,
    s: &SmoothedCov<'_>,
    alpha1: f64,
    upper: f64,
    q: &QuadratureSpec,
) -> Result<QuadResult> {
    let opts = QuadOptions::with_tol(q.abs_tol.max(1e-10), q.rel_tol.max(1e-9));
    let m = 2.0 / alpha1;
    let mut bad = None;
    let mut eval = |t: f64| -> f64 {
        let v = g_ratio(model, Component::X1, t).and_then(|a| Ok(a * s.g(t)?));
        v.unwrap_or_else(|e| {
            bad.get_or_insert(e);
            0.0
        })
    };
    let head_end = upper.min(1.0);
    let u_end = head_end.powf(1.0 / m);
    let mut r = gauss_kronrod(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            m * u.powf(m - 1.0) * eval(u.powf(m))
        },
        0.0,
        u_end,
        opts,
    );
    if upper > 1.0 {
        let finite_end = upper.min(q.t_max);
        let mut b = vec![1.0];
        let mut x = 2.0;
        while x < finite_end {
            b.push(x);
            x *= 2.0;
        }
        b.push(finite_end);
        r = r.combine(gauss_kronrod_pieces(&mut eval, &b, opts));
        if upper.is_infinite() {
            r = r.combine(semi_infinite(&mut eval, q.t_max, opts));
        }
    }
    match bad {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// Variance bound for two independent alpha-processes with `α1 + α2 > 2`,
/// together with the mollified approximations at each `epsilon`.
pub fn variance_bound_two_alpha(
    model: &CovarianceModel,
    epsilons: &[f64],
    horizon: f64,
    q: &QuadratureSpec,
) -> Result<TwoAlphaBound> {
    require_independent(model)?;
    let (a1, a2) = match (model.alpha_params(Component::X1), model.alpha_params(Component::X2)) {
        (Some((a1, _)), Some((a2, _))) => (a1, a2),
        _ => {
            return Err(Error::Hypothesis(
                "both coordinates must be alpha-processes exp(-C|t|^alpha)".into(),
            ))
        }
    };
    if a1 + a2 <= 2.0 {
        return Err(Error::Hypothesis(format!(
            "alpha1 + alpha2 must exceed 2, got {a1} + {a2}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let qq = QuadratureSpec {
        singularity_exponent_hint: Some(0.5 * (a1 + a2) - 2.0),
        ..*q
    };
    let i = integral_i(model, &qq)?;
    let mut rows: Vec<EpsilonRow> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let s = smoothed_covariance(model, eps)?;
        let full = smoothed_integral(model, &s, a1, f64::INFINITY, q)?;
        let partial = smoothed_integral(model, &s, a1, horizon, q)?;
        let w = PI / 2.0 - s.g(horizon)? * orthant_angle_fast(model, horizon) + partial.value;
        rows.push(EpsilonRow {
            epsilon: eps,
            integral: full.value,
            v_eps: full.value / (2.0 * PI * PI),
            w_t_eps: w,
            gap: (full.value - i.value).abs(),
            step: rows.last().map(|p| (full.value - p.integral).abs()),
        });
    }
    let shrinking = rows.windows(2).all(|w| w[1].gap <= w[0].gap);
    Ok(TwoAlphaBound {
        alpha1: a1,
        alpha2: a2,
        bound: i.value,
        bound_err: i.error,
        v_inf: i.value / (2.0 * PI * PI),
        horizon,
        rows,
        shrinking,
    })
}
