//! Theoretical moments of the winding number `N_W([0,T])`.
//!
//! Conventions used throughout (all lags in the normalized time where
//! `-r2''(0) = 1`):
//!
//! * `E[N_W]/T = -r12'(0) / (2π)`.
//! * `Var(N_W)/T = 1/(2π) + (1/(2π²)) ∫_0^T (1 - t/T) h(t) dt` with
//!   `h = 2π E_c / sqrt(1 - r2²) - r12'(0)²`. The constant `1/(2π)` is the
//!   diagonal (each crossing paired with itself) term.
//! * Independent case: `h = -2 f' A` with `f = r2'/sqrt(1-r2²)` and
//!   `A = arccos sqrt((1-r1)/2) = π P{X1(0)>0, X1(t)>0}`, whence
//!   `V∞ = I / (2π²)`, `I = ∫_0^∞ g1 g2`, `g_i = r_i'/sqrt(1-r_i²)`.
//!
//! The closed form `(1/π)(π/2 + I)` printed with the independent-case theorem
//! is reported alongside as `v_inf_display`.

mod two_alpha;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::covmodel::{Component, CovarianceModel, ModelClass};
use crate::error::{Error, Result};
use crate::gauss_algebra::{chaos_coefficients, conditional_cov};
use crate::quadrature::{gauss_kronrod, gauss_kronrod_pieces, semi_infinite, tanh_sinh, QuadOptions, QuadResult};

pub use two_alpha::{smoothed_covariance, variance_bound_two_alpha, EpsilonRow, SmoothedCov, TwoAlphaBound};

/// Lags below this use a linear extrapolation of the variance integrand.
pub const SMALL_LAG_CUTOFF: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Improper integrals are evaluated on `[0, t_max]` plus a mapped tail.
    pub t_max: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Exponent `β` of a `t^β` endpoint singularity at zero, if known.
    pub singularity_exponent_hint: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            t_max: 60.0,
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            singularity_exponent_hint: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Parameter(
                "quadrature t_max and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    fn opts(&self) -> QuadOptions {
        QuadOptions::with_tol(self.abs_tol, self.rel_tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GeneralIntegrand,
    IndependentClosed,
    ChaosProjection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub expectation_rate: f64,
    #[serde(rename = "V_T")]
    pub v_t: Option<f64>,
    pub horizon: Option<f64>,
    #[serde(rename = "V_inf")]
    pub v_inf: Option<f64>,
    /// `(1/π)(π/2 + I)`, only for the independent closed form.
    #[serde(rename = "V_inf_display")]
    pub v_inf_display: Option<f64>,
    /// `I = ∫_0^∞ g1 g2`, only for the independent closed form.
    pub integral_i: Option<f64>,
    pub err: f64,
    pub method: Method,
    pub chaos: Option<ChaosVariances>,
}

fn require_differentiable(model: &CovarianceModel) -> Result<()> {
    if model.x2_differentiable() {
        Ok(())
    } else {
        Err(Error::Capability("X2 must be mean-square differentiable".into()))
    }
}

fn require_independent(model: &CovarianceModel) -> Result<()> {
    match model.classify() {
        ModelClass::Independent | ModelClass::Iid => Ok(()),
        other => Err(Error::Hypothesis(format!(
            "independent-case formula needs r12 ≡ 0, model is {other:?}"
        ))),
    }
}

/// `E[N_W([0,T])] / T = -r12'(0) / (2π)`.
pub fn expectation_rate(model: &CovarianceModel) -> Result<f64> {
    require_differentiable(model)?;
    let c0 = model.require(Component::Cross, 1, 0.0)?;
    // adding zero turns -0 into 0 for the independent case
    Ok(-c0 / (2.0 * PI) + 0.0)
}

/// `1 - r²` for a marginal, without cancellation near the origin.
fn one_minus_sq(model: &CovarianceModel, c: Component, t: f64) -> f64 {
    match c {
        Component::X1 => model.one_minus_r1(t) * (1.0 + model.r1(t)),
        _ => model.one_minus_r2(t) * (1.0 + model.r2(t)),
    }
}

/// `g_i(t) = r_i'(t) / sqrt(1 - r_i(t)²)` for `t > 0`.
fn g_ratio(model: &CovarianceModel, c: Component, t: f64) -> Result<f64> {
    let d = model.require(c, 1, t)?;
    Ok(d / one_minus_sq(model, c, t).sqrt())
}

/// `h(t) = 2π E_c / sqrt(1 - r2²) - r12'(0)²` evaluated directly (`t > 0`).
fn general_integrand_raw(model: &CovarianceModel, t: f64) -> Result<f64> {
    let cc = conditional_cov(model, t)?;
    let ec = cc.quadrant_expectation()?;
    let c0 = model.require(Component::Cross, 1, 0.0)?;
    Ok(2.0 * PI * ec / one_minus_sq(model, Component::X2, t).sqrt() - c0 * c0)
}

/// The variance integrand `h(t)`; below [`SMALL_LAG_CUTOFF`] it is continued
/// linearly from its values at the cutoff and twice the cutoff, where the
/// direct formula is dominated by cancellation.
pub fn general_integrand(model: &CovarianceModel, t: f64) -> Result<f64> {
    if t >= SMALL_LAG_CUTOFF {
        return general_integrand_raw(model, t);
    }
    let h1 = general_integrand_raw(model, SMALL_LAG_CUTOFF)?;
    let h2 = general_integrand_raw(model, 2.0 * SMALL_LAG_CUTOFF)?;
    Ok(h1 + (t - SMALL_LAG_CUTOFF) * (h2 - h1) / SMALL_LAG_CUTOFF)
}

fn graded_breaks(upper: f64) -> Vec<f64> {
    let mut b = vec![0.0, SMALL_LAG_CUTOFF];
    let mut x = 4.0 * SMALL_LAG_CUTOFF;
    while x < 1.0 && x < upper {
        b.push(x);
        x *= 4.0;
    }
    let mut x = 1.0;
    while x < upper {
        b.push(x);
        x += 1.0;
    }
    b.push(upper);
    b.dedup();
    b
}

/// Integrate a fallible integrand; the first error aborts.
fn integrate_checked(f: impl Fn(f64) -> Result<f64>, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    let mut failure = None;
    let r = gauss_kronrod_pieces(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        breaks,
        opts,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// `Var(N_W([0,T]))/T` from the general Kac-Rice integrand, plus the
/// `T → ∞` value of the same integral as `V_inf`.
pub fn variance_rate_general(model: &CovarianceModel, horizon: f64, q: &QuadratureSpec) -> Result<MomentReport> {
    require_differentiable(model)?;
    q.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let opts = q.opts();
    let h = |t: f64| general_integrand(model, t);
    let upper = horizon.min(q.t_max);
    let weighted = integrate_checked(|t| Ok((1.0 - t / horizon) * h(t)?), &graded_breaks(upper), opts)?;
    let full = integrate_checked(h, &graded_breaks(q.t_max), opts)?;
    // size of the neglected tail, judged from the last half of the range
    let tail = integrate_checked(|t| Ok(h(t)?.abs()), &[0.5 * q.t_max, q.t_max], opts)?.value;
    let diagonal = model.lambda22().unwrap_or(1.0).sqrt() / (2.0 * PI);
    let scale = 1.0 / (2.0 * PI * PI);
    let truncated = if horizon > q.t_max { tail } else { 0.0 };
    Ok(MomentReport {
        expectation_rate: expectation_rate(model)?,
        v_t: Some(diagonal + scale * weighted.value),
        horizon: Some(horizon),
        v_inf: Some(diagonal + scale * full.value),
        v_inf_display: None,
        integral_i: None,
        err: scale * (weighted.error + full.error + tail + truncated),
        method: Method::GeneralIntegrand,
        chaos: None,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntegralI {
    pub value: f64,
    /// Head by tanh-sinh.
    pub tanh_sinh: f64,
    /// Head by Gauss-Kronrod after the substitution `t = u^m`.
    pub graded: f64,
    /// Estimated exponent `β` of `g1 g2 ~ t^β` at zero.
    pub exponent: f64,
    pub error: f64,
}

/// Local power-law exponent of `|f|` at zero from two small lags.
fn endpoint_exponent(f: &impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (a, b) = (1e-8, 1e-6);
    let (fa, fb) = (f(a)?.abs(), f(b)?.abs());
    if fa == 0.0 || fb == 0.0 {
        return Ok(0.0);
    }
    Ok((fb / fa).ln() / (b / a).ln())
}

/// `∫_0^upper g1 g2 dt` by two rules, or the improper integral when `upper` is
/// infinite. Divergence at zero is detected from the local exponent.
pub fn integral_i_partial(model: &CovarianceModel, upper: f64, q: &QuadratureSpec) -> Result<IntegralI> {
    let g = |t: f64| -> Result<f64> { Ok(g_ratio(model, Component::X1, t)? * g_ratio(model, Component::X2, t)?) };
    let beta = match q.singularity_exponent_hint {
        Some(b) => b,
        None => endpoint_exponent(&g)?,
    };
    if beta <= -1.0 + 1e-3 {
        return Err(Error::Divergence(format!(
            "g1 g2 ~ t^{beta:.3} at 0 is not integrable; the integral of the \
             product of r_i'/sqrt(1-r_i²) must converge"
        )));
    }
    let opts = q.opts();
    let head_end = upper.min(1.0);
    let mut failure: Option<Error> = None;
    let mut eval = |t: f64| match g(t) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let ts = tanh_sinh(&mut eval, 0.0, head_end, q.abs_tol.max(1e-14), 14);
    let m = if beta < 0.0 { 1.0 / (beta + 1.0) } else { 1.0 };
    let graded = gauss_kronrod(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let t = head_end * u.powf(m);
            head_end * m * u.powf(m - 1.0) * eval(t)
        },
        0.0,
        1.0,
        opts,
    );
    let mut tail = QuadResult::zero();
    if upper > 1.0 {
        let finite_end = upper.min(q.t_max);
        let mut b = vec![1.0];
        let mut x = 2.0;
        while x < finite_end {
            b.push(x);
            x *= 2.0;
        }
        b.push(finite_end);
        tail = gauss_kronrod_pieces(&mut eval, &b, opts);
        if upper.is_infinite() {
            tail = tail.combine(semi_infinite(&mut eval, q.t_max, opts));
        } else if upper > q.t_max {
            tail = tail.combine(gauss_kronrod(&mut eval, q.t_max, upper, opts));
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(IntegralI {
        value: ts.value + tail.value,
        tanh_sinh: ts.value,
        graded: graded.value,
        exponent: beta,
        error: (ts.value - graded.value).abs() + ts.error.min(graded.error.max(ts.error)) + tail.error,
    })
}

/// `I = ∫_0^∞ g1 g2 dt`.
pub fn integral_i(model: &CovarianceModel, q: &QuadratureSpec) -> Result<IntegralI> {
    integral_i_partial(model, f64::INFINITY, q)
}

fn require_independent_variance(model: &CovarianceModel) -> Result<()> {
    require_independent(model)?;
    if model.x2_differentiable() {
        return Ok(());
    }
    match (model.alpha_params(Component::X1), model.alpha_params(Component::X2)) {
        (Some((a1, _)), Some((a2, _))) if a1 + a2 > 2.0 => Ok(()),
        (Some((a1, _)), Some((a2, _))) => Err(Error::Hypothesis(format!(
            "two alpha-processes need alpha1 + alpha2 > 2, got {a1} + {a2}"
        ))),
        _ => Err(Error::Hypothesis(
            "X2 must be differentiable, or both coordinates alpha-processes".into(),
        )),
    }
}

/// Independent-case asymptotic variance from `I`.
pub fn variance_rate_independent(model: &CovarianceModel, q: &QuadratureSpec) -> Result<MomentReport> {
    require_independent_variance(model)?;
    q.validate()?;
    let i = integral_i(model, q)?;
    let scale = 1.0 / (2.0 * PI * PI);
    Ok(MomentReport {
        expectation_rate: 0.0,
        v_t: None,
        horizon: None,
        v_inf: Some(scale * i.value),
        v_inf_display: Some(0.5 + i.value / PI),
        integral_i: Some(i.value),
        err: scale * i.error,
        method: Method::IndependentClosed,
        chaos: None,
    })
}

/// The integration-by-parts route in the independent case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WtRoute {
    pub horizon: f64,
    /// `W_T = -∫_0^T f'(t) A(t) dt` by direct quadrature.
    pub w_big: f64,
    /// `w_T = ∫_0^T t f'(t) A(t) dt`.
    pub w_small: f64,
    /// `∫_0^T g1 g2`.
    pub i_t: f64,
    /// `f(T) A(T)`.
    pub boundary: f64,
    /// `1/(2π) + (W_T + w_T/T)/π²`, equal to `Var(N_W)/T`.
    pub v_t: f64,
    /// `W_T/π + w_T/(2πT)` as displayed with the theorem's proof.
    pub v_t_display: f64,
    /// `-π/2 - f(T)A(T) + I_T/2`; matches `w_big`.
    pub identity_corrected: f64,
    /// `π/2 - f(T)A(T) + I_T` as displayed.
    pub identity_display: f64,
    pub err: f64,
}

fn orthant_angle_fast(model: &CovarianceModel, t: f64) -> f64 {
    (0.5 * model.one_minus_r1(t)).sqrt().acos()
}

/// `f'(t)` with `f = r2'/sqrt(1-r2²)`.
fn f_prime(model: &CovarianceModel, t: f64) -> Result<f64> {
    let r2 = model.r2(t);
    let d1 = model.require(Component::X2, 1, t)?;
    let d2 = model.require(Component::X2, 2, t)?;
    let dd = one_minus_sq(model, Component::X2, t);
    Ok((d2 * dd + r2 * d1 * d1) / dd.powf(1.5))
}

pub fn variance_wt_route(model: &CovarianceModel, horizon: f64, q: &QuadratureSpec) -> Result<WtRoute> {
    require_independent(model)?;
    require_differentiable(model)?;
    q.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let opts = q.opts();
    let integrand = |t: f64| -> Result<f64> {
        let t = t.max(SMALL_LAG_CUTOFF * 1e-3);
        if t < SMALL_LAG_CUTOFF {
            let a = f_prime(model, SMALL_LAG_CUTOFF)? * orthant_angle_fast(model, SMALL_LAG_CUTOFF);
            let b = f_prime(model, 2.0 * SMALL_LAG_CUTOFF)? * orthant_angle_fast(model, 2.0 * SMALL_LAG_CUTOFF);
            return Ok(a + (t - SMALL_LAG_CUTOFF) * (b - a) / SMALL_LAG_CUTOFF);
        }
        Ok(f_prime(model, t)? * orthant_angle_fast(model, t))
    };
    let breaks = graded_breaks(horizon);
    let big = integrate_checked(|t| Ok(-integrand(t)?), &breaks, opts)?;
    let small = integrate_checked(|t| Ok(t * integrand(t)?), &breaks, opts)?;
    let i_t = integral_i_partial(model, horizon, q)?;
    let boundary = g_ratio(model, Component::X2, horizon)? * orthant_angle_fast(model, horizon);
    let v_t = 1.0 / (2.0 * PI) + (big.value + small.value / horizon) / (PI * PI);
    Ok(WtRoute {
        horizon,
        w_big: big.value,
        w_small: small.value,
        i_t: i_t.value,
        boundary,
        v_t,
        v_t_display: big.value / PI + small.value / (2.0 * PI * horizon),
        identity_corrected: -PI / 2.0 - boundary + 0.5 * i_t.value,
        identity_display: PI / 2.0 - boundary + i_t.value,
        err: (big.error + small.error / horizon) / (PI * PI),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosVariances {
    /// `lim Var(I_2)`, time domain.
    pub var_i2_limit: f64,
    /// Same through the spectral densities, when available.
    pub var_i2_spectral: Option<f64>,
    /// `lim Var(I_4)`, time domain; independent models with twice
    /// differentiable `r1` only.
    pub var_i4_limit: Option<f64>,
    pub var_i4_spectral: Option<f64>,
    pub err: f64,
}

/// Limits of the second and fourth chaos projection variances.
///
/// `Var(I_2) → (1/(4π²)) ∫_R [r1' r2' + r12'(-t) r12'(t)] dt`, and for
/// independent models `Var(I_4) → (1/(24π²)) ∫_R [r1³(-r2'') - r1 (r2³)''] dt`.
pub fn chaos_projection_variances(model: &CovarianceModel, q: &QuadratureSpec) -> Result<ChaosVariances> {
    require_differentiable(model)?;
    q.validate()?;
    let opts = q.opts();
    model.require(Component::X1, 1, 1.0)?;
    let i2_integrand = |t: f64| -> Result<f64> {
        let a = model.require(Component::X1, 1, t)? * model.require(Component::X2, 1, t)?;
        let b = model.require(Component::Cross, 1, -t)? * model.require(Component::Cross, 1, t)?;
        Ok(a + b)
    };
    // r1' may be singular at 0 (alpha-processes); stay off the endpoint
    let mut breaks = graded_breaks(q.t_max);
    breaks[0] = 0.0;
    let i2 = integrate_checked(|t| if t == 0.0 { Ok(0.0) } else { i2_integrand(t) }, &breaks, opts)?;
    let i2_tail = integrate_checked(|t| Ok(i2_integrand(t)?.abs()), &[0.5 * q.t_max, q.t_max], opts)?.value;
    let var_i2 = 2.0 * i2.value / (4.0 * PI * PI);

    let spectral_i2 = if model.has_spectral(Component::X1) && model.has_spectral(Component::X2) {
        let f = |l: f64| -> f64 {
            let f1 = model.spectral_density(Component::X1, l).unwrap_or(f64::NAN);
            let f2 = model.spectral_density(Component::X2, l).unwrap_or(f64::NAN);
            let cross = model.cross_spectral_sq(l).unwrap_or(f64::NAN);
            l * l * (f1 * f2 + cross)
        };
        let v =
            gauss_kronrod_pieces(f, &[0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0], opts).combine(semi_infinite(f, 32.0, opts));
        if v.value.is_finite() {
            Some(v.value / (4.0 * PI))
        } else {
            None
        }
    } else {
        None
    };

    let r1_smooth = model
        .function(Component::X1)
        .is_some_and(|f| f.differentiable_at_origin());
    let (var_i4, var_i4_spectral) = if model.r12_is_zero() && r1_smooth {
        let i4 = |t: f64| -> Result<f64> {
            let (r1, r2) = (model.r1(t), model.r2(t));
            let d1 = model.require(Component::X2, 1, t)?;
            let d2 = model.require(Component::X2, 2, t)?;
            let r2_cubed_dd = 3.0 * r2 * r2 * d2 + 6.0 * r2 * d1 * d1;
            Ok(-r1.powi(3) * d2 - r1 * r2_cubed_dd)
        };
        let v = integrate_checked(i4, &graded_breaks(q.t_max), opts)?;
        let time = 2.0 * v.value / (24.0 * PI * PI);
        (Some(time), spectral_i4(model))
    } else {
        (None, None)
    };

    Ok(ChaosVariances {
        var_i2_limit: var_i2,
        var_i2_spectral: spectral_i2,
        var_i4_limit: var_i4,
        var_i4_spectral,
        err: 2.0 * (i2.error + i2_tail) / (4.0 * PI * PI),
    })
}

/// Spectral form of the fourth-chaos limit on a uniform frequency grid:
/// `(2π/(24π²)) ∫_R [F1^{*3} λ² F2 + F2^{*3} λ² F1] dλ` with two-sided
/// densities `F = f/2`.
fn spectral_i4(model: &CovarianceModel) -> Option<f64> {
    const L: f64 = 24.0;
    const N: usize = 2400;
    let h = 2.0 * L / N as f64;
    let grid: Vec<f64> = (0..=N).map(|k| -L + h * k as f64).collect();
    let dens = |c: Component| -> Option<Vec<f64>> {
        grid.iter()
            .map(|&l| model.spectral_density(c, l.abs()).map(|f| 0.5 * f))
            .collect()
    };
    let (f1, f2) = (dens(Component::X1)?, dens(Component::X2)?);
    if f1.iter().chain(&f2).any(|v| !v.is_finite()) {
        return None;
    }
    // discrete convolution restricted to the grid; both inputs decay fast
    let conv = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mid = N / 2;
        (0..=N)
            .map(|k| {
                let mut s = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    let idx = k as isize - j as isize + mid as isize;
                    if idx >= 0 && (idx as usize) <= N {
                        s += aj * b[idx as usize];
                    }
                }
                s * h
            })
            .collect()
    };
    let f1_3 = conv(&conv(&f1, &f1), &f1);
    let f2_3 = conv(&conv(&f2, &f2), &f2);
    let total: f64 = (0..=N)
        .map(|k| {
            let l2 = grid[k] * grid[k];
            f1_3[k] * l2 * f2[k] + f2_3[k] * l2 * f1[k]
        })
        .sum::<f64>()
        * h;
    Some(2.0 * PI * total / (24.0 * PI * PI))
}

/// Variance of the first chaos projection, `(a0 d10)² · 2(1 - r2(T)) / T`.
pub fn var_i1(model: &CovarianceModel, horizon: f64) -> Result<f64> {
    require_differentiable(model)?;
    let rho1 = model.regression_meta().map_or(0.0, |m| m.rho1);
    let cc = chaos_coefficients(rho1, 1)?;
    let coef = cc.a[0] * cc.d[1][0];
    Ok(coef * coef * 2.0 * model.one_minus_r2(horizon) / horizon)
}

/// Pinned quadrature constants (`I`, display value, corrected value).
pub mod pinned {
    /// i.i.d. Bargmann-Fock.
    pub const I_IID_BF: f64 = 1.1575786866970585;
    pub const V_INF_DISPLAY_IID_BF: f64 = 0.8684687400113226;
    pub const V_INF_IID_BF: f64 = 0.058_643_621_347_644_42;
    /// Ornstein-Uhlenbeck ⊗ Bargmann-Fock.
    pub const I_OU_BF: f64 = 1.295_287_794_277_272;
    pub const V_INF_DISPLAY_OU_BF: f64 = 0.9123029103716517;
    pub const V_INF_OU_BF: f64 = 0.065_620_046_236_823_05;
}

#[cfg(test)]
mod tests;
