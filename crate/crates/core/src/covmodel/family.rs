//! Covariance functions of one lag variable.
//!
//! Built-in families carry analytic derivatives and (where known) closed-form
//! spectral densities. Spectral densities are one-sided:
//! `r(t) = ∫_0^∞ cos(tλ) f(λ) dλ` with `∫_0^∞ f = 1`, i.e. `f` is twice the
//! two-sided density of the symmetric spectral measure.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A real covariance-type function of the lag `t`.
///
/// The trait does not assume evenness so that cross-covariances use the same
/// interface.
pub trait CovFunction: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;

    /// The `order`-th derivative at `t`, or `None` where it does not exist
    /// (the origin for non-differentiable families) or is not implemented.
    fn derivative(&self, order: u32, t: f64) -> Option<f64>;

    /// `1 - value(t)`, computed without cancellation where the family allows.
    fn one_minus(&self, t: f64) -> f64 {
        1.0 - self.value(t)
    }

    fn spectral_density(&self, _lambda: f64) -> Option<f64> {
        None
    }

    /// True when the function is twice differentiable at the origin, i.e. the
    /// process is mean-square differentiable.
    fn differentiable_at_origin(&self) -> bool;

    fn describe(&self) -> String;

    /// `(alpha, C)` when `r(t) = 1 - C|t|^alpha + o(|t|^alpha)` with `alpha < 2`.
    fn alpha_params(&self) -> Option<(f64, f64)> {
        None
    }

    fn as_family(&self) -> Option<&FamilyCov> {
        None
    }
}

pub type SharedCov = Arc<dyn CovFunction>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `exp(-u²/2)`
    BargmannFock,
    /// `1 / (1 + u²/2)`
    Cauchy,
    /// `exp(-|u|^alpha)`, `0 < alpha < 2`; `alpha = 1` is Ornstein-Uhlenbeck.
    Exponential { alpha: f64 },
}

/// A built-in family evaluated at `t / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyCov {
    pub family: Family,
    pub scale: f64,
}

impl FamilyCov {
    pub fn new(family: Family, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Parameter(format!("scale must be positive, got {scale}")));
        }
        if let Family::Exponential { alpha } = family {
            if !(alpha > 0.0 && alpha < 2.0) {
                return Err(Error::Parameter(format!(
                    "alpha-process index must lie in (0, 2), got {alpha}"
                )));
            }
        }
        Ok(FamilyCov { family, scale })
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        FamilyCov {
            family: self.family,
            scale,
        }
    }

    fn base(&self, order: u32, u: f64) -> Option<f64> {
        match self.family {
            Family::BargmannFock => {
                let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
                Some(sign * hermite_he(order, u) * (-0.5 * u * u).exp())
            }
            Family::Cauchy => {
                let v = u / SQRT_2;
                let z = Complex64::new(v, -1.0).powi(-(order as i32 + 1));
                let mut factorial = 1.0;
                for k in 2..=order {
                    factorial *= k as f64;
                }
                let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
                Some(sign * factorial * z.im * SQRT_2.powi(-(order as i32)))
            }
            Family::Exponential { alpha } => exponential_derivative(alpha, order, u),
        }
    }

    fn base_spectral(&self, lambda: f64) -> Option<f64> {
        let lambda = lambda.abs();
        match self.family {
            Family::BargmannFock => Some((2.0 / PI).sqrt() * (-0.5 * lambda * lambda).exp()),
            Family::Cauchy => Some(SQRT_2 * (-SQRT_2 * lambda).exp()),
            Family::Exponential { alpha: 1.0 } => Some(FRAC_2_PI / (1.0 + lambda * lambda)),
            Family::Exponential { .. } => None,
        }
    }

    /// Second spectral moment `-r''(0)` when finite.
    pub fn lambda2(&self) -> Option<f64> {
        match self.family {
            Family::BargmannFock | Family::Cauchy => Some(1.0 / (self.scale * self.scale)),
            Family::Exponential { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::BargmannFock => "bargmann_fock",
            Family::Cauchy => "cauchy",
            Family::Exponential { alpha: 1.0 } => "ou",
            Family::Exponential { .. } => "alpha",
        }
    }
}

impl CovFunction for FamilyCov {
    fn value(&self, t: f64) -> f64 {
        self.base(0, t / self.scale).unwrap_or(f64::NAN)
    }

    fn derivative(&self, order: u32, t: f64) -> Option<f64> {
        self.base(order, t / self.scale)
            .map(|d| d / self.scale.powi(order as i32))
    }

    fn one_minus(&self, t: f64) -> f64 {
        let u = t / self.scale;
        match self.family {
            Family::BargmannFock => -(-0.5 * u * u).exp_m1(),
            Family::Cauchy => {
                let q = 0.5 * u * u;
                q / (1.0 + q)
            }
            Family::Exponential { alpha } => -(-u.abs().powf(alpha)).exp_m1(),
        }
    }

    fn spectral_density(&self, lambda: f64) -> Option<f64> {
        self.base_spectral(self.scale * lambda).map(|f| self.scale * f)
    }

    fn differentiable_at_origin(&self) -> bool {
        !matches!(self.family, Family::Exponential { .. })
    }

    fn describe(&self) -> String {
        match self.family {
            Family::Exponential { alpha } if alpha != 1.0 => {
                format!("alpha(alpha={alpha}, scale={})", self.scale)
            }
            _ => format!("{}(scale={})", self.name(), self.scale),
        }
    }

    fn alpha_params(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Exponential { alpha } => Some((alpha, self.scale.powf(-alpha))),
            _ => None,
        }
    }

    fn as_family(&self) -> Option<&FamilyCov> {
        Some(self)
    }
}

/// Probabilists' Hermite polynomial by the three-term recurrence.
fn hermite_he(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Derivatives of `exp(-|u|^alpha)` away from the origin (orders 0..=3).
fn exponential_derivative(alpha: f64, order: u32, u: f64) -> Option<f64> {
    if order == 0 {
        return Some((-u.abs().powf(alpha)).exp());
    }
    if u == 0.0 || order > 3 {
        return None;
    }
    let x = u.abs();
    let e = (-x.powf(alpha)).exp();
    let p1 = alpha * x.powf(alpha - 1.0);
    let p2 = alpha * (alpha - 1.0) * x.powf(alpha - 2.0);
    let p3 = alpha * (alpha - 1.0) * (alpha - 2.0) * x.powf(alpha - 3.0);
    let d = match order {
        1 => -p1 * e,
        2 => (p1 * p1 - p2) * e,
        _ => (-p3 + 3.0 * p1 * p2 - p1 * p1 * p1) * e,
    };
    // odd derivatives of an even function are odd
    let sign = if u < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
    Some(sign * d)
}

pub fn bargmann_fock() -> FamilyCov {
    FamilyCov {
        family: Family::BargmannFock,
        scale: 1.0,
    }
}

pub fn cauchy() -> FamilyCov {
    FamilyCov {
        family: Family::Cauchy,
        scale: 1.0,
    }
}

pub fn ornstein_uhlenbeck() -> FamilyCov {
    FamilyCov {
        family: Family::Exponential { alpha: 1.0 },
        scale: 1.0,
    }
}

/// `exp(-|t|^alpha)`; rejects `alpha` outside `(0, 2)`.
pub fn alpha_process(alpha: f64) -> Result<FamilyCov> {
    FamilyCov::new(Family::Exponential { alpha }, 1.0)
}

/// A user-supplied covariance known only through its values. Derivatives are
/// two-level Richardson-extrapolated central differences.
#[derive(Clone)]
pub struct NumericCov {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    spectral: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    differentiable: bool,
    name: String,
}

impl fmt::Debug for NumericCov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericCov")
            .field("name", &self.name)
            .field("differentiable", &self.differentiable)
            .finish()
    }
}

impl NumericCov {
    pub fn new(name: impl Into<String>, differentiable: bool, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        NumericCov {
            f: Arc::new(f),
            spectral: None,
            differentiable,
            name: name.into(),
        }
    }

    pub fn with_spectral_density(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.spectral = Some(Arc::new(f));
        self
    }

    /// Derivative together with the Richardson error estimate.
    pub fn derivative_with_error(&self, order: u32, t: f64) -> Option<(f64, f64)> {
        let f = &self.f;
        let scale = t.abs().max(1.0);
        match order {
            0 => Some((f(t), 0.0)),
            1 => {
                let h = 1e-3 * scale;
                let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
                let (coarse, fine) = (d(h), d(0.5 * h));
                Some(((4.0 * fine - coarse) / 3.0, (fine - coarse).abs() / 3.0))
            }
            2 => {
                let h = 5e-3 * scale;
                let f0 = f(t);
                let d = |h: f64| (f(t + h) - 2.0 * f0 + f(t - h)) / (h * h);
                let (coarse, fine) = (d(h), d(0.5 * h));
                Some(((4.0 * fine - coarse) / 3.0, (fine - coarse).abs() / 3.0))
            }
            3 => {
                let h = 1e-2 * scale;
                let d2 = |x: f64| self.derivative_with_error(2, x).map(|p| p.0).unwrap_or(f64::NAN);
                let v = (d2(t + h) - d2(t - h)) / (2.0 * h);
                Some((v, h * h))
            }
            _ => None,
        }
    }
}

impl CovFunction for NumericCov {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn derivative(&self, order: u32, t: f64) -> Option<f64> {
        if !self.differentiable && t == 0.0 && order > 0 {
            return None;
        }
        self.derivative_with_error(order, t).map(|p| p.0)
    }

    fn spectral_density(&self, lambda: f64) -> Option<f64> {
        self.spectral.as_ref().map(|f| f(lambda))
    }

    fn differentiable_at_origin(&self) -> bool {
        self.differentiable
    }

    fn describe(&self) -> String {
        format!("numeric({})", self.name)
    }
}

/// `inner(speed * t)`: the time change used to normalize `lambda_22` to one.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub inner: SharedCov,
    pub speed: f64,
}

impl CovFunction for Rescaled {
    fn value(&self, t: f64) -> f64 {
        self.inner.value(self.speed * t)
    }

    fn derivative(&self, order: u32, t: f64) -> Option<f64> {
        self.inner
            .derivative(order, self.speed * t)
            .map(|d| d * self.speed.powi(order as i32))
    }

    fn one_minus(&self, t: f64) -> f64 {
        self.inner.one_minus(self.speed * t)
    }

    fn spectral_density(&self, lambda: f64) -> Option<f64> {
        self.inner.spectral_density(lambda / self.speed).map(|f| f / self.speed)
    }

    fn differentiable_at_origin(&self) -> bool {
        self.inner.differentiable_at_origin()
    }

    fn describe(&self) -> String {
        format!("{}[t*{}]", self.inner.describe(), self.speed)
    }

    fn alpha_params(&self) -> Option<(f64, f64)> {
        self.inner.alpha_params().map(|(a, c)| (a, c * self.speed.powf(a)))
    }
}

/// Apply the time change `t -> speed * t`, keeping built-in families analytic.
pub fn rescale(f: &SharedCov, speed: f64) -> SharedCov {
    if speed == 1.0 {
        return f.clone();
    }
    match f.as_family() {
        Some(fam) => Arc::new(fam.with_scale(fam.scale / speed)),
        None => Arc::new(Rescaled {
            inner: f.clone(),
            speed,
        }),
    }
}

/// `r_1(t) = -rho1² r_2''(t) + rho2² r_Z(t)`: covariance of
/// `rho1 X_2'(t) + rho2 Z(t)` with `Z` independent of `X_2`.
#[derive(Clone, Debug)]
pub struct RegressionX1 {
    pub r2: SharedCov,
    pub rz: SharedCov,
    pub rho1: f64,
}

impl RegressionX1 {
    fn rho2_sq(&self) -> f64 {
        1.0 - self.rho1 * self.rho1
    }
}

impl CovFunction for RegressionX1 {
    fn value(&self, t: f64) -> f64 {
        let d2 = self.r2.derivative(2, t).unwrap_or(f64::NAN);
        -self.rho1 * self.rho1 * d2 + self.rho2_sq() * self.rz.value(t)
    }

    fn derivative(&self, order: u32, t: f64) -> Option<f64> {
        let d2 = self.r2.derivative(order + 2, t)?;
        let dz = self.rz.derivative(order, t)?;
        Some(-self.rho1 * self.rho1 * d2 + self.rho2_sq() * dz)
    }

    fn one_minus(&self, t: f64) -> f64 {
        // -r2''(0) = 1, so 1 - r1 = rho1² (1 + r2'') + rho2² (1 - rZ)
        let d2 = self.r2.derivative(2, t).unwrap_or(f64::NAN);
        self.rho1 * self.rho1 * (1.0 + d2) + self.rho2_sq() * self.rz.one_minus(t)
    }

    fn spectral_density(&self, lambda: f64) -> Option<f64> {
        let f2 = self.r2.spectral_density(lambda)?;
        let fz = self.rz.spectral_density(lambda)?;
        Some(self.rho1 * self.rho1 * lambda * lambda * f2 + self.rho2_sq() * fz)
    }

    fn differentiable_at_origin(&self) -> bool {
        // needs r2 four times differentiable; built-in smooth families are
        self.rz.differentiable_at_origin() && self.r2.derivative(4, 0.0).is_some()
    }

    fn describe(&self) -> String {
        format!(
            "regression(rho1={}, r2={}, rZ={})",
            self.rho1,
            self.r2.describe(),
            self.rz.describe()
        )
    }
}

/// `coef * r_2'(t)`, the cross-covariance of the regression model. Odd in `t`.
#[derive(Clone, Debug)]
pub struct DerivativeCross {
    pub r2: SharedCov,
    pub coef: f64,
}

impl CovFunction for DerivativeCross {
    fn value(&self, t: f64) -> f64 {
        self.coef * self.r2.derivative(1, t).unwrap_or(f64::NAN)
    }

    fn derivative(&self, order: u32, t: f64) -> Option<f64> {
        self.r2.derivative(order + 1, t).map(|d| self.coef * d)
    }

    fn differentiable_at_origin(&self) -> bool {
        self.r2.derivative(3, 0.0).is_some()
    }

    fn describe(&self) -> String {
        format!("{} * d/dt {}", self.coef, self.r2.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn analytic_derivatives_match_central_differences() {
        let families: Vec<FamilyCov> = vec![
            bargmann_fock(),
            cauchy(),
            ornstein_uhlenbeck(),
            alpha_process(1.2).unwrap(),
            FamilyCov::new(Family::BargmannFock, 0.7).unwrap(),
        ];
        for fam in &families {
            for i in 0..=99 {
                let t = 0.1 + 9.9 * i as f64 / 99.0;
                for order in 1..=2u32 {
                    let lower = |x: f64| fam.derivative(order - 1, x).unwrap();
                    let fd = central(&lower, t, 1e-5);
                    let exact = fam.derivative(order, t).unwrap();
                    let tol = 1e-6 * exact.abs().max(1e-3);
                    assert!(
                        (fd - exact).abs() <= tol,
                        "{} order {order} at t={t}: {exact} vs {fd}",
                        fam.describe()
                    );
                }
            }
        }
    }

    #[test]
    fn families_are_even_and_bounded() {
        for fam in [
            bargmann_fock(),
            cauchy(),
            ornstein_uhlenbeck(),
            alpha_process(0.5).unwrap(),
        ] {
            assert_eq!(fam.value(0.0), 1.0);
            for k in 0..100 {
                let t = 0.173 * k as f64;
                assert_eq!(fam.value(t), fam.value(-t));
                assert!(fam.value(t).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn one_minus_is_accurate_near_origin() {
        let bf = bargmann_fock();
        let t = 1e-6;
        assert!((bf.one_minus(t) - 0.5e-12).abs() < 1e-24);
        let ou = ornstein_uhlenbeck();
        assert!((ou.one_minus(1e-9) - 1e-9).abs() < 1e-17);
    }

    #[test]
    fn alpha_family_bounds() {
        assert!(alpha_process(2.0).is_err());
        assert!(alpha_process(0.0).is_err());
        let ou = alpha_process(1.0).unwrap();
        assert_eq!(ou.name(), "ou");
        assert!((ou.value(1.5) - (-1.5f64).exp()).abs() < 1e-15);
        assert_eq!(ou.derivative(1, 0.0), None);
        assert_eq!(ou.alpha_params(), Some((1.0, 1.0)));
    }

    #[test]
    fn numeric_derivatives_track_analytic() {
        let numeric = NumericCov::new("bf", true, |t| (-0.5 * t * t).exp());
        let bf = bargmann_fock();
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            for order in 1..=2 {
                let (v, err) = numeric.derivative_with_error(order, t).unwrap();
                let exact = bf.derivative(order, t).unwrap();
                assert!((v - exact).abs() < 1e-8, "order {order} t {t}: {v} vs {exact}");
                assert!(err < 1e-5);
            }
        }
    }

    #[test]
    fn rescale_keeps_family_analytic() {
        let f: SharedCov = Arc::new(FamilyCov::new(Family::BargmannFock, 2.0).unwrap());
        let g = rescale(&f, 2.0);
        assert!(g.as_family().is_some());
        assert!((g.derivative(2, 0.0).unwrap() + 1.0).abs() < 1e-15);
    }
}
