//! Bivariate stationary Gaussian covariance models `(r1, r2, r12)`.

mod conditions;
mod family;
mod spec;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conditions::{check_conditions, spectral_consistency, CheckStatus, ConditionReport, Diagnostic};
pub use family::{
    alpha_process, bargmann_fock, cauchy, ornstein_uhlenbeck, rescale, CovFunction, DerivativeCross, Family, FamilyCov,
    NumericCov, RegressionX1, Rescaled, SharedCov,
};
pub use spec::{CrossSpec, FamilySpec, ModelSpec};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Which covariance function an operation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    X1,
    X2,
    Cross,
}

/// How `r12` is tied to `r2` in the regression model `X1 = rho1 X2' + rho2 Z`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionConvention {
    /// `r12 = rho1 r2'`, the cross-covariance the construction actually has.
    #[default]
    Consistent,
    /// `r12 = rho2 r2'` as printed alongside the example. Not positive
    /// definite in general; samplers reject it.
    PaperDisplay,
}

#[derive(Clone, Debug)]
pub struct RegressionMeta {
    pub rho1: f64,
    pub rho2: f64,
    pub convention: RegressionConvention,
    /// `r12 = cross_coef * r2'`
    pub cross_coef: f64,
    pub rz: SharedCov,
}

#[derive(Clone, Debug)]
pub enum CrossStructure {
    Independent,
    Regression(RegressionMeta),
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelClass {
    CircularlySymmetric,
    ReflexionalSymmetric,
    Independent,
    #[serde(rename = "IID")]
    Iid,
    General,
}

/// A normalized model: `r1(0) = r2(0) = 1`, `r12(0) = 0`, and `-r2''(0) = 1`
/// whenever `X2` is differentiable (time is rescaled at construction).
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    r1: SharedCov,
    r2: SharedCov,
    r12: Option<SharedCov>,
    cross: CrossStructure,
    x2_differentiable: bool,
    time_scale: f64,
    spec: Option<ModelSpec>,
}

impl CovarianceModel {
    /// Validate and normalize. `r12 = None` means `r12 ≡ 0`.
    pub fn new(r1: SharedCov, r2: SharedCov, r12: Option<SharedCov>) -> Result<Self> {
        let cross = if r12.is_none() {
            CrossStructure::Independent
        } else {
            CrossStructure::Custom
        };
        Self::assemble(r1, r2, r12, cross)
    }

    fn assemble(r1: SharedCov, r2: SharedCov, r12: Option<SharedCov>, cross: CrossStructure) -> Result<Self> {
        for (name, f) in [("r1", &r1), ("r2", &r2)] {
            let v0 = f.value(0.0);
            if (v0 - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::Model(format!("{name}(0) = {v0}, expected 1")));
            }
            for &t in &[0.37, 1.3, 4.1] {
                let (a, b) = (f.value(t), f.value(-t));
                if (a - b).abs() > NORMALIZATION_TOL {
                    return Err(Error::Model(format!(
                        "{name} is not even: {name}({t}) = {a}, {name}(-{t}) = {b}"
                    )));
                }
            }
        }
        if let Some(c) = &r12 {
            let v0 = c.value(0.0);
            if v0.abs() > NORMALIZATION_TOL {
                return Err(Error::Model(format!("r12(0) = {v0}, expected 0")));
            }
        }

        let x2_differentiable = r2.differentiable_at_origin();
        let mut time_scale = 1.0;
        let (mut r1, mut r2, mut r12) = (r1, r2, r12);
        if x2_differentiable {
            let lambda22 = -r2
                .derivative(2, 0.0)
                .ok_or_else(|| Error::Capability("r2''(0) unavailable".into()))?;
            if !(lambda22.is_finite() && lambda22 > 0.0) {
                return Err(Error::Model(format!("-r2''(0) = {lambda22} is not a positive number")));
            }
            if (lambda22 - 1.0).abs() > 1e-10 {
                if matches!(cross, CrossStructure::Regression(_)) {
                    return Err(Error::Model("regression model requires -r2''(0) = 1".into()));
                }
                time_scale = 1.0 / lambda22.sqrt();
                r1 = rescale(&r1, time_scale);
                r2 = rescale(&r2, time_scale);
                r12 = r12.map(|c| rescale(&c, time_scale));
            }
        }
        Ok(CovarianceModel {
            r1,
            r2,
            r12,
            cross,
            x2_differentiable,
            time_scale,
            spec: None,
        })
    }

    pub fn independent(r1: SharedCov, r2: SharedCov) -> Result<Self> {
        Self::new(r1, r2, None)
    }

    pub fn iid(r: SharedCov) -> Result<Self> {
        Self::new(r.clone(), r, None)
    }

    /// `X1 = rho1 X2' + rho2 Z`, `rho2 = sqrt(1 - rho1²)`, `Z` independent of `X2`
    /// with covariance `rz`.
    pub fn regression(r2: SharedCov, rz: SharedCov, rho1: f64, convention: RegressionConvention) -> Result<Self> {
        if !(rho1.abs() < 1.0) {
            return Err(Error::Parameter(format!("|rho1| must be < 1, got {rho1}")));
        }
        if !r2.differentiable_at_origin() || r2.derivative(4, 0.0).is_none() {
            return Err(Error::Capability(
                "regression model needs X2 with derivatives up to order 4".into(),
            ));
        }
        let d2 = r2.derivative(2, 0.0).unwrap_or(f64::NAN);
        if (d2 + 1.0).abs() > 1e-10 {
            return Err(Error::Parameter(format!(
                "regression model needs r2''(0) = -1, got {d2}"
            )));
        }
        if (rz.value(0.0) - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Parameter("rZ(0) must equal 1".into()));
        }
        let rho2 = (1.0 - rho1 * rho1).sqrt();
        let cross_coef = match convention {
            RegressionConvention::Consistent => rho1,
            RegressionConvention::PaperDisplay => rho2,
        };
        let r1: SharedCov = Arc::new(RegressionX1 {
            r2: r2.clone(),
            rz: rz.clone(),
            rho1,
        });
        let r12: Option<SharedCov> = if cross_coef == 0.0 {
            None
        } else {
            Some(Arc::new(DerivativeCross {
                r2: r2.clone(),
                coef: cross_coef,
            }))
        };
        let meta = RegressionMeta {
            rho1,
            rho2,
            convention,
            cross_coef,
            rz,
        };
        Self::assemble(r1, r2, r12, CrossStructure::Regression(meta))
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let mut model = spec.build()?;
        model.spec = Some(spec.clone());
        Ok(model)
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn function(&self, c: Component) -> Option<&SharedCov> {
        match c {
            Component::X1 => Some(&self.r1),
            Component::X2 => Some(&self.r2),
            Component::Cross => self.r12.as_ref(),
        }
    }

    pub fn r1(&self, t: f64) -> f64 {
        self.r1.value(t)
    }

    pub fn r2(&self, t: f64) -> f64 {
        self.r2.value(t)
    }

    /// `E[X1(t) X2(0)]`
    pub fn r12(&self, t: f64) -> f64 {
        self.r12.as_ref().map_or(0.0, |c| c.value(t))
    }

    pub fn one_minus_r1(&self, t: f64) -> f64 {
        self.r1.one_minus(t)
    }

    pub fn one_minus_r2(&self, t: f64) -> f64 {
        self.r2.one_minus(t)
    }

    /// Derivative of a component; `r12 ≡ 0` has all derivatives zero.
    pub fn derivative(&self, c: Component, order: u32, t: f64) -> Option<f64> {
        match self.function(c) {
            Some(f) => f.derivative(order, t),
            None => Some(0.0),
        }
    }

    /// Like [`derivative`](Self::derivative) but a missing value is a capability error.
    pub fn require(&self, c: Component, order: u32, t: f64) -> Result<f64> {
        self.derivative(c, order, t)
            .ok_or_else(|| Error::Capability(format!("derivative of order {order} of {c:?} unavailable at t = {t}")))
    }

    pub fn spectral_density(&self, c: Component, lambda: f64) -> Option<f64> {
        match c {
            Component::Cross => None,
            _ => self.function(c).and_then(|f| f.spectral_density(lambda)),
        }
    }

    pub fn has_spectral(&self, c: Component) -> bool {
        self.spectral_density(c, 0.5).is_some()
    }

    /// `|f12(λ)|²` in the one-sided convention, when known.
    pub fn cross_spectral_sq(&self, lambda: f64) -> Option<f64> {
        match &self.cross {
            CrossStructure::Independent => Some(0.0),
            CrossStructure::Regression(m) => self
                .r2
                .spectral_density(lambda)
                .map(|f| (m.cross_coef * lambda * f).powi(2)),
            CrossStructure::Custom => None,
        }
    }

    pub fn x2_differentiable(&self) -> bool {
        self.x2_differentiable
    }

    /// Second spectral moment of `X2` after normalization.
    pub fn lambda22(&self) -> Option<f64> {
        if self.x2_differentiable {
            self.r2.derivative(2, 0.0).map(|d| -d)
        } else {
            None
        }
    }

    /// Factor applied to time at construction (`1` when no rescaling was needed).
    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn cross(&self) -> &CrossStructure {
        &self.cross
    }

    pub fn regression_meta(&self) -> Option<&RegressionMeta> {
        match &self.cross {
            CrossStructure::Regression(m) => Some(m),
            _ => None,
        }
    }

    pub fn r12_is_zero(&self) -> bool {
        self.r12.is_none()
    }

    pub fn alpha_params(&self, c: Component) -> Option<(f64, f64)> {
        self.function(c).and_then(|f| f.alpha_params())
    }

    pub fn classify(&self) -> ModelClass {
        let grid: Vec<f64> = (1..=200).map(|k| 0.05 * k as f64).collect();
        classify(self, &grid)
    }

    pub fn describe(&self) -> String {
        let cross = match &self.cross {
            CrossStructure::Independent => "independent".to_string(),
            CrossStructure::Regression(m) => format!(
                "regression(rho1={}, rho2={}, convention={:?})",
                m.rho1, m.rho2, m.convention
            ),
            CrossStructure::Custom => format!("custom({})", self.r12.as_ref().map_or("0".into(), |c| c.describe())),
        };
        format!("x1={}, x2={}, cross={cross}", self.r1.describe(), self.r2.describe())
    }
}

/// Sub-model classification on a lag grid (tolerance `1e-12`).
pub fn classify(model: &CovarianceModel, lag_grid: &[f64]) -> ModelClass {
    let tol = NORMALIZATION_TOL;
    let same_marginals = lag_grid.iter().all(|&t| (model.r1(t) - model.r2(t)).abs() <= tol);
    let cross_zero = model.r12.is_none()
        || lag_grid
            .iter()
            .all(|&t| model.r12(t).abs() <= tol && model.r12(-t).abs() <= tol);
    if cross_zero {
        return if same_marginals {
            ModelClass::Iid
        } else {
            ModelClass::Independent
        };
    }
    if same_marginals {
        if lag_grid.iter().all(|&t| (model.r12(t) + model.r12(-t)).abs() <= tol) {
            return ModelClass::CircularlySymmetric;
        }
        if lag_grid.iter().all(|&t| (model.r12(t) - model.r12(-t)).abs() <= tol) {
            return ModelClass::ReflexionalSymmetric;
        }
    }
    ModelClass::General
}
