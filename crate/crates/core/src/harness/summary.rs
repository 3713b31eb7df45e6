//! Theory-only summary of a model: every moment the library can compute for
//! it, with the reason for each one it cannot.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::covmodel::CovarianceModel;
use crate::error::Result;
use crate::moments::{
    chaos_projection_variances, expectation_rate, variance_bound_two_alpha, variance_rate_general,
    variance_rate_independent, variance_wt_route, ChaosVariances, MomentReport, TwoAlphaBound, WtRoute,
};

/// A value or the error that prevented it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Value(T),
    Unavailable(String),
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Value(v),
            Err(e) => Outcome::Unavailable(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HorizonMoments {
    pub horizon: f64,
    pub expectation: Option<f64>,
    pub general: Outcome<MomentReport>,
    pub wt_route: Outcome<WtRoute>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentsSummary {
    pub model: String,
    pub class: String,
    pub expectation_rate: Outcome<f64>,
    pub independent: Outcome<MomentReport>,
    pub chaos: Outcome<ChaosVariances>,
    pub two_alpha: Outcome<TwoAlphaBound>,
    pub horizons: Vec<HorizonMoments>,
}

pub fn moments_summary(model: &CovarianceModel, cfg: &ExperimentConfig) -> MomentsSummary {
    let q = &cfg.quadrature;
    let rate = expectation_rate(model);
    let horizons = cfg
        .grid
        .horizons
        .iter()
        .map(|&t| HorizonMoments {
            horizon: t,
            expectation: rate.as_ref().ok().map(|r| r * t),
            general: variance_rate_general(model, t, q).into(),
            wt_route: variance_wt_route(model, t, q).into(),
        })
        .collect();
    let eps = cfg.smoothing.clone().unwrap_or_default().epsilons;
    let t_last = cfg.grid.horizons.last().copied().unwrap_or(1.0);
    MomentsSummary {
        model: model.describe(),
        class: format!("{:?}", model.classify()),
        expectation_rate: rate.into(),
        independent: variance_rate_independent(model, q).into(),
        chaos: chaos_projection_variances(model, q).into(),
        two_alpha: variance_bound_two_alpha(model, &eps, t_last, q).into(),
        horizons,
    }
}
