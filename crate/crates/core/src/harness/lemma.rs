//! Oracle checks of the Gaussian algebra: closed form against the diagram
//! series and Monte Carlo, and the conditional covariance against a generic
//! Schur complement.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{LemmaConfig, Mutation};
use crate::covmodel::{bargmann_fock, cauchy, CovarianceModel, RegressionConvention, SharedCov};
use crate::error::{Error, Result};
use crate::gauss_algebra::{
    conditional_cov, generic_regression, joint_covariance, quadrant_expectation, quadrant_expectation_mc,
    quadrant_expectation_series, QuadrantCorr,
};
use crate::rng::{stream, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub cases: usize,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowVerdict {
    pub row: usize,
    pub closed_form: Option<f64>,
    pub series: Option<f64>,
    pub expected: Option<f64>,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub checks: Vec<Check>,
    pub rows: Vec<RowVerdict>,
}

/// Closed form, possibly with a deliberate fault.
fn closed_form(c: &QuadrantCorr, mutation: Option<Mutation>) -> Result<f64> {
    let v = quadrant_expectation(c)?;
    Ok(match mutation {
        None => v,
        Some(Mutation::FlipRho14) => v - 2.0 * c.rho14 * c.rho23 / (2.0 * PI * (1.0 - c.rho34 * c.rho34).sqrt()),
    })
}

/// A random correlation matrix from normalized Gaussian rows, kept when
/// `|ρ34| <= max_rho34`.
pub fn random_correlations(count: usize, max_rho34: f64, seed: u64) -> Vec<QuadrantCorr> {
    let mut rng = stream(seed, 0, Purpose::Oracle);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dim = rng.random_range(2..=6);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let dot = |i: usize, j: usize| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>();
        let c = QuadrantCorr {
            rho12: dot(0, 1),
            rho13: dot(0, 2),
            rho14: dot(0, 3),
            rho23: dot(1, 2),
            rho24: dot(1, 3),
            rho34: dot(2, 3),
        };
        if c.rho34.abs() <= max_rho34 && c.min_eigenvalue() >= -1e-12 {
            out.push(c);
        }
    }
    out
}

pub fn series_check(sets: &[QuadrantCorr], cfg: &LemmaConfig) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for c in sets {
        let d = (closed_form(c, cfg.mutation)? - quadrant_expectation_series(c, cfg.series_order)?).abs();
        worst = worst.max(d);
    }
    Ok(Check {
        name: format!("closed form vs diagram series (Q = {})", cfg.series_order),
        passed: worst < cfg.series_tol,
        max_error: worst,
        cases: sets.len(),
        detail: None,
    })
}

/// Largest deviation in standard errors over the spot cases.
pub fn monte_carlo_check(sets: &[QuadrantCorr], cfg: &LemmaConfig, seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (i, c) in sets.iter().take(cfg.mc_cases).enumerate() {
        let (m, se) = quadrant_expectation_mc(c, cfg.mc_samples, seed.wrapping_add(i as u64))?;
        worst = worst.max((m - closed_form(c, cfg.mutation)?).abs() / se);
    }
    Ok(Check {
        name: format!("closed form vs Monte Carlo ({} samples)", cfg.mc_samples),
        passed: worst < cfg.mc_sigmas,
        max_error: worst,
        cases: cfg.mc_cases.min(sets.len()),
        detail: Some("max_error in standard errors".into()),
    })
}

/// The differentiable built-in models.
pub fn builtin_models() -> Vec<(String, CovarianceModel)> {
    let bf: SharedCov = Arc::new(bargmann_fock());
    let ca: SharedCov = Arc::new(cauchy());
    let mut out = vec![
        ("iid bargmann_fock".to_string(), CovarianceModel::iid(bf.clone())),
        ("iid cauchy".to_string(), CovarianceModel::iid(ca.clone())),
        (
            "cauchy x bargmann_fock".to_string(),
            CovarianceModel::independent(ca.clone(), bf.clone()),
        ),
        (
            "ou x bargmann_fock".to_string(),
            CovarianceModel::independent(Arc::new(crate::covmodel::ornstein_uhlenbeck()), bf.clone()),
        ),
    ];
    for rho1 in [0.3, 0.7] {
        out.push((
            format!("regression rho1={rho1}"),
            CovarianceModel::regression(bf.clone(), ca.clone(), rho1, RegressionConvention::Consistent),
        ));
    }
    out.into_iter()
        .map(|(n, m)| (n, m.expect("built-in models are valid")))
        .collect()
}

pub fn regression_check(cfg: &LemmaConfig, seed: u64) -> Result<Check> {
    let mut rng = stream(seed, 1, Purpose::Oracle);
    let mut worst: f64 = 0.0;
    let models = builtin_models();
    for (_, m) in &models {
        for _ in 0..cfg.regression_lags {
            let t = rng.random_range(0.05..6.0);
            let a = conditional_cov(m, t)?;
            let b = generic_regression(&joint_covariance(m, t)?, t)?;
            worst = worst.max(a.max_abs_diff(&b));
        }
    }
    Ok(Check {
        name: "conditional covariance vs Schur complement".into(),
        passed: worst < cfg.regression_tol,
        max_error: worst,
        cases: models.len() * cfg.regression_lags,
        detail: None,
    })
}

fn custom_rows(path: &Path, cfg: &LemmaConfig) -> Result<Vec<RowVerdict>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("rho") {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = match vals {
            Ok(v) if v.len() == 6 || v.len() == 7 => v,
            _ => {
                out.push(RowVerdict {
                    row: i + 1,
                    closed_form: None,
                    series: None,
                    expected: None,
                    passed: false,
                    error: Some("expected 6 or 7 numeric fields".into()),
                });
                continue;
            }
        };
        let expected = vals.get(6).copied();
        let verdict = QuadrantCorr::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]).and_then(|c| {
            let cf = closed_form(&c, cfg.mutation)?;
            let se = quadrant_expectation_series(&c, cfg.series_order)?;
            Ok((cf, se))
        });
        out.push(match verdict {
            Ok((cf, se)) => RowVerdict {
                row: i + 1,
                closed_form: Some(cf),
                series: Some(se),
                expected,
                passed: (cf - se).abs() < cfg.series_tol && expected.is_none_or(|e| (cf - e).abs() < 1e-6),
                error: None,
            },
            Err(e) => RowVerdict {
                row: i + 1,
                closed_form: None,
                series: None,
                expected,
                passed: false,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(out)
}

pub fn run_lemma_check(cfg: &LemmaConfig, seed: u64) -> Result<LemmaReport> {
    let sets = random_correlations(cfg.random_sets, cfg.max_rho34, seed);
    let mut checks = vec![
        series_check(&sets, cfg)?,
        monte_carlo_check(&sets, cfg, seed)?,
        regression_check(cfg, seed)?,
    ];
    let rows = match &cfg.correlations_csv {
        Some(p) => custom_rows(p, cfg)?,
        None => Vec::new(),
    };
    if !rows.is_empty() {
        let bad = rows.iter().filter(|r| !r.passed).count();
        checks.push(Check {
            name: "custom correlation rows".into(),
            passed: bad == 0,
            max_error: bad as f64,
            cases: rows.len(),
            detail: Some("max_error counts failing rows".into()),
        });
    }
    Ok(LemmaReport { checks, rows })
}
