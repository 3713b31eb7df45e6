use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::{CltReport, ExpectationReport, SmoothingReport, VarianceReport};
use super::lemma::LemmaReport;
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportBody {
    Expectation(ExpectationReport),
    Variance(VarianceReport),
    Clt(CltReport),
    Lemma(LemmaReport),
    Smoothing(SmoothingReport),
}

/// A run's outcome. Everything here is a function of the configuration, so
/// reruns produce identical bytes; timing goes in [`Metadata`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub model: String,
    pub seed: u64,
    pub replications: u64,
    /// `None` when no pass criterion applies.
    pub passed: Option<bool>,
    pub warnings: Vec<String>,
    pub result: ReportBody,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Tabular section as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut row = |cells: Vec<String>| {
            out.push_str(&cells.join(","));
            out.push('\n');
        };
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let flag = |v: Option<bool>| v.map_or(String::new(), |x| x.to_string());
        match &self.result {
            ReportBody::Expectation(r) => {
                row(vec!["horizon", "mean", "se", "theory", "passed"]
                    .into_iter()
                    .map(String::from)
                    .collect());
                for h in &r.horizons {
                    row(vec![
                        h.horizon.to_string(),
                        h.mean.to_string(),
                        opt(h.se),
                        h.theory.to_string(),
                        flag(h.passed),
                    ]);
                }
            }
            ReportBody::Variance(r) => {
                row([
                    "horizon",
                    "var_over_t",
                    "ci_low",
                    "ci_high",
                    "v_t",
                    "v_inf",
                    "v_inf_display",
                    "passed",
                ]
                .into_iter()
                .map(String::from)
                .collect());
                for h in &r.horizons {
                    row(vec![
                        h.horizon.to_string(),
                        h.var_over_t.to_string(),
                        h.ci_low.to_string(),
                        h.ci_high.to_string(),
                        opt(h.v_t),
                        h.v_inf.to_string(),
                        opt(h.v_inf_display),
                        flag(h.passed),
                    ]);
                }
            }
            ReportBody::Clt(r) => {
                row([
                    "horizon",
                    "mean_nw",
                    "var_nw",
                    "ks_statistic",
                    "p_value",
                    "v_inf",
                    "skewness",
                    "kurtosis",
                    "passed",
                ]
                .into_iter()
                .map(String::from)
                .collect());
                for h in &r.horizons {
                    row(vec![
                        h.horizon.to_string(),
                        h.mean_nw.to_string(),
                        h.var_nw.to_string(),
                        h.ks.statistic.to_string(),
                        h.ks.p_value.to_string(),
                        h.v_inf.to_string(),
                        h.shape.skewness.to_string(),
                        h.shape.kurtosis.to_string(),
                        flag(h.passed),
                    ]);
                }
            }
            ReportBody::Lemma(r) => {
                row(["check", "passed", "max_error", "detail"]
                    .into_iter()
                    .map(String::from)
                    .collect());
                for c in &r.checks {
                    row(vec![
                        c.name.clone(),
                        c.passed.to_string(),
                        c.max_error.to_string(),
                        format!("{:?}", c.detail),
                    ]);
                }
            }
            ReportBody::Smoothing(r) => {
                row([
                    "epsilon",
                    "mean",
                    "var_over_t",
                    "var_over_t_se",
                    "theory",
                    "bound",
                    "passed",
                ]
                .into_iter()
                .map(String::from)
                .collect());
                for e in &r.epsilons {
                    row(vec![
                        e.epsilon.to_string(),
                        e.mean.to_string(),
                        e.var_over_t.to_string(),
                        e.var_over_t_se.to_string(),
                        e.theory.to_string(),
                        r.bound.to_string(),
                        e.passed.to_string(),
                    ]);
                }
            }
        }
        out
    }

    /// 0 when everything passed (or nothing was judged), 1 on a failed criterion.
    pub fn exit_code(&self) -> i32 {
        match self.passed {
            Some(false) => 1,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub config_hash: String,
    pub created_unix: u64,
    pub elapsed_seconds: f64,
    pub workers: usize,
    pub version: String,
}

impl Metadata {
    pub fn new(cfg: &ExperimentConfig, elapsed_seconds: f64, workers: usize) -> Self {
        Metadata {
            schema_version: SCHEMA_VERSION,
            config_hash: cfg.hash(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            elapsed_seconds,
            workers,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
