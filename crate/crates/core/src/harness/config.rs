use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covmodel::ModelSpec;
use crate::error::{Error, Result};
use crate::moments::QuadratureSpec;
use crate::pathgen::{Backend, SamplerOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Expectation,
    Variance,
    Clt,
    LemmaCheck,
    Smoothing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Horizons, strictly increasing; each path is simulated once on the
    /// largest and counted on every prefix.
    pub horizons: Vec<f64>,
    pub dt: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            epsilons: default_epsilons(),
        }
    }
}

/// Deliberate faults for testing the checker itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// Flip the sign of the `ρ14 ρ23` term of the closed form.
    FlipRho14,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaConfig {
    pub random_sets: usize,
    pub max_rho34: f64,
    pub series_order: u32,
    pub series_tol: f64,
    pub mc_cases: usize,
    pub mc_samples: usize,
    pub mc_sigmas: f64,
    pub regression_lags: usize,
    pub regression_tol: f64,
    /// CSV of `rho12,rho13,rho14,rho23,rho24,rho34[,expected]` rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlations_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            random_sets: 500,
            max_rho34: 0.9,
            series_order: 400,
            series_tol: 1e-10,
            mc_cases: 20,
            mc_samples: 1_000_000,
            mc_sigmas: 4.0,
            regression_lags: 50,
            regression_tol: 1e-10,
            correlations_csv: None,
            mutation: None,
        }
    }
}

fn default_bootstrap() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelSpec,
    #[serde(default)]
    pub backend: Backend,
    pub grid: GridConfig,
    pub replications: u64,
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub sampler: SamplerOptions,
    /// Also count on the half-step grid and report how often the counts agree.
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaConfig>,
}

impl ExperimentConfig {
    pub fn new(
        kind: ExperimentKind,
        model: ModelSpec,
        horizons: Vec<f64>,
        dt: f64,
        replications: u64,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            kind,
            model,
            backend: Backend::default(),
            grid: GridConfig { horizons, dt },
            replications,
            seed,
            outputs: Outputs::default(),
            quadrature: QuadratureSpec::default(),
            sampler: SamplerOptions::default(),
            refine: false,
            bootstrap_resamples: default_bootstrap(),
            smoothing: None,
            lemma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let h = &self.grid.horizons;
        if h.is_empty() || h.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("horizons must be positive and non-empty".into()));
        }
        if h.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("horizons must be strictly increasing".into()));
        }
        if !(self.grid.dt > 0.0) || self.grid.dt > h[0] {
            return Err(Error::Config(format!(
                "dt = {} must be positive and below the first horizon",
                self.grid.dt
            )));
        }
        if self.bootstrap_resamples < 10 {
            return Err(Error::Config("bootstrap_resamples must be at least 10".into()));
        }
        self.quadrature.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(s.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
