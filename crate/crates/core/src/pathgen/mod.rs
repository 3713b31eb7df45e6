//! Sample paths of `(X1, X2)` on uniform grids.
//!
//! A [`PathSampler`] does the model-dependent setup once (factorization,
//! spectral amplitudes, embedding eigenvalues) and then draws any number of
//! replications, each from its own random stream.

mod cholesky;
mod circulant;
pub mod io;
mod spectral;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::covmodel::{CovarianceModel, CrossStructure, RegressionConvention};
use crate::error::{Error, Result};
use crate::kernel::discrete_bump;

pub use cholesky::MAX_CHOLESKY_POINTS;
pub use spectral::MIN_FREQUENCIES;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub horizon: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, n: usize) -> Result<Self> {
        if n < 2 || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "grid needs n >= 2 and a positive horizon, got n = {n}, T = {horizon}"
            )));
        }
        Ok(GridSpec { horizon, n })
    }

    /// Grid with step as close to `dt` as possible (never coarser).
    pub fn from_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(horizon, steps + 1)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.n - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.time(i)).collect()
    }

    /// Same horizon, half the step; even indices coincide with this grid.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            horizon: self.horizon,
            n: 2 * self.n - 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Cholesky,
    #[default]
    Spectral,
    Circulant,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Cholesky => "cholesky",
            Backend::Spectral => "spectral",
            Backend::Circulant => "circulant",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Backend::Cholesky),
            "spectral" => Ok(Backend::Spectral),
            "circulant" => Ok(Backend::Circulant),
            _ => Err(Error::Config(format!("unknown backend {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// Fraction of embedding eigenvalue mass removed by clipping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clipped_mass: Option<f64>,
    /// Embedding length over the minimal one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub padding: Option<usize>,
    /// Bound on `|r(0) - r_synth(0)|` from truncating the spectrum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance_error: Option<f64>,
    /// Diagonal jitter added to the covariance before factorization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub epsilon: f64,
    pub boundary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: GridSpec,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub dx2: Option<Vec<f64>>,
    pub seed: u64,
    pub replication: u64,
    pub backend: Option<Backend>,
    pub diagnostics: SamplerDiagnostics,
    pub smoothing: Option<Smoothing>,
    /// `Z` is sampled as a process independent of `X2`, not only pointwise.
    pub process_independent_z: bool,
}

impl SamplePath {
    /// A path from explicit data (files, synthetic tests).
    pub fn from_data(grid: GridSpec, x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        if x1.len() != grid.n || x2.len() != grid.n {
            return Err(Error::Parameter(format!(
                "path lengths {} and {} do not match the grid size {}",
                x1.len(),
                x2.len(),
                grid.n
            )));
        }
        if x1.iter().chain(&x2).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("path values must be finite".into()));
        }
        Ok(SamplePath {
            grid,
            x1,
            x2,
            dx2: None,
            seed: 0,
            replication: 0,
            backend: None,
            diagnostics: SamplerDiagnostics::default(),
            smoothing: None,
            process_independent_z: false,
        })
    }

    /// Every `factor`-th point; the horizon shrinks if `factor` does not divide `n - 1`.
    pub fn subsample(&self, factor: usize) -> SamplePath {
        let pick = |v: &Vec<f64>| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        let x1 = pick(&self.x1);
        let n = x1.len();
        SamplePath {
            grid: GridSpec {
                horizon: (n - 1) as f64 * self.grid.dt() * factor as f64,
                n,
            },
            x1,
            x2: pick(&self.x2),
            dx2: self.dx2.as_ref().map(pick),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Number of frequencies for spectral synthesis.
    pub n_freq: usize,
    /// Largest circulant embedding, as a multiple of the minimal one.
    pub max_padding: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            n_freq: 4096,
            max_padding: 8,
        }
    }
}

enum Plan {
    Cholesky(cholesky::CholeskyPlan),
    Spectral(spectral::SpectralPlan),
    Circulant(circulant::CirculantPlan),
}

pub struct PathSampler {
    grid: GridSpec,
    backend: Backend,
    plan: Plan,
    diagnostics: SamplerDiagnostics,
    warnings: Vec<String>,
    process_independent_z: bool,
}

fn check_realizable(model: &CovarianceModel) -> Result<()> {
    if let CrossStructure::Regression(m) = model.cross() {
        if m.convention == RegressionConvention::PaperDisplay {
            return Err(Error::Model(
                "the r12 = rho2 r2' regression convention is not a valid cross-covariance; \
                 use the consistent convention to simulate"
                    .into(),
            ));
        }
    }
    Ok(())
}

impl PathSampler {
    pub fn new(model: &CovarianceModel, grid: GridSpec, backend: Backend, opts: SamplerOptions) -> Result<Self> {
        check_realizable(model)?;
        let mut diagnostics = SamplerDiagnostics::default();
        let mut warnings = Vec::new();
        let plan = match backend {
            Backend::Cholesky => {
                let p = cholesky::CholeskyPlan::new(model, grid)?;
                if p.jitter > 0.0 {
                    diagnostics.jitter = Some(p.jitter);
                }
                Plan::Cholesky(p)
            }
            Backend::Spectral => {
                let p = spectral::SpectralPlan::new(model, grid, opts.n_freq)?;
                diagnostics.covariance_error = Some(p.covariance_error);
                Plan::Spectral(p)
            }
            Backend::Circulant => {
                let p = circulant::CirculantPlan::new(model, grid, opts.max_padding)?;
                diagnostics.clipped_mass = Some(p.clipped_mass);
                diagnostics.padding = Some(p.padding);
                if p.clipped_mass > circulant::WARN_CLIPPED {
                    warnings.push(format!(
                        "circulant embedding clipped {:.3e} of its eigenvalue mass",
                        p.clipped_mass
                    ));
                }
                Plan::Circulant(p)
            }
        };
        Ok(PathSampler {
            grid,
            backend,
            plan,
            diagnostics,
            warnings,
            process_independent_z: matches!(model.cross(), CrossStructure::Regression(_)),
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn diagnostics(&self) -> &SamplerDiagnostics {
        &self.diagnostics
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Draw replication `replication` of the path for `seed`.
    pub fn sample(&self, seed: u64, replication: u64) -> SamplePath {
        let (x1, x2, dx2) = match &self.plan {
            Plan::Cholesky(p) => {
                let (a, b) = p.sample(seed, replication);
                (a, b, None)
            }
            Plan::Spectral(p) => {
                let (a, b, d) = p.sample(seed, replication);
                (a, b, Some(d))
            }
            Plan::Circulant(p) => {
                let (a, b) = p.sample(seed, replication);
                (a, b, None)
            }
        };
        SamplePath {
            grid: self.grid,
            x1,
            x2,
            dx2,
            seed,
            replication,
            backend: Some(self.backend),
            diagnostics: self.diagnostics.clone(),
            smoothing: None,
            process_independent_z: self.process_independent_z,
        }
    }
}

pub fn sample_cholesky(model: &CovarianceModel, grid: GridSpec, seed: u64) -> Result<SamplePath> {
    Ok(PathSampler::new(model, grid, Backend::Cholesky, SamplerOptions::default())?.sample(seed, 0))
}

pub fn sample_spectral(model: &CovarianceModel, grid: GridSpec, seed: u64, n_freq: usize) -> Result<SamplePath> {
    let opts = SamplerOptions {
        n_freq,
        ..SamplerOptions::default()
    };
    Ok(PathSampler::new(model, grid, Backend::Spectral, opts)?.sample(seed, 0))
}

pub fn sample_circulant(model: &CovarianceModel, grid: GridSpec, seed: u64) -> Result<SamplePath> {
    Ok(PathSampler::new(model, grid, Backend::Circulant, SamplerOptions::default())?.sample(seed, 0))
}

/// Convolve `x2` with the unit-mass discrete bump of half-width `epsilon`,
/// reflecting the path at both ends. `x1` is left alone and `dx2` dropped.
pub fn smooth_path(path: &SamplePath, epsilon: f64) -> Result<SamplePath> {
    let dt = path.grid.dt();
    if !(epsilon >= 2.0 * dt * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "epsilon = {epsilon} is below twice the grid step {dt}"
        )));
    }
    let w = discrete_bump(epsilon, dt);
    let half = (w.len() / 2) as isize;
    let n = path.grid.n as isize;
    let reflect = |i: isize| -> usize {
        let period = 2 * (n - 1);
        let mut j = i.rem_euclid(period.max(1));
        if j >= n {
            j = period - j;
        }
        j as usize
    };
    let x2: Vec<f64> = (0..n)
        .map(|i| {
            w.iter()
                .enumerate()
                .map(|(k, wk)| wk * path.x2[reflect(i + k as isize - half)])
                .sum()
        })
        .collect();
    Ok(SamplePath {
        x2,
        dx2: None,
        smoothing: Some(Smoothing {
            epsilon,
            boundary: "reflect".into(),
        }),
        ..path.clone()
    })
}
