//! Monte Carlo experiments confronting simulated winding counts with theory.

pub mod config;
pub mod experiments;
pub mod lemma;
pub mod report;
pub mod summary;

use std::path::Path;

use crate::covmodel::CovarianceModel;
use crate::error::{Error, Result};
use crate::pathgen::{io, GridSpec, PathSampler};
use crate::winding::count_windings;

pub use config::{ExperimentConfig, ExperimentKind, GridConfig, LemmaConfig, Mutation, Outputs, SmoothingConfig};
pub use experiments::{
    run_clt, run_expectation, run_smoothing, run_variance, simulate, CltReport, ExpectationReport, SmoothingReport,
    VarianceReport,
};
pub use lemma::{run_lemma_check, LemmaReport};
pub use report::{Metadata, Report, ReportBody, SCHEMA_VERSION};
pub use summary::{moments_summary, MomentsSummary, Outcome};

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
}

impl RunOptions {
    /// Threads a run with these options uses.
    pub fn effective_workers(&self) -> usize {
        self.workers.unwrap_or_else(rayon::current_num_threads)
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("workers must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Run the experiment described by `cfg`.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    cfg.validate()?;
    let model = CovarianceModel::from_spec(&cfg.model)?;
    let (body, warnings, passed) = in_pool(opts.workers, || -> Result<_> {
        Ok(match cfg.kind {
            ExperimentKind::Expectation => {
                let (r, w) = run_expectation(&model, cfg)?;
                let p = all_judged(r.horizons.iter().map(|h| h.passed));
                (ReportBody::Expectation(r), w, p)
            }
            ExperimentKind::Variance => {
                let (r, w) = run_variance(&model, cfg)?;
                // judged at the largest horizon, the one closest to the limit
                let p = r.horizons.last().and_then(|h| h.passed);
                (ReportBody::Variance(r), w, p)
            }
            ExperimentKind::Clt => {
                let (r, w) = run_clt(&model, cfg)?;
                let p = all_judged(r.horizons.iter().map(|h| h.passed));
                (ReportBody::Clt(r), w, p)
            }
            ExperimentKind::LemmaCheck => {
                let r = run_lemma_check(&cfg.lemma.clone().unwrap_or_default(), cfg.seed)?;
                let p = Some(r.checks.iter().all(|c| c.passed));
                (ReportBody::Lemma(r), Vec::new(), p)
            }
            ExperimentKind::Smoothing => {
                let (r, w) = run_smoothing(&model, cfg)?;
                let p = Some(r.epsilons.iter().all(|e| e.passed));
                (ReportBody::Smoothing(r), w, p)
            }
        })
    })??;
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        kind: cfg.kind,
        config_hash: cfg.hash(),
        model: model.describe(),
        seed: cfg.seed,
        replications: cfg.replications,
        passed,
        warnings,
        result: body,
    })
}

/// `None` if nothing was judged, otherwise whether every judged item passed.
fn all_judged(items: impl Iterator<Item = Option<bool>>) -> Option<bool> {
    let judged: Vec<bool> = items.flatten().collect();
    (!judged.is_empty()).then(|| judged.iter().all(|&b| b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathFormat {
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimulatedPath {
    pub replication: u64,
    pub file: String,
    pub n_w: Option<i64>,
    pub delta_arg: Option<f64>,
    pub error: Option<String>,
}

/// Write one path file per replication (on `[0, max horizon]`) and count each.
pub fn simulate_paths(
    cfg: &ExperimentConfig,
    dir: &Path,
    format: PathFormat,
    opts: RunOptions,
) -> Result<Vec<SimulatedPath>> {
    cfg.validate()?;
    let model = CovarianceModel::from_spec(&cfg.model)?;
    std::fs::create_dir_all(dir)?;
    let grid = GridSpec::from_step(cfg.grid.horizons[cfg.grid.horizons.len() - 1], cfg.grid.dt)?;
    let sampler = PathSampler::new(&model, grid, cfg.backend, cfg.sampler)?;
    let hash = cfg.model.hash();
    in_pool(opts.workers, || {
        use rayon::prelude::*;
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| -> Result<SimulatedPath> {
                let path = sampler.sample(cfg.seed, rep);
                let name = match format {
                    PathFormat::Csv => format!("path_{rep:06}.csv"),
                    PathFormat::Binary => format!("path_{rep:06}.wndp"),
                };
                let file = std::fs::File::create(dir.join(&name))?;
                let w = std::io::BufWriter::new(file);
                match format {
                    PathFormat::Csv => io::write_csv(&path, Some(hash.clone()), w)?,
                    PathFormat::Binary => io::write_binary(&path, Some(hash.clone()), w)?,
                }
                let counted = count_windings(&path);
                Ok(SimulatedPath {
                    replication: rep,
                    file: name,
                    n_w: counted.as_ref().ok().map(|r| r.n_w),
                    delta_arg: counted.as_ref().ok().map(|r| r.delta_arg),
                    error: counted.err().map(|e| e.to_string()),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}
