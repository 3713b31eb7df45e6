use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::covmodel::{CovarianceModel, ModelClass};
use crate::error::{Error, Result};
use crate::moments::{expectation_rate, variance_bound_two_alpha, variance_rate_general, variance_rate_independent};
use crate::pathgen::{GridSpec, PathSampler};
use crate::rng::{stream, Purpose};
use crate::stats::{bootstrap_ci, ks_test, mean, normal_cdf, shape, standard_error, variance, KsResult, Shape};
use crate::winding::{count_xy, smoothed_winding};

/// Horizons below this are pre-asymptotic: CLT statistics are reported but
/// not judged.
pub const SMALL_HORIZON: f64 = 50.0;
pub const MEAN_SIGMAS: f64 = 3.0;
pub const BOOTSTRAP_LEVEL: f64 = 0.99;
pub const VARIANCE_REL_TOL: f64 = 0.05;
pub const KS_MIN_P: f64 = 0.01;
pub const MAX_ABS_SKEWNESS: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCounts {
    pub replication: u64,
    /// `N_W([0,T])` for each horizon.
    pub n_w: Vec<i64>,
    /// `|Δ_T/2π - N_W| < 1` at every horizon.
    pub agreement: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_stable: Option<Vec<bool>>,
    pub min_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub replication: u64,
    pub error: String,
}

pub struct Simulation {
    pub counts: Vec<ReplicationCounts>,
    pub rejected: Vec<Rejected>,
    pub warnings: Vec<String>,
}

impl Simulation {
    /// Counts at horizon index `k` over accepted replications.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.counts.iter().map(|c| c.n_w[k] as f64).collect()
    }

    pub fn refinement_rate(&self) -> Option<f64> {
        let flags: Vec<bool> = self
            .counts
            .iter()
            .filter_map(|c| c.refinement_stable.as_ref())
            .flat_map(|v| v.last().copied())
            .collect();
        (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
    }

    pub fn agreement_rate(&self) -> f64 {
        if self.counts.is_empty() {
            return f64::NAN;
        }
        self.counts.iter().filter(|c| c.agreement).count() as f64 / self.counts.len() as f64
    }
}

/// Grid index of each horizon on a grid that ends at the last one.
pub fn prefix_indices(grid: &GridSpec, horizons: &[f64]) -> Result<Vec<usize>> {
    let dt = grid.dt();
    horizons
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if (k * dt - t).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::Config(format!(
                    "horizon {t} is not a multiple of the grid step {dt}"
                )));
            }
            Ok(k as usize)
        })
        .collect()
}

/// Simulate `cfg.replications` paths on `[0, max horizon]` and count windings
/// on each prefix `[0, T]`. Replications whose counting fails (aliasing) are
/// set aside in `rejected`.
pub fn simulate(model: &CovarianceModel, cfg: &ExperimentConfig) -> Result<Simulation> {
    let horizons = &cfg.grid.horizons;
    let grid = GridSpec::from_step(horizons[horizons.len() - 1], cfg.grid.dt)?;
    let idx = prefix_indices(&grid, horizons)?;
    let (sample_grid, step) = if cfg.refine { (grid.refined(), 2) } else { (grid, 1) };
    let sampler = PathSampler::new(model, sample_grid, cfg.backend, cfg.sampler)?;
    let outcomes: Vec<std::result::Result<ReplicationCounts, Rejected>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let path = sampler.sample(cfg.seed, rep);
            let reject = |e: Error| Rejected {
                replication: rep,
                error: e.at_replication(rep).to_string(),
            };
            let mut n_w = Vec::with_capacity(idx.len());
            let mut agreement = true;
            let mut min_radius = f64::INFINITY;
            let mut stable = Vec::new();
            for &k in &idx {
                let end = k * step + 1;
                let r = count_xy(&path.x1[..end], &path.x2[..end]).map_err(reject)?;
                if cfg.refine {
                    let c1: Vec<f64> = path.x1[..end].iter().step_by(2).copied().collect();
                    let c2: Vec<f64> = path.x2[..end].iter().step_by(2).copied().collect();
                    let coarse = count_xy(&c1, &c2).map_err(reject)?;
                    stable.push(coarse.n_w == r.n_w);
                }
                n_w.push(r.n_w);
                agreement &= r.agreement;
                min_radius = min_radius.min(r.min_radius);
            }
            Ok(ReplicationCounts {
                replication: rep,
                n_w,
                agreement,
                refinement_stable: cfg.refine.then_some(stable),
                min_radius,
            })
        })
        .collect();
    let mut counts = Vec::new();
    let mut rejected = Vec::new();
    for o in outcomes {
        match o {
            Ok(c) => counts.push(c),
            Err(r) => rejected.push(r),
        }
    }
    let mut warnings = sampler.warnings().to_vec();
    if !rejected.is_empty() {
        warnings.push(format!(
            "{} replication(s) rejected by the aliasing guard; statistics use the rest",
            rejected.len()
        ));
    }
    if counts.is_empty() {
        return Err(Error::Sampler("every replication was rejected".into()));
    }
    Ok(Simulation {
        counts,
        rejected,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMean {
    pub horizon: f64,
    pub mean: f64,
    /// `None` with a single replication.
    pub se: Option<f64>,
    pub theory: f64,
    pub passed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub rate: f64,
    pub horizons: Vec<HorizonMean>,
    pub agreement_rate: f64,
    pub refinement_stable_rate: Option<f64>,
    pub rejected: Vec<Rejected>,
    pub per_replication: Vec<ReplicationCounts>,
}

pub fn run_expectation(model: &CovarianceModel, cfg: &ExperimentConfig) -> Result<(ExpectationReport, Vec<String>)> {
    let rate = expectation_rate(model)?;
    let sim = simulate(model, cfg)?;
    let horizons = cfg
        .grid
        .horizons
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let v = sim.column(k);
            let m = mean(&v);
            let se = standard_error(&v);
            let theory = t * rate;
            HorizonMean {
                horizon: t,
                mean: m,
                se,
                theory,
                passed: se.map(|s| (m - theory).abs() <= MEAN_SIGMAS * s),
            }
        })
        .collect();
    Ok((
        ExpectationReport {
            rate,
            horizons,
            agreement_rate: sim.agreement_rate(),
            refinement_stable_rate: sim.refinement_rate(),
            rejected: sim.rejected,
            per_replication: sim.counts,
        },
        sim.warnings,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceTheory {
    pub method: String,
    pub v_inf: f64,
    /// The `(1/π)(π/2 + I)` form, independent models only.
    pub v_inf_display: Option<f64>,
    pub err: f64,
}

pub fn variance_theory(model: &CovarianceModel, cfg: &ExperimentConfig) -> Result<VarianceTheory> {
    let q = &cfg.quadrature;
    match model.classify() {
        ModelClass::Independent | ModelClass::Iid => {
            let r = variance_rate_independent(model, q)?;
            Ok(VarianceTheory {
                method: "independent".into(),
                v_inf: r.v_inf.unwrap_or(f64::NAN),
                v_inf_display: r.v_inf_display,
                err: r.err,
            })
        }
        _ => {
            let r = variance_rate_general(model, 1e6, q)?;
            Ok(VarianceTheory {
                method: "general".into(),
                v_inf: r.v_inf.unwrap_or(f64::NAN),
                v_inf_display: None,
                err: r.err,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonVariance {
    pub horizon: f64,
    pub mean: f64,
    pub var_over_t: f64,
    /// Bootstrap interval for `Var/T`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Finite-horizon theory, when `X2` is differentiable.
    pub v_t: Option<f64>,
    pub v_inf: f64,
    pub v_inf_display: Option<f64>,
    /// The interval covers `v_inf`.
    pub covers: bool,
    /// `|Var/T - v_inf| <= 5% v_inf + half-width`.
    pub within_tolerance: bool,
    pub display_covers: Option<bool>,
    pub display_within_tolerance: Option<bool>,
    pub passed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub theory: VarianceTheory,
    pub horizons: Vec<HorizonVariance>,
    /// `|Var/T - v_inf|` decreases on a majority of ladder steps.
    pub trend_decreasing: Option<bool>,
    pub agreement_rate: f64,
    pub refinement_stable_rate: Option<f64>,
    pub rejected: Vec<Rejected>,
    pub per_replication: Vec<ReplicationCounts>,
}

fn coverage(value: f64, lo: f64, hi: f64, est: f64) -> (bool, bool) {
    let half = 0.5 * (hi - lo);
    (
        lo <= value && value <= hi,
        (est - value).abs() <= VARIANCE_REL_TOL * value.abs() + half,
    )
}

pub fn run_variance(model: &CovarianceModel, cfg: &ExperimentConfig) -> Result<(VarianceReport, Vec<String>)> {
    if cfg.replications < 2 {
        return Err(Error::Config("variance needs at least two replications".into()));
    }
    let theory = variance_theory(model, cfg)?;
    let sim = simulate(model, cfg)?;
    let mut horizons = Vec::new();
    for (k, &t) in cfg.grid.horizons.iter().enumerate() {
        let v = sim.column(k);
        let var_t = variance(&v) / t;
        let mut rng = stream(cfg.seed, k as u64, Purpose::Bootstrap);
        let (lo, hi) = bootstrap_ci(
            &v,
            |s| variance(s) / t,
            cfg.bootstrap_resamples,
            BOOTSTRAP_LEVEL,
            &mut rng,
        );
        let v_t = if model.x2_differentiable() {
            Some(
                variance_rate_general(model, t, &cfg.quadrature)?
                    .v_t
                    .unwrap_or(f64::NAN),
            )
        } else {
            None
        };
        let (covers, within) = coverage(theory.v_inf, lo, hi, var_t);
        let display = theory.v_inf_display.map(|d| coverage(d, lo, hi, var_t));
        horizons.push(HorizonVariance {
            horizon: t,
            mean: mean(&v),
            var_over_t: var_t,
            ci_low: lo,
            ci_high: hi,
            v_t,
            v_inf: theory.v_inf,
            v_inf_display: theory.v_inf_display,
            covers,
            within_tolerance: within,
            display_covers: display.map(|d| d.0),
            display_within_tolerance: display.map(|d| d.1),
            passed: Some(covers && within),
        });
    }
    let trend_decreasing = (horizons.len() > 1).then(|| {
        let gaps: Vec<f64> = horizons.iter().map(|h| (h.var_over_t - h.v_inf).abs()).collect();
        let down = gaps.windows(2).filter(|w| w[1] < w[0]).count();
        2 * down > gaps.len() - 1
    });
    Ok((
        VarianceReport {
            theory,
            horizons,
            trend_decreasing,
            agreement_rate: sim.agreement_rate(),
            refinement_stable_rate: sim.refinement_rate(),
            rejected: sim.rejected,
            per_replication: sim.counts,
        },
        sim.warnings,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonClt {
    pub horizon: f64,
    pub mean_nw: f64,
    pub var_nw: f64,
    /// `(N_W + U - E N_W) / sqrt(T)` with `U ~ U(-1/2, 1/2)` breaking lattice ties.
    pub standardized: Vec<f64>,
    /// Variance used for the reference normal, before the `1/(12T)` jitter term.
    pub v_inf: f64,
    /// "theory", or "sample" when no theoretical value was available.
    pub v_inf_source: String,
    pub ks: KsResult,
    /// Against the `(1/π)(π/2 + I)` variance, when defined.
    pub ks_display: Option<KsResult>,
    pub shape: Shape,
    pub small_horizon: bool,
    pub passed: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub expectation_rate: f64,
    pub horizons: Vec<HorizonClt>,
    pub rejected: Vec<Rejected>,
}

pub fn run_clt(model: &CovarianceModel, cfg: &ExperimentConfig) -> Result<(CltReport, Vec<String>)> {
    if cfg.replications < 3 {
        return Err(Error::Config("the CLT check needs at least three replications".into()));
    }
    let rate = expectation_rate(model)?;
    let theory = variance_theory(model, cfg).ok();
    let sim = simulate(model, cfg)?;
    let mut warnings = sim.warnings.clone();
    if theory.is_none() {
        warnings.push("no theoretical variance; standardizing by the sample variance".into());
    }
    let nh = cfg.grid.horizons.len();
    // one jitter per (replication, horizon), independent of scheduling
    let jitter: Vec<Vec<f64>> = sim
        .counts
        .iter()
        .map(|c| {
            use rand::Rng;
            let mut rng = stream(cfg.seed, c.replication, Purpose::Jitter);
            (0..nh).map(|_| rng.random::<f64>() - 0.5).collect()
        })
        .collect();
    let mut horizons = Vec::new();
    for (k, &t) in cfg.grid.horizons.iter().enumerate() {
        let v = sim.column(k);
        let z: Vec<f64> = v
            .iter()
            .zip(&jitter)
            .map(|(n, u)| (n + u[k] - rate * t) / t.sqrt())
            .collect();
        let (v_inf, source) = match &theory {
            Some(th) => (th.v_inf, "theory"),
            None => (variance(&z) - 1.0 / (12.0 * t), "sample"),
        };
        let sd = |v: f64| (v + 1.0 / (12.0 * t)).max(1e-300).sqrt();
        let ks = ks_test(&z, normal_cdf(0.0, sd(v_inf)));
        let ks_display = theory
            .as_ref()
            .and_then(|th| th.v_inf_display)
            .map(|d| ks_test(&z, normal_cdf(0.0, sd(d))));
        let sh = shape(&z);
        let small = t < SMALL_HORIZON;
        horizons.push(HorizonClt {
            horizon: t,
            mean_nw: mean(&v),
            var_nw: variance(&v),
            standardized: z,
            v_inf,
            v_inf_source: source.into(),
            ks,
            ks_display,
            shape: sh,
            small_horizon: small,
            passed: (!small).then(|| ks.p_value > KS_MIN_P && sh.skewness.abs() < MAX_ABS_SKEWNESS),
        });
    }
    Ok((
        CltReport {
            expectation_rate: rate,
            horizons,
            rejected: sim.rejected,
        },
        warnings,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStats {
    pub epsilon: f64,
    pub mean: f64,
    pub var_over_t: f64,
    pub var_over_t_se: f64,
    /// `∫ g1 g_ε / (2π²)`, the limit variance of the smoothed problem.
    pub theory: f64,
    /// `Var/T <= bound + 3 SE`.
    pub passed: bool,
    /// `Var/T <= bound / (2π²) + 3 SE`.
    pub within_variance_scale: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub horizon: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `∫_0^∞ g1 g2`.
    pub bound: f64,
    /// `bound / (2π²)`.
    pub bound_variance_scale: f64,
    pub epsilons: Vec<EpsilonStats>,
    /// Fraction of replications whose count is constant from some epsilon on;
    /// `None` when the ladder has a single epsilon.
    pub stabilization_rate: Option<f64>,
    pub assessable: bool,
    pub rejected: Vec<Rejected>,
    /// `n_w` per replication and epsilon.
    pub per_replication: Vec<Vec<i64>>,
}

/// Counts per epsilon, stabilization index and assessability of one path.
type SmoothedCounts = (Vec<i64>, Option<usize>, bool);

/// Standard error of the sample variance from the fourth central moment.
fn variance_se(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).max(0.0).sqrt()
}

pub fn run_smoothing(model: &CovarianceModel, cfg: &ExperimentConfig) -> Result<(SmoothingReport, Vec<String>)> {
    let eps = cfg.smoothing.clone().unwrap_or_default().epsilons;
    let horizon = cfg.grid.horizons[cfg.grid.horizons.len() - 1];
    // hypotheses are checked before any simulation
    let bound = variance_bound_two_alpha(model, &eps, horizon, &cfg.quadrature)?;
    if cfg.replications < 2 {
        return Err(Error::Config("smoothing needs at least two replications".into()));
    }
    let grid = GridSpec::from_step(horizon, cfg.grid.dt)?;
    if let Some(&e) = eps.iter().find(|&&e| e < 2.0 * grid.dt() * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "epsilon {e} is below twice the grid step {}",
            grid.dt()
        )));
    }
    let sampler = PathSampler::new(model, grid, cfg.backend, cfg.sampler)?;
    let outcomes: Vec<std::result::Result<SmoothedCounts, Rejected>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let path = sampler.sample(cfg.seed, rep);
            let s = smoothed_winding(&path, &eps).map_err(|e| Rejected {
                replication: rep,
                error: e.to_string(),
            })?;
            Ok((
                s.results.iter().map(|r| r.n_w).collect(),
                s.stabilization_index,
                s.assessable,
            ))
        })
        .collect();
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(r) => rejected.push(r),
        }
    }
    if rows.len() < 2 {
        return Err(Error::Sampler("too few replications survived counting".into()));
    }
    let assessable = eps.len() > 1;
    let stabilization_rate =
        assessable.then(|| rows.iter().filter(|r| r.1.is_some()).count() as f64 / rows.len() as f64);
    let epsilons = eps
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let v: Vec<f64> = rows.iter().map(|r| r.0[k] as f64).collect();
            let var_t = variance(&v) / horizon;
            let se = variance_se(&v) / horizon;
            EpsilonStats {
                epsilon: e,
                mean: mean(&v),
                var_over_t: var_t,
                var_over_t_se: se,
                theory: bound.rows[k].v_eps,
                passed: var_t <= bound.bound + MEAN_SIGMAS * se,
                within_variance_scale: var_t <= bound.v_inf + MEAN_SIGMAS * se,
            }
        })
        .collect();
    let mut warnings = sampler.warnings().to_vec();
    if !rejected.is_empty() {
        warnings.push(format!("{} replication(s) rejected while counting", rejected.len()));
    }
    Ok((
        SmoothingReport {
            horizon,
            alpha1: bound.alpha1,
            alpha2: bound.alpha2,
            bound: bound.bound,
            bound_variance_scale: bound.v_inf,
            epsilons,
            stabilization_rate,
            assessable,
            rejected,
            per_replication: rows.into_iter().map(|r| r.0).collect(),
        },
        warnings,
    ))
}
