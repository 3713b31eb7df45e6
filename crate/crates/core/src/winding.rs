//! Winding counts of sampled planar paths around the origin.
//!
//! `n_w` counts signed crossings of the half-line `{x2 = 0, x1 > 0}`;
//! `delta_arg` sums the per-step angle increments. For a continuous curve the
//! two agree up to less than one turn.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::covmodel::CovarianceModel;
use crate::error::{Error, Result};
use crate::pathgen::{smooth_path, Backend, GridSpec, PathSampler, SamplePath, SamplerOptions};

/// Steps turning by more than this are rejected.
pub const ALIASING_LIMIT: f64 = PI - 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    pub n_up: u64,
    pub n_down: u64,
    pub n_w: i64,
    pub delta_arg: f64,
    pub agreement: bool,
    pub min_radius: f64,
    /// Set by the refined counters: same `n_w` on the grid and its halving.
    pub refinement_stable: Option<bool>,
    /// Grid points that sat exactly on the origin and were nudged.
    pub perturbed_points: usize,
}

/// Values of `x2` this close to zero, relative to the path's scale, are
/// treated as exact zeros so that analytic paths landing on the axis up to
/// rounding follow the `sign(0) = +` convention.
const ZERO_SNAP: f64 = 1e-12;

fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Count windings of one path.
pub fn count_windings(path: &SamplePath) -> Result<WindingResult> {
    count_xy(&path.x1, &path.x2)
}

/// Count windings of the curve through the points `(x1[i], x2[i])`.
pub fn count_xy(x1: &[f64], x2: &[f64]) -> Result<WindingResult> {
    let n = x1.len();
    if n < 2 || x2.len() != n {
        return Err(Error::Parameter("a path needs at least two points".into()));
    }
    let scale = x1.iter().chain(x2).fold(0.0f64, |m, v| m.max(v.abs()));
    let snap = ZERO_SNAP * scale;
    let mut perturbed = 0;
    // a point exactly at the origin has no angle; move it onto the positive x1 axis
    let at = |i: usize, perturbed: &mut usize| -> (f64, f64) {
        let y = if x2[i].abs() <= snap { 0.0 } else { x2[i] };
        if x1[i] == 0.0 && y == 0.0 {
            *perturbed += 1;
            (f64::MIN_POSITIVE, 0.0)
        } else {
            (x1[i], y)
        }
    };
    let (mut n_up, mut n_down) = (0u64, 0u64);
    let mut delta = 0.0;
    let (mut a1, mut a2) = at(0, &mut perturbed);
    let mut min_r2 = a1 * a1 + a2 * a2;
    for i in 1..n {
        let (b1, b2) = at(i, &mut perturbed);
        min_r2 = min_r2.min(b1 * b1 + b2 * b2);
        let inc = (a1 * b2 - a2 * b1).atan2(a1 * b1 + a2 * b2);
        if inc.abs() > ALIASING_LIMIT {
            return Err(Error::Aliasing {
                step: i - 1,
                increment: inc,
            });
        }
        delta += inc;
        let (sa, sb) = (positive(a2), positive(b2));
        if sa != sb {
            let x = (b1 * a2 - a1 * b2) / (a2 - b2);
            if x > 0.0 {
                if sb {
                    n_up += 1;
                } else {
                    n_down += 1;
                }
            }
        }
        (a1, a2) = (b1, b2);
    }
    let n_w = n_up as i64 - n_down as i64;
    Ok(WindingResult {
        n_up,
        n_down,
        n_w,
        delta_arg: delta,
        agreement: (delta / (2.0 * PI) - n_w as f64).abs() < 1.0,
        min_radius: min_r2.sqrt(),
        refinement_stable: None,
        perturbed_points: perturbed,
    })
}

/// Count a path and its every-other-point subsample; the returned result is
/// the fine one with `refinement_stable` set.
pub fn count_with_refinement(fine: &SamplePath) -> Result<WindingResult> {
    let coarse = count_windings(&fine.subsample(2))?;
    let mut r = count_windings(fine)?;
    r.refinement_stable = Some(coarse.n_w == r.n_w);
    Ok(r)
}

/// Sample at step `dt/2` and compare with the nested grid of step `dt` (the
/// even points of the same path).
pub fn count_windings_refined(
    model: &CovarianceModel,
    grid: GridSpec,
    seed: u64,
    replication: u64,
    backend: Backend,
) -> Result<WindingResult> {
    let sampler = PathSampler::new(model, grid.refined(), backend, SamplerOptions::default())?;
    count_with_refinement(&sampler.sample(seed, replication))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedWinding {
    pub epsilons: Vec<f64>,
    pub results: Vec<WindingResult>,
    /// First index from which `n_w` no longer changes, if that tail has at
    /// least two members.
    pub stabilization_index: Option<usize>,
    /// False for a single epsilon, where stabilization cannot be judged.
    pub assessable: bool,
}

pub fn smoothed_winding(path: &SamplePath, epsilons: &[f64]) -> Result<SmoothedWinding> {
    if epsilons.is_empty() {
        return Err(Error::Parameter("epsilon sequence is empty".into()));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("epsilon sequence must be strictly decreasing".into()));
    }
    let results = epsilons
        .iter()
        .map(|&e| count_windings(&smooth_path(path, e)?))
        .collect::<Result<Vec<_>>>()?;
    let last = results[results.len() - 1].n_w;
    let start = results.iter().rposition(|r| r.n_w != last).map_or(0, |i| i + 1);
    let assessable = results.len() > 1;
    Ok(SmoothedWinding {
        epsilons: epsilons.to_vec(),
        stabilization_index: (assessable && start + 1 < results.len()).then_some(start),
        results,
        assessable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathgen::GridSpec;

    fn circle(omega: f64, horizon: f64, dt: f64, sign: f64) -> SamplePath {
        let g = GridSpec::from_step(horizon, dt).unwrap();
        let t = g.times();
        SamplePath::from_data(
            g,
            t.iter().map(|t| (omega * t).cos()).collect(),
            t.iter().map(|t| sign * (omega * t).sin()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn circles() {
        let w = count_windings(&circle(2.0 * PI, 3.0, 0.01, 1.0)).unwrap();
        assert_eq!(w.n_w, 3, "{w:?}");
        assert!((w.delta_arg - 6.0 * PI).abs() < 1e-6);
        assert!(w.agreement);
        assert!((w.min_radius - 1.0).abs() < 1e-12);
        let w = count_windings(&circle(2.0 * PI, 2.0, 0.01, -1.0)).unwrap();
        assert_eq!(w.n_w, -2);
        let w = count_with_refinement(&circle(2.0 * PI, 2.0, 0.005, 1.0)).unwrap();
        assert_eq!(w.refinement_stable, Some(true));
    }

    #[test]
    fn aliasing_is_an_error() {
        let g = GridSpec::new(1.0, 3).unwrap();
        let p = SamplePath::from_data(g, vec![1.0, -1.0, 1.0], vec![0.0, -1e-12, 0.0]).unwrap();
        assert!(matches!(count_windings(&p), Err(Error::Aliasing { step: 0, .. })));
    }

    #[test]
    fn origin_is_nudged() {
        let g = GridSpec::new(1.0, 3).unwrap();
        let p = SamplePath::from_data(g, vec![1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0]).unwrap();
        let w = count_windings(&p).unwrap();
        assert_eq!(w.perturbed_points, 1);
        assert_eq!(w.n_w, 1);
    }

    #[test]
    fn zero_counts_as_positive() {
        let g = GridSpec::new(1.0, 3).unwrap();
        // -, 0, + is one crossing, located at the zero
        let p = SamplePath::from_data(g, vec![1.0, 1.0, 1.0], vec![-1.0, 0.0, 1.0]).unwrap();
        let w = count_windings(&p).unwrap();
        assert_eq!((w.n_up, w.n_down), (1, 0));
    }

    #[test]
    fn stabilization_index() {
        let p = circle(2.0 * PI, 2.25, 0.01, 1.0);
        let s = smoothed_winding(&p, &[0.4, 0.2, 0.1, 0.05]).unwrap();
        assert_eq!(s.stabilization_index, Some(0));
        assert!(s.results.iter().all(|r| r.n_w == 2));
        let s = smoothed_winding(&p, &[0.1]).unwrap();
        assert!(!s.assessable && s.stabilization_index.is_none());
        assert!(matches!(smoothed_winding(&p, &[0.1, 0.01]), Err(Error::Resolution(_))));
        assert!(smoothed_winding(&p, &[0.1, 0.2]).is_err());
    }
}
