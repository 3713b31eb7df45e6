use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;
use crate::covmodel::CovarianceModel;
use crate::error::{Error, Result};
use crate::rng::{normals, stream, Purpose};

pub(super) const WARN_CLIPPED: f64 = 1e-8;
const MAX_CLIPPED: f64 = 1e-3;

/// Square root of a Hermitian 2×2 matrix `[[a, b], [conj b, d]]` after
/// clipping negative eigenvalues; returns the matrix and the clipped mass.
fn sqrt_hermitian(a: f64, b: Complex64, d: f64) -> ([Complex64; 4], f64) {
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    let clipped = (-l1).max(0.0) + (-l2).max(0.0);
    let (s1, s2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
    if rad == 0.0 {
        let z = Complex64::new(0.0, 0.0);
        return ([Complex64::new(s1, 0.0), z, z, Complex64::new(s2, 0.0)], clipped);
    }
    // unit eigenvector for l1
    let (u0, u1) = if (a - l2).abs() >= (d - l2).abs() {
        let v = (Complex64::new(a - l2, 0.0), b.conj());
        let nrm = (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
        (v.0 / nrm, v.1 / nrm)
    } else {
        let v = (b, Complex64::new(d - l2, 0.0));
        let nrm = (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
        (v.0 / nrm, v.1 / nrm)
    };
    // S = s2 I + (s1 - s2) u u*
    let k = s1 - s2;
    let m = [
        Complex64::new(s2, 0.0) + u0 * u0.conj() * k,
        u0 * u1.conj() * k,
        u1 * u0.conj() * k,
        Complex64::new(s2, 0.0) + u1 * u1.conj() * k,
    ];
    (m, clipped)
}

pub(super) struct CirculantPlan {
    n: usize,
    sqrt: Vec<[Complex64; 4]>,
    fft: Arc<dyn Fft<f64>>,
    pub clipped_mass: f64,
    pub padding: usize,
}

struct Embedding {
    lambda: Vec<(f64, Complex64, f64)>,
    negative: f64,
    total: f64,
}

fn embed(model: &CovarianceModel, dt: f64, m: usize, planner: &mut FftPlanner<f64>) -> Embedding {
    let fft = planner.plan_fft_forward(m);
    let half = m / 2;
    let mut c11 = vec![Complex64::new(0.0, 0.0); m];
    let mut c22 = c11.clone();
    let mut c12 = c11.clone();
    for k in 0..m {
        let tau = if k <= half { k as f64 } else { k as f64 - m as f64 } * dt;
        c11[k].re = model.r1(tau);
        c22[k].re = model.r2(tau);
        // C12(τ) = E[X1(t+τ) X2(t)] = r12(τ); symmetrized at the fold
        c12[k].re = if k == half {
            0.5 * (model.r12(tau) + model.r12(-tau))
        } else {
            model.r12(tau)
        };
    }
    fft.process(&mut c11);
    fft.process(&mut c22);
    fft.process(&mut c12);
    let mut negative = 0.0;
    let mut total = 0.0;
    let lambda = (0..m)
        .map(|j| {
            let (a, d, b) = (c11[j].re, c22[j].re, c12[j]);
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            for l in [mean + rad, mean - rad] {
                total += l.abs();
                if l < 0.0 {
                    negative -= l;
                }
            }
            (a, b, d)
        })
        .collect();
    Embedding {
        lambda,
        negative,
        total,
    }
}

impl CirculantPlan {
    pub fn new(model: &CovarianceModel, grid: GridSpec, max_padding: usize) -> Result<Self> {
        let base = (2 * (grid.n - 1)).next_power_of_two();
        let dt = grid.dt();
        let mut planner = FftPlanner::new();
        let mut padding = 1;
        let mut emb = embed(model, dt, base, &mut planner);
        // round-off produces eigenvalues of order eps times the total
        let tol = |e: &Embedding| 1e-13 * e.total;
        while emb.negative > tol(&emb) && padding * 2 <= max_padding.max(1) {
            padding *= 2;
            emb = embed(model, dt, base * padding, &mut planner);
        }
        let clipped_mass = if emb.negative > tol(&emb) {
            emb.negative / emb.total
        } else {
            0.0
        };
        if clipped_mass > MAX_CLIPPED {
            return Err(Error::Sampler(format!(
                "circulant embedding is far from nonnegative (clipped mass {clipped_mass:.3e}); \
                 use another backend"
            )));
        }
        let sqrt = emb.lambda.iter().map(|&(a, b, d)| sqrt_hermitian(a, b, d).0).collect();
        let m = base * padding;
        Ok(CirculantPlan {
            n: grid.n,
            sqrt,
            fft: planner.plan_fft_inverse(m),
            clipped_mass,
            padding,
        })
    }

    pub fn sample(&self, seed: u64, replication: u64) -> (Vec<f64>, Vec<f64>) {
        let m = self.sqrt.len();
        let mut rng = stream(seed, replication, Purpose::Path);
        let w = normals(&mut rng, 4 * m);
        let mut y1 = vec![Complex64::new(0.0, 0.0); m];
        let mut y2 = y1.clone();
        for j in 0..m {
            let w1 = Complex64::new(w[4 * j], w[4 * j + 1]);
            let w2 = Complex64::new(w[4 * j + 2], w[4 * j + 3]);
            let s = &self.sqrt[j];
            y1[j] = s[0] * w1 + s[1] * w2;
            y2[j] = s[2] * w1 + s[3] * w2;
        }
        self.fft.process(&mut y1);
        self.fft.process(&mut y2);
        let scale = 1.0 / (m as f64).sqrt();
        (
            y1[..self.n].iter().map(|c| c.re * scale).collect(),
            y2[..self.n].iter().map(|c| c.re * scale).collect(),
        )
    }
}
