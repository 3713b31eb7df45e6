use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridSpec;
use crate::covmodel::{Component, CovarianceModel, CrossStructure, SharedCov};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod_pieces, semi_infinite, QuadOptions};
use crate::rng::{normals, stream, Purpose};

pub const MIN_FREQUENCIES: usize = 256;
const MASS_TOL: f64 = 1e-6;

enum X1Source {
    Independent(Vec<f64>),
    Regression { rho1: f64, rho2: f64, z: Vec<f64> },
}

pub(super) struct SpectralPlan {
    n: usize,
    lambda: Vec<f64>,
    a2: Vec<f64>,
    x1: X1Source,
    fft: Arc<dyn Fft<f64>>,
    pub covariance_error: f64,
}

fn check_mass(name: &str, f: &dyn Fn(f64) -> f64) -> Result<()> {
    let opts = QuadOptions::with_tol(1e-10, 1e-10);
    let mass = gauss_kronrod_pieces(f, &[0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0], opts)
        .combine(semi_infinite(f, 16.0, opts))
        .value;
    if !((mass - 1.0).abs() <= MASS_TOL) {
        return Err(Error::Model(format!(
            "spectral density of {name} integrates to {mass}, expected 1"
        )));
    }
    Ok(())
}

/// `sqrt(w_j f(λ_j) Δλ)` with half weight at zero frequency, and the
/// covariance mass missed at lag zero.
fn amplitudes(f: &dyn Fn(f64) -> f64, lambda: &[f64], dl: f64) -> (Vec<f64>, f64) {
    let mut total = 0.0;
    let a = lambda
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let w = if j == 0 { 0.5 } else { 1.0 };
            let m = w * f(l) * dl;
            total += m;
            m.max(0.0).sqrt()
        })
        .collect();
    (a, (1.0 - total).abs())
}

fn density(model: &CovarianceModel, c: Component) -> Result<impl Fn(f64) -> f64 + '_> {
    if !model.has_spectral(c) {
        return Err(Error::Capability(format!("no spectral density for {c:?}")));
    }
    Ok(move |l: f64| model.spectral_density(c, l).unwrap_or(0.0))
}

impl SpectralPlan {
    pub fn new(model: &CovarianceModel, grid: GridSpec, n_freq: usize) -> Result<Self> {
        if n_freq < MIN_FREQUENCIES {
            return Err(Error::Parameter(format!(
                "spectral synthesis needs at least {MIN_FREQUENCIES} frequencies, got {n_freq}"
            )));
        }
        let big_n = (2 * n_freq).max(2 * (grid.n - 1)).next_power_of_two();
        let dt = grid.dt();
        let dl = 2.0 * std::f64::consts::PI / (big_n as f64 * dt);
        let lambda: Vec<f64> = (0..big_n / 2).map(|j| j as f64 * dl).collect();

        let f2 = density(model, Component::X2)?;
        check_mass("X2", &f2)?;
        let (a2, e2) = amplitudes(&f2, &lambda, dl);
        let (x1, e1) = match model.cross() {
            CrossStructure::Independent => {
                let f1 = density(model, Component::X1)?;
                check_mass("X1", &f1)?;
                let (a, e) = amplitudes(&f1, &lambda, dl);
                (X1Source::Independent(a), e)
            }
            CrossStructure::Regression(m) => {
                if !model.x2_differentiable() {
                    return Err(Error::Capability("regression needs a differentiable X2".into()));
                }
                let rz: &SharedCov = &m.rz;
                let fz = |l: f64| rz.spectral_density(l).unwrap_or(f64::NAN);
                if !fz(1.0).is_finite() {
                    return Err(Error::Capability("no spectral density for Z".into()));
                }
                check_mass("Z", &fz)?;
                let (a, e) = amplitudes(&fz, &lambda, dl);
                (
                    X1Source::Regression {
                        rho1: m.rho1,
                        rho2: m.rho2,
                        z: a,
                    },
                    e,
                )
            }
            CrossStructure::Custom => {
                return Err(Error::Capability(
                    "spectral synthesis needs an independent or regression cross structure".into(),
                ))
            }
        };
        let fft = FftPlanner::new().plan_fft_inverse(big_n);
        Ok(SpectralPlan {
            n: grid.n,
            lambda,
            a2,
            x1,
            fft,
            covariance_error: e1.max(e2),
        })
    }

    fn synthesize(&self, amp: &[f64], xi: &[f64], eta: &[f64], derivative: bool) -> Vec<f64> {
        let big_n = self.fft.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); big_n];
        for j in 0..amp.len() {
            let c = Complex64::new(xi[j], -eta[j]) * amp[j];
            buf[j] = if derivative {
                c * Complex64::new(0.0, self.lambda[j])
            } else {
                c
            };
        }
        self.fft.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }

    pub fn sample(&self, seed: u64, replication: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.lambda.len();
        let mut rng = stream(seed, replication, Purpose::Path);
        let xi = normals(&mut rng, m);
        let eta = normals(&mut rng, m);
        let x2 = self.synthesize(&self.a2, &xi, &eta, false);
        let dx2 = self.synthesize(&self.a2, &xi, &eta, true);
        let mut rng = stream(seed, replication, Purpose::Companion);
        let zi = normals(&mut rng, m);
        let ze = normals(&mut rng, m);
        let x1 = match &self.x1 {
            X1Source::Independent(a) => self.synthesize(a, &zi, &ze, false),
            X1Source::Regression { rho1, rho2, z } => {
                let z = self.synthesize(z, &zi, &ze, false);
                dx2.iter().zip(&z).map(|(d, z)| rho1 * d + rho2 * z).collect()
            }
        };
        (x1, x2, dx2)
    }
}
