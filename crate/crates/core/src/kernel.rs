//! The smoothing bump `ψ(u) ∝ exp(-1/(1-u²))` on `(-1, 1)` and its
//! autocorrelation `K(u) = ∫ ψ(v) ψ(v+u) dv`, the covariance kernel of a
//! process convolved with `ψ`.

use std::sync::OnceLock;

use crate::quadrature::{gauss_kronrod, QuadOptions};

/// Unnormalized bump.
pub fn bump(u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// `bump'(u) / bump(u)` and `bump''(u) / bump(u)` inside the support.
fn log_derivatives(u: f64) -> (f64, f64) {
    let s = 1.0 - u * u;
    let q = -2.0 * u / (s * s);
    let dq = -2.0 / (s * s) - 8.0 * u * u / (s * s * s);
    (q, q * q + dq)
}

pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| gauss_kronrod(bump, -1.0, 1.0, QuadOptions::with_tol(1e-15, 1e-14)).value)
}

/// Unit-mass bump `ψ`.
pub fn psi(u: f64) -> f64 {
    bump(u) / bump_mass()
}

struct Table {
    h: f64,
    k: Vec<f64>,
    dk: Vec<f64>,
    ddk: Vec<f64>,
}

const TABLE_INTERVALS: usize = 4000;

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 4.0 / TABLE_INTERVALS as f64;
        let opts = QuadOptions::with_tol(1e-15, 1e-13);
        let m = bump_mass();
        let mut k = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut dk = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut ddk = Vec::with_capacity(TABLE_INTERVALS + 1);
        for i in 0..=TABLE_INTERVALS {
            let u = -2.0 + h * i as f64;
            let (lo, hi) = ((-1.0f64).max(-1.0 - u), 1.0f64.min(1.0 - u));
            if hi <= lo {
                k.push(0.0);
                dk.push(0.0);
                ddk.push(0.0);
                continue;
            }
            let integral = |order: u8| {
                gauss_kronrod(
                    |v| {
                        let w = v + u;
                        let base = bump(v) * bump(w);
                        if base == 0.0 {
                            return 0.0;
                        }
                        let (d1, d2) = log_derivatives(w);
                        match order {
                            0 => base,
                            1 => base * d1,
                            _ => base * d2,
                        }
                    },
                    lo,
                    hi,
                    opts,
                )
                .value
                    / (m * m)
            };
            k.push(integral(0));
            dk.push(integral(1));
            ddk.push(integral(2));
        }
        Table { h, k, dk, ddk }
    })
}

/// Cubic Hermite interpolation of a tabulated function with tabulated slope.
fn hermite_interp(values: &[f64], slopes: &[f64], h: f64, u: f64) -> f64 {
    if !(u > -2.0 && u < 2.0) {
        return 0.0;
    }
    let x = (u + 2.0) / h;
    let i = (x.floor() as usize).min(TABLE_INTERVALS - 1);
    let s = x - i as f64;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * values[i] + h10 * h * slopes[i] + h01 * values[i + 1] + h11 * h * slopes[i + 1]
}

/// `K(u)`, supported on `[-2, 2]`, unit mass.
pub fn autocorrelation(u: f64) -> f64 {
    let t = table();
    hermite_interp(&t.k, &t.dk, t.h, u)
}

/// `K'(u)`.
pub fn autocorrelation_derivative(u: f64) -> f64 {
    let t = table();
    hermite_interp(&t.dk, &t.ddk, t.h, u)
}

/// Discrete weights of `ψ_ε(t) = ψ(t/ε)/ε` on a grid of step `dt`, normalized
/// to unit sum. Index `j` corresponds to offset `(j - half) * dt`.
pub fn discrete_bump(epsilon: f64, dt: f64) -> Vec<f64> {
    let half = (epsilon / dt).floor() as usize;
    let mut w: Vec<f64> = (0..=2 * half)
        .map(|j| bump((j as f64 - half as f64) * dt / epsilon))
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}
