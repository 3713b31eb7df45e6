//! Exact Gaussian computations: Hermite polynomials and chaos coefficients,
//! orthant probabilities, the quadrant expectation
//! `E[X1 X2 1{X3>0} 1{X4>0}]` and the conditional covariance of
//! `(X2'(0), X2'(t), X1(0), X1(t))` given `X2(0) = X2(t) = 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, SMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::covmodel::{Component, CovarianceModel};
use crate::error::{Error, Result};
use crate::quadrature::gauss_hermite;
use crate::rng::{stream, Purpose};

pub const HERMITE_MAX_ORDER: u32 = 200;
const PSD_TOL: f64 = 1e-12;
const SINGULAR_RHO34: f64 = 1.0 - 1e-6;

/// Probabilists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: u32, x: f64) -> Result<f64> {
    if n > HERMITE_MAX_ORDER {
        return Err(Error::Capability(format!(
            "Hermite order {n} exceeds the cap {HERMITE_MAX_ORDER}"
        )));
    }
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return Ok(prev);
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `H_k(x) / sqrt(k!)` for `k = 0..=n`.
pub fn hermite_normalized_table(n: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n >= 1 {
        h.push(x);
    }
    for k in 1..n {
        let next = (x * h[k] - (k as f64).sqrt() * h[k - 1]) / ((k + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// Hermite coefficient of the Dirac mass at zero: `a_k = φ(0) H_k(0) / k!`.
pub fn dirac_coefficient(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let j = k / 2;
    let mut v = 1.0 / (2.0 * PI).sqrt();
    for i in 1..=j {
        v /= -2.0 * i as f64;
    }
    v
}

/// Correlations of a centered unit-variance Gaussian vector `(X1, .., X4)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadrantCorr {
    pub rho12: f64,
    pub rho13: f64,
    pub rho14: f64,
    pub rho23: f64,
    pub rho24: f64,
    pub rho34: f64,
}

impl QuadrantCorr {
    /// Validates entries and positive semidefiniteness (smallest eigenvalue
    /// `≥ -1e-12`).
    pub fn new(rho12: f64, rho13: f64, rho14: f64, rho23: f64, rho24: f64, rho34: f64) -> Result<Self> {
        let c = QuadrantCorr {
            rho12,
            rho13,
            rho14,
            rho23,
            rho24,
            rho34,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::new(
            1.0, self.rho12, self.rho13, self.rho14, //
            self.rho12, 1.0, self.rho23, self.rho24, //
            self.rho13, self.rho23, 1.0, self.rho34, //
            self.rho14, self.rho24, self.rho34, 1.0,
        )
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix()).eigenvalues.min()
    }

    fn validate(&self) -> Result<()> {
        let all = [self.rho12, self.rho13, self.rho14, self.rho23, self.rho24, self.rho34];
        if all.iter().any(|r| !(r.abs() <= 1.0)) {
            return Err(Error::Domain(format!("correlations must lie in [-1, 1]: {all:?}")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -PSD_TOL {
            return Err(Error::Domain(format!(
                "correlation matrix is not positive semidefinite (smallest eigenvalue {lmin:.3e})"
            )));
        }
        Ok(())
    }
}

fn check_rho34(rho34: f64) -> Result<()> {
    if rho34.abs() > SINGULAR_RHO34 {
        return Err(Error::Singularity(format!(
            "|rho34| = {} is too close to 1",
            rho34.abs()
        )));
    }
    Ok(())
}

/// `E[X1 X2 1{X3>0} 1{X4>0}]` in closed form:
/// `ρ12 (1/4 + asin ρ34 / 2π) + (ρ13ρ24 + ρ14ρ23 - ρ34(ρ13ρ23 + ρ14ρ24)) / (2π sqrt(1-ρ34²))`.
pub fn quadrant_expectation(c: &QuadrantCorr) -> Result<f64> {
    check_rho34(c.rho34)?;
    c.validate()?;
    Ok(quadrant_closed_form(c))
}

/// The three-term form `ρ12/4 + ρ12 asin(ρ34)/2π + (ρ13ρ24 + ρ14ρ23)/(2π sqrt(1-ρ34²))`,
/// which drops the `ρ13ρ23` and `ρ14ρ24` pairings. It agrees with
/// [`quadrant_expectation`] only when `ρ34 (ρ13ρ23 + ρ14ρ24) = 0`.
pub fn quadrant_expectation_three_term(c: &QuadrantCorr) -> Result<f64> {
    check_rho34(c.rho34)?;
    c.validate()?;
    let s = (1.0 - c.rho34 * c.rho34).sqrt();
    Ok(
        c.rho12 / 4.0
            + c.rho12 * c.rho34.asin() / (2.0 * PI)
            + (c.rho13 * c.rho24 + c.rho14 * c.rho23) / (2.0 * PI * s),
    )
}

pub(crate) fn quadrant_closed_form(c: &QuadrantCorr) -> f64 {
    let s = (1.0 - c.rho34 * c.rho34).sqrt();
    let cross = c.rho13 * c.rho24 + c.rho14 * c.rho23;
    let same = c.rho13 * c.rho23 + c.rho14 * c.rho24;
    c.rho12 / 4.0 + c.rho12 * c.rho34.asin() / (2.0 * PI) + (cross - c.rho34 * same) / (2.0 * PI * s)
}

/// Partial sum over Hermite orders `≤ order` of the diagram expansion with
/// `ĝ` the Hermite coefficients of `1{x > 0}`:
/// `Σ_q ĝ_q² q! [ρ12 ρ34^q + q (ρ13ρ24 + ρ14ρ23) ρ34^(q-1)]
///  + Σ_p ĝ_p ĝ_{p+2} (p+2)! ρ34^p (ρ13ρ23 + ρ14ρ24)`.
pub fn quadrant_expectation_series(c: &QuadrantCorr, order: u32) -> Result<f64> {
    check_rho34(c.rho34)?;
    c.validate()?;
    let cross = c.rho13 * c.rho24 + c.rho14 * c.rho23;
    let same = c.rho13 * c.rho23 + c.rho14 * c.rho24;
    let mut sum = c.rho12 / 4.0;
    // q = 2j + 1: ĝ_q² q! = b_j / (2π q), b_j = (2j-1)!! / (2j)!!
    let coef = |b: f64, q: f64| b / (2.0 * PI * q);
    let mut b = 1.0;
    let mut j = 0u32;
    while 2 * j < order {
        let q = (2 * j + 1) as f64;
        let cq = coef(b, q);
        let pow = c.rho34.powi(2 * j as i32);
        sum += cq * (c.rho12 * pow * c.rho34 + q * cross * pow);
        b *= (2 * j + 1) as f64 / (2 * j + 2) as f64;
        if 2 * j + 3 <= order {
            // ĝ_q ĝ_{q+2} (q+2)! = -sqrt(c_q c_{q+2} (q+1)(q+2))
            let next = coef(b, q + 2.0);
            sum -= (cq * next * (q + 1.0) * (q + 2.0)).sqrt() * pow * c.rho34 * same;
        }
        j += 1;
    }
    Ok(sum)
}

/// Monte Carlo estimate of the quadrant expectation with its standard error.
pub fn quadrant_expectation_mc(c: &QuadrantCorr, samples: usize, seed: u64) -> Result<(f64, f64)> {
    c.validate()?;
    let eig = SymmetricEigen::new(c.matrix());
    let mut root = Matrix4::zeros();
    for i in 0..4 {
        let s = eig.eigenvalues[i].max(0.0).sqrt();
        for r in 0..4 {
            root[(r, i)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    const CHUNK: usize = 1 << 16;
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64, Purpose::Oracle);
            let n = CHUNK.min(samples - k * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let z = nalgebra::Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
                let x = root * z;
                let v = if x[2] > 0.0 && x[3] > 0.0 { x[0] * x[1] } else { 0.0 };
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// `P{X(0) > 0, X(t) > 0} = 1/4 + arcsin(r) / (2π)` for correlation `r`.
pub fn orthant_prob(r: f64) -> Result<f64> {
    if !(r.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
    }
    Ok(0.25 + r.asin() / (2.0 * PI))
}

/// `arccos(sqrt((1 - r) / 2))`, which equals `π · orthant_prob(r)`.
pub fn orthant_angle(r: f64) -> Result<f64> {
    if !(r.abs() <= 1.0) {
        return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
    }
    Ok((0.5 * (1.0 - r)).sqrt().acos())
}

/// Conditional covariance of `(X2'(0), X2'(t), X1(0), X1(t))` given
/// `X2(0) = X2(t) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionalCov {
    pub t: f64,
    pub matrix: [[f64; 4]; 4],
}

impl ConditionalCov {
    pub fn max_abs_diff(&self, other: &ConditionalCov) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                m = m.max((self.matrix[i][j] - other.matrix[i][j]).abs());
            }
        }
        m
    }

    /// Standardized correlations with `(X1, .., X4)` in the row order above.
    pub fn correlations(&self) -> Result<(QuadrantCorr, f64, f64)> {
        let m = &self.matrix;
        let sd: Vec<f64> = (0..4).map(|i| m[i][i].max(0.0).sqrt()).collect();
        if sd.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateConditioning(format!(
                "zero conditional variance at t = {}",
                self.t
            )));
        }
        let r = |i: usize, j: usize| (m[i][j] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
        let c = QuadrantCorr {
            rho12: r(0, 1),
            rho13: r(0, 2),
            rho14: r(0, 3),
            rho23: r(1, 2),
            rho24: r(1, 3),
            rho34: r(2, 3),
        };
        Ok((c, sd[0], sd[1]))
    }

    /// `E[X2'(0) X2'(t) 1{X1(0)>0} 1{X1(t)>0} | X2(0) = X2(t) = 0]`: the
    /// quadrant expectation of the standardized vector rescaled by the
    /// conditional standard deviations of the derivative coordinates.
    pub fn quadrant_expectation(&self) -> Result<f64> {
        let (c, s1, s2) = self.correlations()?;
        // no safety margin here: small lags legitimately push rho34 towards 1
        if !(c.rho34.abs() < 1.0) {
            return Err(Error::Singularity(format!("conditional rho34 = ±1 at t = {}", self.t)));
        }
        Ok(s1 * s2 * quadrant_closed_form(&c))
    }
}

/// The closed-form conditional covariance matrix.
pub fn conditional_cov(model: &CovarianceModel, t: f64) -> Result<ConditionalCov> {
    if !model.x2_differentiable() {
        return Err(Error::Capability(
            "conditional covariance needs a differentiable X2".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("lag must be positive, got {t}")));
    }
    let r2 = model.r2(t);
    let d = model.one_minus_r2(t) * (1.0 + r2);
    if !(d > 0.0) {
        return Err(Error::DegenerateConditioning(format!("|r2({t})| = 1")));
    }
    let lambda = model.lambda22().unwrap_or(1.0);
    let r2p = model.require(Component::X2, 1, t)?;
    let r2pp = model.require(Component::X2, 2, t)?;
    let c0 = model.require(Component::Cross, 1, 0.0)?;
    let cp = model.require(Component::Cross, 1, t)?;
    let cm = model.require(Component::Cross, 1, -t)?;
    let (ep, em) = (model.r12(t), model.r12(-t));
    let r1 = model.r1(t);

    let c11 = lambda - r2p * r2p / d;
    let c12 = -r2pp - r2 * r2p * r2p / d;
    let c13 = -c0 + r2p * em / d;
    let c14 = -cp - r2 * r2p * ep / d;
    let c23 = -cm + r2 * r2p * em / d;
    let c24 = -c0 - r2p * ep / d;
    let c33 = 1.0 - em * em / d;
    let c44 = 1.0 - ep * ep / d;
    let c34 = r1 + r2 * ep * em / d;
    Ok(ConditionalCov {
        t,
        matrix: [
            [c11, c12, c13, c14],
            [c12, c11, c23, c24],
            [c13, c23, c33, c34],
            [c14, c24, c34, c44],
        ],
    })
}

/// Joint covariance of `(X2'(0), X2'(t), X1(0), X1(t), X2(0), X2(t))`.
pub fn joint_covariance(model: &CovarianceModel, t: f64) -> Result<[[f64; 6]; 6]> {
    let lambda = model
        .lambda22()
        .ok_or_else(|| Error::Capability("X2 not differentiable".into()))?;
    let r2p = model.require(Component::X2, 1, t)?;
    let r2pp = model.require(Component::X2, 2, t)?;
    let c0 = model.require(Component::Cross, 1, 0.0)?;
    let cp = model.require(Component::Cross, 1, t)?;
    let cm = model.require(Component::Cross, 1, -t)?;
    let mut m = [[0.0; 6]; 6];
    let mut set = |i: usize, j: usize, v: f64| {
        m[i][j] = v;
        m[j][i] = v;
    };
    set(0, 0, lambda);
    set(1, 1, lambda);
    set(0, 1, -r2pp);
    set(0, 2, -c0);
    set(0, 3, -cp);
    set(1, 2, -cm);
    set(1, 3, -c0);
    set(0, 4, 0.0);
    set(0, 5, -r2p);
    set(1, 4, r2p);
    set(1, 5, 0.0);
    set(2, 2, 1.0);
    set(3, 3, 1.0);
    set(2, 3, model.r1(t));
    set(2, 4, model.r12(0.0));
    set(2, 5, model.r12(-t));
    set(3, 4, model.r12(t));
    set(3, 5, model.r12(0.0));
    set(4, 4, 1.0);
    set(5, 5, 1.0);
    set(4, 5, model.r2(t));
    Ok(m)
}

/// Schur complement `Σ_AA - Σ_AB Σ_BB⁻¹ Σ_BA` conditioning the first four
/// coordinates on the last two.
pub fn generic_regression(joint: &[[f64; 6]; 6], t: f64) -> Result<ConditionalCov> {
    let s = SMatrix::<f64, 6, 6>::from_fn(|i, j| joint[i][j]);
    let bb: Matrix2<f64> = s.fixed_view::<2, 2>(4, 4).into_owned();
    let det = bb.determinant();
    let scale = bb.norm().max(f64::MIN_POSITIVE);
    if !(det.abs() > 1e-14 * scale * scale) {
        return Err(Error::DegenerateConditioning(format!(
            "conditioning block is singular (determinant {det:.3e})"
        )));
    }
    let inv = bb
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConditioning("singular block".into()))?;
    let ab = s.fixed_view::<4, 2>(0, 4).into_owned();
    let aa = s.fixed_view::<4, 4>(0, 0).into_owned();
    let cond = aa - ab * inv * ab.transpose();
    let mut matrix = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            matrix[i][j] = 0.5 * (cond[(i, j)] + cond[(j, i)]);
        }
    }
    Ok(ConditionalCov { t, matrix })
}

/// Hermite coefficients of the Dirac mass (`a`) and of
/// `g(x', z) = x' 1{rho1 x' + rho2 z ≥ 0}` (`d`).
#[derive(Clone, Debug, Serialize)]
pub struct ChaosCoefficients {
    pub rho1: f64,
    pub rho2: f64,
    pub order: u32,
    /// `a[k]` for `k = 0..=order`.
    pub a: Vec<f64>,
    /// `d[k2][k3]` for `k2 + k3 ≤ order`.
    pub d: Vec<Vec<f64>>,
    /// `d[k2][k3] sqrt(k2! k3!)`, the coefficients in the orthonormal basis.
    pub d_normalized: Vec<Vec<f64>>,
    /// Gauss-Hermite nodes used and the agreement reached with half as many.
    pub nodes: usize,
    pub quadrature_error: f64,
}

impl ChaosCoefficients {
    /// `‖g‖² = E[g(X', Z)²] = 1/2` for every `rho1`.
    pub fn g_norm_sq(&self) -> f64 {
        0.5
    }

    /// `Σ_{k2+k3 ≤ q} d² k2! k3!` for `q = 0..=order`.
    pub fn partial_norms(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.order as usize + 1);
        let mut acc = 0.0;
        for q in 0..=self.order as usize {
            for k2 in 0..=q {
                acc += self.d_normalized[k2][q - k2].powi(2);
            }
            out.push(acc);
        }
        out
    }
}

fn log_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

fn d_table(rho1: f64, rho2: f64, order: usize, n: usize) -> Vec<Vec<f64>> {
    let (x, w) = gauss_hermite(n);
    let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
    let mut d = vec![vec![0.0; order + 1]; order + 1];
    for (&xi, &wi) in x.iter().zip(&w) {
        let c = -rho1 * xi / rho2;
        let hx = hermite_normalized_table(order, xi);
        let hc = hermite_normalized_table(order, c);
        let phi = inv_sqrt_2pi * (-0.5 * c * c).exp();
        // J̃_k = E[h_k(Z) 1{Z ≥ c}]
        let mut j = vec![0.0; order + 1];
        j[0] = 0.5 * erfc(c / std::f64::consts::SQRT_2);
        for k in 1..=order {
            j[k] = hc[k - 1] * phi / (k as f64).sqrt();
        }
        for k2 in 0..=order {
            let base = wi * xi * hx[k2];
            for k3 in 0..=(order - k2) {
                d[k2][k3] += base * j[k3];
            }
        }
    }
    d
}

/// Coefficients up to total order `order`, Gauss-Hermite in `x'` with an
/// analytic inner integral in `z`; nodes double from 64 until two levels
/// agree to `1e-12`.
pub fn chaos_coefficients(rho1: f64, order: u32) -> Result<ChaosCoefficients> {
    if !(rho1.abs() < 1.0) {
        return Err(Error::Parameter(format!("|rho1| must be < 1, got {rho1}")));
    }
    if order < 1 {
        return Err(Error::Parameter("chaos order must be at least 1".into()));
    }
    let q = order as usize;
    let rho2 = (1.0 - rho1 * rho1).sqrt();
    let mut n = 64;
    let mut prev = d_table(rho1, rho2, q, n);
    let mut diff;
    loop {
        let next = d_table(rho1, rho2, q, 2 * n);
        diff = prev
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        n *= 2;
        prev = next;
        if diff < 1e-12 || n >= 1024 {
            break;
        }
    }
    let d: Vec<Vec<f64>> = prev
        .iter()
        .enumerate()
        .map(|(k2, row)| {
            row.iter()
                .enumerate()
                .map(|(k3, v)| v * (-0.5 * (log_factorial(k2) + log_factorial(k3))).exp())
                .collect()
        })
        .collect();
    Ok(ChaosCoefficients {
        rho1,
        rho2,
        order,
        a: (0..=order).map(dirac_coefficient).collect(),
        d,
        d_normalized: prev,
        nodes: n,
        quadrature_error: diff,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::covmodel::{bargmann_fock, cauchy, RegressionConvention, SharedCov};

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(2, 3.0).unwrap(), 8.0);
        assert_eq!(hermite(4, 0.0).unwrap(), 3.0);
        assert!(matches!(hermite(201, 0.1), Err(Error::Capability(_))));
    }

    #[test]
    fn mehler_by_two_dimensional_quadrature() {
        let (x, w) = gauss_hermite(12);
        for n in 0..=10u32 {
            for k in -9..=9 {
                let rho = 0.1 * k as f64;
                let s = (1.0 - rho * rho).sqrt();
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    let hx = hermite(n, *xi).unwrap();
                    for (zj, wj) in x.iter().zip(&w) {
                        acc += wi * wj * hx * hermite(n, rho * xi + s * zj).unwrap();
                    }
                }
                let fact: f64 = (1..=n).map(f64::from).product();
                assert!((acc - fact * rho.powi(n as i32)).abs() < 1e-9 * fact, "n={n} rho={rho}");
            }
        }
        let (x, w) = gauss_hermite(20);
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            for (zj, wj) in x.iter().zip(&w) {
                acc += wi * wj * hermite(3, *xi).unwrap() * hermite(3, 0.5 * xi + 0.75f64.sqrt() * zj).unwrap();
            }
        }
        assert!((acc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dirac_coefficients() {
        assert!((dirac_coefficient(0) - 0.3989422804014327).abs() < 1e-15);
        assert_eq!(dirac_coefficient(3), 0.0);
        for k in 0..30 {
            let a = dirac_coefficient(2 * k);
            let want = hermite(2 * k, 0.0).unwrap() / (2.0 * PI).sqrt() / (1..=2 * k).map(f64::from).product::<f64>();
            assert!((a - want).abs() <= 1e-12 * want.abs());
            let bounded = a * a * (1..=2 * k).map(f64::from).product::<f64>();
            assert!(bounded <= 1.0 / (2.0 * PI) + 1e-15);
        }
    }

    #[test]
    fn quadrant_examples() {
        let c = QuadrantCorr::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!((quadrant_expectation(&c).unwrap() - 0.125).abs() < 1e-15);
        let c = QuadrantCorr::new(0.0, 0.2, 0.0, 0.0, 0.1, 0.3).unwrap();
        let want = 0.02 / (2.0 * PI * 0.91f64.sqrt());
        assert!((quadrant_expectation(&c).unwrap() - want).abs() < 1e-15);
        assert!((want - 3.337e-3).abs() < 1e-6);
        assert!((quadrant_expectation_series(&c, 60).unwrap() - want).abs() < 1e-12);
        let near = QuadrantCorr::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.9999999).unwrap();
        assert!(matches!(quadrant_expectation(&near), Err(Error::Singularity(_))));
        assert!(matches!(
            QuadrantCorr::new(0.9, 0.9, 0.9, -0.9, 0.9, 0.9),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn series_order_zero() {
        let c = QuadrantCorr::new(0.3, 0.2, -0.1, 0.25, 0.15, 0.0).unwrap();
        let want = 0.3 / 4.0 + (0.2 * 0.15 - 0.1 * 0.25) / (2.0 * PI);
        assert!((quadrant_expectation_series(&c, 0).unwrap() - 0.3 / 4.0).abs() < 1e-16);
        assert!((quadrant_expectation_series(&c, 1).unwrap() - want).abs() < 1e-16);
    }

    #[test]
    fn series_error_decreases_at_high_correlation() {
        // tails of both pairings share a sign here, so the error cannot cross zero
        let c = QuadrantCorr::new(0.2, 0.1, 0.05, -0.1, 0.1, 0.95).unwrap();
        let exact = quadrant_expectation(&c).unwrap();
        let errs: Vec<f64> = (1..40)
            .map(|k| (quadrant_expectation_series(&c, 10 * k).unwrap() - exact).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn small_rho34_expansion() {
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&r34| {
                let c = QuadrantCorr::new(0.3, 0.2, 0.1, -0.1, 0.25, r34).unwrap();
                let same = 0.2 * -0.1 + 0.1 * 0.25;
                let lin = 0.3 / 4.0 + (0.3 * r34 + 0.2 * 0.25 - 0.1 * 0.1 - r34 * same) / (2.0 * PI);
                (quadrant_expectation(&c).unwrap() - lin) / (r34 * r34)
            })
            .collect();
        assert!(ratios.iter().all(|r| r.abs() < 1.0), "{ratios:?}");
    }

    #[test]
    fn quadrant_monte_carlo() {
        let c = QuadrantCorr::new(0.0, 0.2, 0.0, 0.0, 0.1, 0.3).unwrap();
        let (m, se) = quadrant_expectation_mc(&c, 1_000_000, 11).unwrap();
        let exact = quadrant_expectation(&c).unwrap();
        assert!((m - exact).abs() < 4.0 * se, "{m} ± {se} vs {exact}");
        // same-side pairings matter once rho34 is nonzero
        let c = QuadrantCorr::new(0.3, 0.4, 0.2, 0.5, 0.1, 0.6).unwrap();
        let (m, se) = quadrant_expectation_mc(&c, 1_000_000, 12).unwrap();
        let exact = quadrant_expectation(&c).unwrap();
        assert!((m - exact).abs() < 4.0 * se, "{m} ± {se} vs {exact}");
        let three = quadrant_expectation_three_term(&c).unwrap();
        assert!((m - three).abs() > 20.0 * se);
        assert!((quadrant_expectation_series(&c, 400).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn orthant_values() {
        assert_eq!(orthant_prob(0.0).unwrap(), 0.25);
        assert!((orthant_prob(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((orthant_prob(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for r in [-0.7, 0.0, 0.4, 0.99] {
            assert!((orthant_angle(r).unwrap() - PI * orthant_prob(r).unwrap()).abs() < 1e-14);
        }
        assert!(orthant_prob(1.1).is_err());
    }

    fn models() -> Vec<CovarianceModel> {
        let bf: SharedCov = Arc::new(bargmann_fock());
        let cy: SharedCov = Arc::new(cauchy());
        vec![
            CovarianceModel::iid(bf.clone()).unwrap(),
            CovarianceModel::iid(cy.clone()).unwrap(),
            CovarianceModel::independent(cy.clone(), bf.clone()).unwrap(),
            CovarianceModel::regression(bf.clone(), bf.clone(), 0.3, RegressionConvention::Consistent).unwrap(),
            CovarianceModel::regression(bf.clone(), cy, -0.6, RegressionConvention::Consistent).unwrap(),
        ]
    }

    #[test]
    fn closed_form_matches_schur_complement() {
        for m in models() {
            for k in 1..=50 {
                let t = 0.137 * k as f64;
                let closed = conditional_cov(&m, t).unwrap();
                let generic = generic_regression(&joint_covariance(&m, t).unwrap(), t).unwrap();
                assert!(closed.max_abs_diff(&generic) < 1e-10, "{} t={t}", m.describe());
            }
        }
    }

    #[test]
    fn independent_off_diagonal_blocks_vanish() {
        let m = &models()[2];
        let c = conditional_cov(m, 0.9).unwrap();
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert_eq!(c.matrix[i][j], 0.0);
        }
        let far = conditional_cov(&models()[0], 60.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((far.matrix[i][j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schur_edge_cases() {
        let mut id = [[0.0; 6]; 6];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let c = generic_regression(&id, 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.matrix[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        id[4][5] = 1.0;
        id[5][4] = 1.0;
        assert!(matches!(
            generic_regression(&id, 1.0),
            Err(Error::DegenerateConditioning(_))
        ));
    }

    #[test]
    fn chaos_coefficients_independent_case() {
        let cc = chaos_coefficients(0.0, 12).unwrap();
        assert!((cc.a[0] - 0.3989422804).abs() < 1e-10);
        assert!(cc.d[0][1].abs() < 1e-12);
        assert!((cc.d[1][1] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((cc.a[0] * cc.d[1][1] - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!((cc.d[1][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chaos_partial_norms_bounded() {
        for rho1 in [0.0, 0.3, -0.7] {
            let cc = chaos_coefficients(rho1, 30).unwrap();
            let p = cc.partial_norms();
            assert!(p.windows(2).all(|w| w[1] >= w[0] - 1e-15));
            assert!(
                *p.last().unwrap() <= cc.g_norm_sq() + 1e-10,
                "{rho1}: {:?} err {} nodes {}",
                &p[p.len() - 3..],
                cc.quadrature_error,
                cc.nodes
            );
            assert!(cc.quadrature_error < 1e-10);
        }
    }
}
