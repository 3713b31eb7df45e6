//! Numerical integration used by the moment formulas.
//!
//! * [`gauss_kronrod`]: globally adaptive 7/15-point Gauss-Kronrod on a finite
//!   interval, error estimate `|K15 - G7|` per panel.
//! * [`tanh_sinh`]: double-exponential rule for integrands with integrable
//!   endpoint singularities.
//! * [`semi_infinite`]: `[a, ∞)` mapped onto `[0, 1)` and handed to the
//!   adaptive rule.
//! * [`gauss_hermite`]: nodes and weights for the standard Gaussian measure.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        }
    }

    /// Sum of two independent pieces of one integral.
    pub fn combine(self, other: QuadResult) -> Self {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            // tie-break on position keeps the refinement order deterministic
            .then_with(|| other.a.partial_cmp(&self.a).unwrap_or(Ordering::Equal))
    }
}

fn kronrod_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Panels are bisected in order of decreasing error until the summed error
/// meets `max(abs_tol, rel_tol * |value|)` or the panel budget is spent; in
/// the latter case the returned error is simply larger than requested.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult::zero();
    }
    let (v, e) = kronrod_panel(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) && heap.len() < opts.max_panels {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod_panel(&mut f, worst.a, mid);
        let (v2, e2) = kronrod_panel(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum from the panels: the running totals accumulate rounding.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap_or(Ordering::Equal));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    QuadResult {
        value,
        error,
        evaluations,
    }
}

/// Adaptive integration over consecutive pieces `[b_0, b_1], [b_1, b_2], ...`.
pub fn gauss_kronrod_pieces<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], opts: QuadOptions) -> QuadResult {
    breaks
        .windows(2)
        .map(|w| gauss_kronrod(&mut f, w[0], w[1], opts))
        .fold(QuadResult::zero(), QuadResult::combine)
}

/// `∫_a^∞ f`, through the map `t = a + u / (1 - u)`.
pub fn semi_infinite<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOptions) -> QuadResult {
    gauss_kronrod(
        |u| {
            let one_minus = 1.0 - u;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let t = a + u / one_minus;
            let v = f(t) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Tanh-sinh quadrature on `[a, b]`.
///
/// The integrand is never evaluated at the endpoints; abscissae are formed
/// from the distance to the nearest endpoint so that points within
/// `1e-300` of a singular endpoint at the origin are still resolved. Near a
/// nonzero endpoint the resolution is one ulp of that endpoint. Levels
/// halve the step until two successive levels agree to `tol` (absolute) or
/// `max_level` is reached; the reported error is the last level difference.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_level: u32) -> QuadResult {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    const TAU_MAX: f64 = 6.0;
    let mut evaluations = 0usize;

    // Contribution of abscissa index `k` at step `h`, both signs.
    let mut node_sum = |tau: f64, f: &mut F| -> f64 {
        let u = FRAC_PI_2 * tau.sinh();
        let cosh_u = u.cosh();
        // weight of dx/dtau
        let w = FRAC_PI_2 * tau.cosh() / (cosh_u * cosh_u);
        if tau == 0.0 {
            evaluations += 1;
            let v = f(center);
            return if v.is_finite() { w * v } else { 0.0 };
        }
        // distance from the nearer endpoint: half * (1 - tanh|u|)
        let delta = half * 2.0 / (1.0 + (2.0 * u.abs()).exp());
        if delta <= 0.0 {
            return 0.0;
        }
        // each side is dropped on its own once it rounds onto its endpoint
        let mut v = 0.0;
        for x in [a + delta, b - delta] {
            if x > a && x < b {
                evaluations += 1;
                let fx = f(x);
                if fx.is_finite() {
                    v += fx;
                }
            }
        }
        w * v
    };

    let mut h = 1.0;
    let mut sum = 0.0;
    let mut k = 0;
    while (k as f64) * h <= TAU_MAX {
        sum += node_sum(k as f64 * h, &mut f);
        k += 1;
    }
    let mut estimate = half * h * sum;
    let mut error = f64::INFINITY;
    for _level in 1..=max_level {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= TAU_MAX {
            sum += node_sum(k as f64 * h, &mut f);
            k += 2;
        }
        let next = half * h * sum;
        error = (next - estimate).abs();
        estimate = next;
        if error < tol {
            break;
        }
    }
    QuadResult {
        value: estimate,
        error,
        evaluations,
    }
}

/// Nodes and probability weights (summing to one) of the `n`-point
/// Gauss-Hermite rule for the standard normal measure, by Golub-Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        let b = ((i + 1) as f64).sqrt();
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|p, q| p.partial_cmp(q).unwrap_or(Ordering::Equal));
    // Eigenvector weights are only accurate to eps in absolute terms, which
    // swamps the tiny weights of the outer nodes. Polish each node by Newton
    // and take w = exp(-x²/2) / (n ψ_{n-1}(x)²) with ψ_k = h_k exp(-x²/4).
    let mut pairs: Vec<(f64, f64)> = nodes
        .into_iter()
        .map(|mut x| {
            for _ in 0..3 {
                let (pn, pm) = scaled_hermite(n, x);
                if pm == 0.0 {
                    break;
                }
                x -= pn / ((n as f64).sqrt() * pm);
            }
            let (_, pm) = scaled_hermite(n, x);
            (x, (-0.5 * x * x).exp() / (n as f64 * pm * pm))
        })
        .collect();
    // symmetrize: the rule is exactly symmetric, the eigen solver is not
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

/// `(ψ_n(x), ψ_{n-1}(x))` with `ψ_k = He_k(x) / sqrt(k!) · exp(-x²/4)`, which
/// stays in range where `He_k` itself overflows.
fn scaled_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = (-0.25 * x * x).exp();
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kronrod_polynomial_and_smooth() {
        let r = gauss_kronrod(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, QuadOptions::default());
        assert!((r.value - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
        let r = gauss_kronrod(|x| x.sin(), 0.0, PI, QuadOptions::default());
        assert!((r.value - 2.0).abs() < 1e-13, "{r:?}");
    }

    #[test]
    fn kronrod_sqrt_singularity_converges() {
        let r = gauss_kronrod(|x| 1.0 / x.sqrt(), 0.0, 1.0, QuadOptions::with_tol(1e-10, 1e-10));
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let r = tanh_sinh(|x| x.powf(-0.8), 0.0, 1.0, 1e-12, 12);
        assert!((r.value - 5.0).abs() < 1e-9, "{r:?}");
        // abscissae cannot approach a nonzero endpoint closer than one ulp
        let r = tanh_sinh(|x| (1.0 - x * x).sqrt().recip(), -1.0, 1.0, 1e-12, 12);
        assert!((r.value - PI).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn semi_infinite_gaussian() {
        let r = semi_infinite(|t| (-t * t).exp(), 0.0, QuadOptions::default());
        assert!((r.value - PI.sqrt() / 2.0).abs() < 1e-12, "{r:?}");
        let r = semi_infinite(|t| 1.0 / (1.0 + t * t), 0.0, QuadOptions::default());
        assert!((r.value - PI / 2.0).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(20);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(8) - 105.0).abs() < 1e-9);
    }
}
