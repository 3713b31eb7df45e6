use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::GridSpec;
use crate::covmodel::CovarianceModel;
use crate::error::{Error, Result};
use crate::rng::{normals, stream, Purpose};

pub const MAX_CHOLESKY_POINTS: usize = 4096;
const EIGEN_TOL: f64 = -1e-10;

pub(super) struct CholeskyPlan {
    n: usize,
    l: DMatrix<f64>,
    pub jitter: f64,
}

/// Joint covariance of `(X1(t_0..), X2(t_0..))`.
fn joint_matrix(model: &CovarianceModel, grid: GridSpec) -> DMatrix<f64> {
    let n = grid.n;
    let dt = grid.dt();
    let lag = |k: isize| k as f64 * dt;
    let r1: Vec<f64> = (0..n).map(|k| model.r1(lag(k as isize))).collect();
    let r2: Vec<f64> = (0..n).map(|k| model.r2(lag(k as isize))).collect();
    // r12 at lags -(n-1)..=(n-1), index shifted by n-1
    let r12: Vec<f64> = (0..2 * n - 1)
        .map(|k| model.r12(lag(k as isize - (n as isize - 1))))
        .collect();
    DMatrix::from_fn(2 * n, 2 * n, |a, b| {
        let (i, ci) = (a % n, a / n);
        let (j, cj) = (b % n, b / n);
        let d = i.abs_diff(j);
        match (ci, cj) {
            (0, 0) => r1[d],
            (1, 1) => r2[d],
            // E[X1(t_i) X2(t_j)] = r12(t_i - t_j)
            (0, 1) => r12[i + n - 1 - j],
            _ => r12[j + n - 1 - i],
        }
    })
}

impl CholeskyPlan {
    pub fn new(model: &CovarianceModel, grid: GridSpec) -> Result<Self> {
        if grid.n > MAX_CHOLESKY_POINTS {
            return Err(Error::Parameter(format!(
                "exact sampling is limited to {MAX_CHOLESKY_POINTS} grid points, got {}",
                grid.n
            )));
        }
        let sigma = joint_matrix(model, grid);
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("covariance matrix has non-finite entries".into()));
        }
        if let Some(c) = sigma.clone().cholesky() {
            return Ok(CholeskyPlan {
                n: grid.n,
                l: c.l(),
                jitter: 0.0,
            });
        }
        let lmin = SymmetricEigen::new(sigma.clone()).eigenvalues.min();
        if lmin < EIGEN_TOL {
            return Err(Error::Model(format!(
                "joint covariance is indefinite: smallest eigenvalue {lmin:.3e}"
            )));
        }
        let mut jitter = 1e-12;
        while jitter <= 1e-8 {
            let mut s = sigma.clone();
            for i in 0..s.nrows() {
                s[(i, i)] += jitter;
            }
            if let Some(c) = s.cholesky() {
                return Ok(CholeskyPlan {
                    n: grid.n,
                    l: c.l(),
                    jitter,
                });
            }
            jitter *= 10.0;
        }
        Err(Error::Model(format!(
            "factorization failed even with jitter 1e-8 (smallest eigenvalue {lmin:.3e})"
        )))
    }

    pub fn sample(&self, seed: u64, replication: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = stream(seed, replication, Purpose::Path);
        let z = DVector::from_vec(normals(&mut rng, 2 * self.n));
        let x = &self.l * z;
        (
            x.rows(0, self.n).iter().copied().collect(),
            x.rows(self.n, self.n).iter().copied().collect(),
        )
    }
}
