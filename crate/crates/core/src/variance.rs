//! Karhunen–Loève estimators of the noise variance from the field values at
//! `2N` design points, after regressing out `X(z)` (and optionally `X'(z)`).

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knots::Regression;
use crate::sr_model::{ModelContext, Observation, TorusPoint};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub dof: usize,
    #[serde(skip)]
    pub design: Vec<TorusPoint<f64>>,
}

impl VarianceEstimate {
    pub fn sigma(&self) -> f64 {
        self.value.sqrt()
    }
}

/// `z_j = (t + 2π(j-1)/N, θ)` and `z_{N+j} = (t_j, θ + π/2)`; the first is `z`.
pub fn design_points(z: TorusPoint<f64>, fc: usize) -> Vec<TorusPoint<f64>> {
    let n = 2 * fc + 1;
    let row = |theta: f64| (0..n).map(move |j| TorusPoint::new(z.t + TAU * j as f64 / n as f64, theta));
    row(z.theta).chain(row(z.theta + FRAC_PI_2)).collect()
}

/// Residual design: values, gradient-aware regression coefficients and the
/// conditional correlation of the regressed field at points `z_2..z_{2N}`.
struct Residuals {
    values: DVector<f64>,
    correlation: DMatrix<f64>,
}

fn residuals(obs: &Observation<f64>, z: TorusPoint<f64>, design: &[TorusPoint<f64>], mode: Regression) -> Residuals {
    let ctx: ModelContext<f64> = obs.context();
    let lt_inv = [1.0 / ctx.alpha1, 1.0];
    let jet = obs.z_jet(z.t);
    let xz = jet.x(z.theta);
    let gz = jet.x_grad(z.theta);
    let pts = &design[1..];
    let jets: Vec<_> = pts
        .iter()
        .map(|p| {
            let (rho, grad, _) = ctx.correlation_jet(p.displacement_to(&z));
            let grad = match mode {
                Regression::OnValue => [0.0, 0.0],
                Regression::OnValueAndGradient => grad,
            };
            (rho, grad)
        })
        .collect();
    let values = DVector::from_iterator(
        pts.len(),
        pts.iter()
            .zip(&jets)
            .map(|(p, (rho, g))| obs.x(*p) - rho * xz - (g[0] * lt_inv[0] * gz[0] + g[1] * lt_inv[1] * gz[1])),
    );
    let correlation = DMatrix::from_fn(pts.len(), pts.len(), |i, j| {
        let (ri, gi) = jets[i];
        let (rj, gj) = jets[j];
        ctx.correlation(pts[j].displacement_to(&pts[i])) - ri * rj - (gi[0] * lt_inv[0] * gj[0] + gi[1] * gj[1])
    });
    Residuals { values, correlation }
}

/// `vᵀ C⁺ v` with `C⁺` the pseudo-inverse truncated to the `expected` rank.
fn whitened_norm(res: &Residuals, expected: usize) -> Result<f64> {
    let eig = SymmetricEigen::new(res.correlation.clone());
    let largest = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = RANK_TOLERANCE * largest;
    let found = eig.eigenvalues.iter().filter(|&&l| l > cutoff).count();
    if found != expected {
        return Err(Error::RankDeficient { expected, found });
    }
    Ok(eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .filter(|(l, _)| **l > cutoff)
        .map(|(l, q)| q.dot(&res.values).powi(2) / l)
        .sum())
}

fn estimate(obs: &Observation<f64>, z: TorusPoint<f64>, mode: Regression) -> Result<VarianceEstimate> {
    let n = obs.context().n;
    let dof = match mode {
        Regression::OnValue => 2 * n - 1,
        Regression::OnValueAndGradient => 2 * n - 3,
    };
    let design = design_points(z, obs.fc());
    let res = residuals(obs, z, &design, mode);
    let q = whitened_norm(&res, dof)?;
    Ok(VarianceEstimate {
        value: q / dof as f64,
        dof,
        design,
    })
}

/// Estimator with `X(z)` regressed out; `(2N-1)σ̂²/σ²` is χ² with `2N-1` dof.
pub fn sigma_hat_grid(obs: &Observation<f64>, z: TorusPoint<f64>) -> Result<VarianceEstimate> {
    estimate(obs, z, Regression::OnValue)
}

/// Estimator with `X(z)` and `X'(z)` regressed out; `2N-3` degrees of freedom.
pub fn sigma_hat_cond(obs: &Observation<f64>, z: TorusPoint<f64>) -> Result<VarianceEstimate> {
    estimate(obs, z, Regression::OnValueAndGradient)
}

/// Numerical rank of the regressed correlation matrix on the design at `z`.
pub fn residual_rank(fc: usize, mode: Regression) -> usize {
    let obs = Observation::new(fc, vec![num_complex::Complex::new(0.0, 0.0); 2 * fc + 1], None)
        .expect("well-formed zero observation");
    let z = TorusPoint::new(0.0, 0.0);
    let res = residuals(&obs, z, &design_points(z, fc), mode);
    let eig = SymmetricEigen::new(res.correlation);
    let largest = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    eig.eigenvalues
        .iter()
        .filter(|&&l| l > RANK_TOLERANCE * largest)
        .count()
}
