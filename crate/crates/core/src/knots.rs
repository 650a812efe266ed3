//! The first two knots of the path: the global maximizer `ẑ` of the field
//! `X` with its value `λ₁`, the maximizer `ŷ` of the field regressed on
//! `X(ẑ)` with value `λ₂`, and the Hessian remainder at `ẑ`.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{maximize_1d, maximize_2d_with, GaussLegendre, SimplexOptions};
use crate::sr_model::{wrap_angle, ModelContext, Observation, Sym2, TorusPoint, ZJet};

/// Below this torus radius the second-knot ratio is evaluated through its
/// Taylor-remainder form instead of the direct quotient.
pub const RADIUS_SWITCH: f64 = 0.5;

const NEAR_SINGULAR: f64 = 1e-14;
const TAYLOR_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotOptions {
    /// Coarse t-grid for the first knot, in multiples of N.
    pub first_grid_factor: usize,
    /// Coarse t-grid for the second knot, in multiples of N.
    pub second_grid_factor: usize,
    /// Number of θ values in the second-knot grid.
    pub second_grid_theta: usize,
    /// How many of the best coarse local maxima are refined for the second knot.
    pub second_refine_count: usize,
    pub refine_tol: f64,
}

impl Default for KnotOptions {
    fn default() -> Self {
        KnotOptions {
            first_grid_factor: 32,
            second_grid_factor: 16,
            second_grid_theta: 64,
            second_refine_count: 8,
            refine_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstKnot {
    pub z_hat: TorusPoint<f64>,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondKnot {
    pub y_hat: TorusPoint<f64>,
    pub lambda2: f64,
    /// The supremum is the radial limit at `ẑ` and is not attained; `y_hat`
    /// then equals `z_hat`.
    pub at_radial_limit: bool,
}

/// Hessian remainder `R = X''(ẑ) + Λ̃ λ₁ = [[-α₂, α₃], [α₃, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Remainder {
    #[serde(skip)]
    pub matrix: Sym2<f64>,
    pub alpha2: f64,
    pub alpha3: f64,
}

/// Everything the Rice and grid tests need from the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnotCertificate {
    pub z_hat: TorusPoint<f64>,
    pub lambda1: f64,
    pub y_hat: TorusPoint<f64>,
    pub lambda2: f64,
    #[serde(skip)]
    pub remainder: Sym2<f64>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub grad_norm_at_zhat: f64,
    pub lambda2_at_radial_limit: bool,
}

impl KnotCertificate {
    /// `X''(ẑ) = -Λ̃ λ₁ + R`.
    pub fn hessian(&self) -> Sym2<f64> {
        Sym2::diag(-self.alpha1 * self.lambda1, -self.lambda1).add(&self.remainder)
    }
}

/// Which part of the field the regression removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regression {
    OnValue,
    OnValueAndGradient,
}

fn grid_size(factor: usize, n: usize) -> usize {
    (factor * n).max(8)
}

/// Global maximum of `|Z|` (equivalently of `X`).
pub fn first_knot(obs: &Observation<f64>, opts: &KnotOptions) -> Result<FirstKnot> {
    let ctx = obs.context();
    let fc = obs.fc() as i64;
    let has_oscillation = (-fc..=fc)
        .zip(obs.y())
        .any(|(k, y)| k != 0 && (y.re != 0.0 || y.im != 0.0));
    if !has_oscillation {
        return Err(Error::DegenerateProcess);
    }

    let m = grid_size(opts.first_grid_factor, ctx.n);
    let h = TAU / m as f64;
    let values: Vec<f64> = (0..m).map(|i| obs.z(i as f64 * h).norm_sqr()).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 1e-12 * hi.max(1e-300) {
        return Err(Error::DegenerateProcess);
    }

    let modulus2 = |t: f64| obs.z(t).norm_sqr();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..m {
        let prev = values[(i + m - 1) % m];
        let next = values[(i + 1) % m];
        if !(values[i] >= prev && values[i] >= next) {
            continue;
        }
        let t0 = i as f64 * h;
        let coarse = maximize_1d(modulus2, (t0 - h, t0 + h), opts.refine_tol)?;
        let t = wrap_angle(polish_modulus_peak(obs, coarse.argmax));
        let v = obs.z(t).norm_sqr();
        let better = match best {
            None => true,
            Some((bt, bv)) => v > bv || (v == bv && t < bt),
        };
        if better {
            best = Some((t, v));
        }
    }
    let (t_hat, _) = best.ok_or(Error::DegenerateProcess)?;
    let z = obs.z(t_hat);
    Ok(FirstKnot {
        z_hat: TorusPoint::new(t_hat, z.arg()),
        lambda1: z.norm(),
    })
}

// Newton steps on d/dt |Z|² = 2 Re(conj(Z) Z'), started inside the basin
// located by the bracketing search, where |Z|² is flat to rounding.
fn polish_modulus_peak(obs: &Observation<f64>, t0: f64) -> f64 {
    let mut t = t0;
    for _ in 0..8 {
        let ZJet { z, dz, d2z } = obs.z_jet(t);
        let slope = (z.conj() * dz).re;
        let curvature = dz.norm_sqr() + (z.conj() * d2z).re;
        if curvature >= 0.0 {
            return t0;
        }
        let step = slope / curvature;
        if step.abs() > 1e-4 {
            return t0;
        }
        t -= step;
        if step.abs() < 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    t
}

/// `X^z(y)` (regression on `X(z)`) or `X^{|z}(y)` (regression on `X(z)`
/// and `X'(z)`), normalized by `1 - ρ(z - y)`.
pub fn regressed_value(
    obs: &Observation<f64>,
    z: TorusPoint<f64>,
    y: TorusPoint<f64>,
    mode: Regression,
) -> Result<f64> {
    let ctx = obs.context();
    let d_zy = y.displacement_to(&z);
    let (rho, rho_grad, _) = ctx.correlation_jet(d_zy);
    let one_minus = 1.0 - rho;
    if !(one_minus > NEAR_SINGULAR) {
        return Err(Error::NearSingular {
            one_minus_rho: one_minus,
        });
    }
    let jet_z = obs.z_jet(z.t);
    let xz = jet_z.x(z.theta);
    let xy = obs.x(y);
    let correction = match mode {
        Regression::OnValue => 0.0,
        Regression::OnValueAndGradient => {
            let g = jet_z.x_grad(z.theta);
            rho_grad[0] * g[0] / ctx.alpha1 + rho_grad[1] * g[1]
        }
    };
    Ok((xy - rho * xz - correction) / one_minus)
}

/// `R` and the coefficients `α₂`, `α₃` at the first knot.
pub fn hessian_and_alphas(obs: &Observation<f64>, first: &FirstKnot) -> Result<Remainder> {
    let ctx = obs.context();
    let (t, theta) = (first.z_hat.t, first.z_hat.theta);
    let inv_sqrt_n = (ctx.n as f64).sqrt().recip();
    let (mut alpha2, mut alpha3) = (0.0, 0.0);
    for (k, y) in ctx.frequencies().zip(obs.y()) {
        let kf = k as f64;
        let c = (y * num_complex::Complex::from_polar(1.0, kf * t - theta)).re;
        alpha2 += (kf * kf - ctx.alpha1) * c;
        alpha3 += kf * c;
    }
    let remainder = Remainder {
        matrix: Sym2::new(-alpha2 * inv_sqrt_n, alpha3 * inv_sqrt_n, 0.0),
        alpha2: alpha2 * inv_sqrt_n,
        alpha3: alpha3 * inv_sqrt_n,
    };
    let hess = ctx.lambda_tilde().scale(-first.lambda1).add(&remainder.matrix);
    if !hess.is_negative_definite() {
        return Err(Error::NotAMaximum);
    }
    Ok(remainder)
}

/// The normalized increment `g(y) = (X(y) - λ₁) / (1 - ρ(y - ẑ))` around a
/// fixed first knot, with a cancellation-free form near `ẑ`.
pub struct SecondKnotRatio<'a> {
    obs: &'a Observation<f64>,
    ctx: ModelContext<f64>,
    z_hat: TorusPoint<f64>,
    lambda1: f64,
    rule: GaussLegendre<f64>,
    taylor_weights: Vec<f64>,
    hess_at_zhat: Sym2<f64>,
}

impl<'a> SecondKnotRatio<'a> {
    pub fn new(obs: &'a Observation<f64>, first: &FirstKnot) -> Self {
        let rule = GaussLegendre::<f64>::new(TAYLOR_NODES);
        // map [-1, 1] to h ∈ [0, 1] and fold in the (1 - h) kernel
        let taylor_weights = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&x, &w)| 0.5 * w * (1.0 - 0.5 * (x + 1.0)))
            .collect();
        SecondKnotRatio {
            obs,
            ctx: obs.context(),
            z_hat: first.z_hat,
            lambda1: first.lambda1,
            rule,
            taylor_weights,
            hess_at_zhat: obs.x_hess(first.z_hat),
        }
    }

    fn h_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rule
            .nodes()
            .iter()
            .zip(&self.taylor_weights)
            .map(|(&x, &w)| (0.5 * (x + 1.0), w))
    }

    /// `(1/2N) Σ_k w_k² sinc²(r w_k / 2)` with `w_k = k cos α - sin α`;
    /// multiplied by `r²` it equals `1 - ρ`.
    pub fn denominator(&self, r: f64, direction: [f64; 2]) -> f64 {
        let [c, s] = direction;
        self.ctx
            .frequencies()
            .map(|k| {
                let w = k as f64 * c - s;
                let arg = 0.5 * r * w;
                let sinc = if arg == 0.0 { 1.0 } else { arg.sin() / arg };
                w * w * sinc * sinc
            })
            .sum::<f64>()
            / (2.0 * self.ctx.n as f64)
    }

    /// `∫₀¹ (1 - h) uᵀ X''(ẑ + h d) u dh`.
    pub fn numerator(&self, d: [f64; 2], direction: [f64; 2]) -> f64 {
        self.h_nodes()
            .map(|(h, w)| {
                let p = TorusPoint::new(self.z_hat.t + h * d[0], self.z_hat.theta + h * d[1]);
                w * self.obs.x_hess(p).quad(direction)
            })
            .sum()
    }

    /// `g` at displacement `d` from `ẑ`; `None` at `d = 0`.
    pub fn at_displacement(&self, d: [f64; 2]) -> Option<f64> {
        let y = self.z_hat.offset(d);
        let d = self.z_hat.displacement_to(&y);
        let r = d[0].hypot(d[1]);
        if r == 0.0 {
            return None;
        }
        if r > RADIUS_SWITCH {
            Some(self.direct(y, d))
        } else {
            let u = [d[0] / r, d[1] / r];
            Some(self.numerator(d, u) / self.denominator(r, u))
        }
    }

    pub fn direct(&self, y: TorusPoint<f64>, d: [f64; 2]) -> f64 {
        (self.obs.x(y) - self.lambda1) / (1.0 - self.ctx.correlation(d))
    }

    /// Value of `g` as `y → ẑ` along `u`: `uᵀX''(ẑ)u / uᵀΛ̃u`.
    pub fn radial_limit(&self, u: [f64; 2]) -> f64 {
        self.hess_at_zhat.quad(u) / self.ctx.lambda_tilde().quad(u)
    }

    /// Supremum of the radial limit over directions: the largest eigenvalue
    /// of `Λ̃^{-1/2} X''(ẑ) Λ̃^{-1/2}`.
    pub fn sup_radial_limit(&self) -> f64 {
        let s = self.ctx.alpha1.sqrt().recip();
        let h = self.hess_at_zhat;
        Sym2::new(h.tt * s * s, h.t_theta * s, h.theta_theta).eigenvalues()[1]
    }
}

/// Second knot `λ₂ = λ₁ + sup_y g(y)`.
pub fn second_knot(obs: &Observation<f64>, first: &FirstKnot, opts: &KnotOptions) -> Result<SecondKnot> {
    let ctx = obs.context();
    let ratio = SecondKnotRatio::new(obs, first);
    let nt = grid_size(opts.second_grid_factor, ctx.n);
    let nth = opts.second_grid_theta.max(4);
    let (ht, hth) = (TAU / nt as f64, TAU / nth as f64);

    let signed = |i: usize, n: usize, h: f64| {
        let i = i as i64;
        let n = n as i64;
        (if i > n / 2 { i - n } else { i }) as f64 * h
    };

    // Coarse grid relative to ẑ, with per-row caches of Z and of the Taylor-node jets.
    let mut grid = vec![f64::NEG_INFINITY; nt * nth];
    for i in 0..nt {
        let dt = signed(i, nt, ht);
        let jet = obs.z_jet(ratio.z_hat.t + dt);
        let gamma = ctx.kernel(dt)[0];
        let taylor_jets: Option<Vec<(f64, f64, ZJet<f64>)>> = (dt.abs() <= RADIUS_SWITCH).then(|| {
            ratio
                .h_nodes()
                .map(|(h, w)| (h, w, obs.z_jet(ratio.z_hat.t + h * dt)))
                .collect()
        });
        for j in 0..nth {
            let dth = signed(j, nth, hth);
            let r = dt.hypot(dth);
            if r == 0.0 {
                continue;
            }
            let theta = ratio.z_hat.theta + dth;
            grid[i * nth + j] = if r > RADIUS_SWITCH {
                (jet.x(theta) - first.lambda1) / (1.0 - gamma * dth.cos())
            } else {
                let u = [dt / r, dth / r];
                let num: f64 = taylor_jets
                    .as_ref()
                    .expect("rows within the switch radius carry Taylor jets")
                    .iter()
                    .map(|(h, w, jz)| w * jz.x_hess(ratio.z_hat.theta + h * dth).quad(u))
                    .sum();
                num / ratio.denominator(r, u)
            };
        }
    }

    let mut peaks: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..nt {
        for j in 0..nth {
            let v = grid[i * nth + j];
            if !v.is_finite() {
                continue;
            }
            let is_peak = (-1i64..=1).all(|a| {
                (-1i64..=1).all(|b| {
                    if a == 0 && b == 0 {
                        return true;
                    }
                    let ii = (i as i64 + a).rem_euclid(nt as i64) as usize;
                    let jj = (j as i64 + b).rem_euclid(nth as i64) as usize;
                    let w = grid[ii * nth + jj];
                    !(w > v)
                })
            });
            if is_peak {
                peaks.push((i, j, v));
            }
        }
    }
    peaks.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    peaks.truncate(opts.second_refine_count.max(1));

    // The θ-circle through ẑ, where X^ẑ vanishes identically.
    let circle = TorusPoint::new(first.z_hat.t, first.z_hat.theta + std::f64::consts::PI);
    let mut best = (circle, -first.lambda1, false);

    let simplex = SimplexOptions {
        initial_step: 0.5 * ht.min(hth),
        tol: opts.refine_tol,
        max_iter: 5_000,
        restarts: 4,
    };
    for &(i, j, v) in &peaks {
        let start = [signed(i, nt, ht), signed(j, nth, hth)];
        let objective = |d: [f64; 2]| ratio.at_displacement(d).unwrap_or(f64::NAN);
        let (d, g) = match maximize_2d_with(objective, start, &simplex) {
            Ok(m) if m.max >= v => (m.argmax, m.max),
            Ok(_) => (start, v),
            Err(e) => return Err(e),
        };
        let y = first.z_hat.offset(d);
        if g > best.1 || (g == best.1 && y.t < best.0.t) {
            best = (y, g, false);
        }
    }

    let boundary = ratio.sup_radial_limit();
    if boundary > best.1 {
        best = (first.z_hat, boundary, true);
    }
    Ok(SecondKnot {
        y_hat: best.0,
        lambda2: first.lambda1 + best.1,
        at_radial_limit: best.2,
    })
}

/// First knot, remainder and second knot in one call.
pub fn certify(obs: &Observation<f64>, opts: &KnotOptions) -> Result<KnotCertificate> {
    let first = first_knot(obs, opts)?;
    let remainder = hessian_and_alphas(obs, &first)?;
    let second = second_knot(obs, &first, opts)?;
    let g = obs.x_grad(first.z_hat);
    Ok(KnotCertificate {
        z_hat: first.z_hat,
        lambda1: first.lambda1,
        y_hat: second.y_hat,
        lambda2: second.lambda2,
        remainder: remainder.matrix,
        alpha1: obs.context().alpha1,
        alpha2: remainder.alpha2,
        alpha3: remainder.alpha3,
        grad_norm_at_zhat: g[0].hypot(g[1]),
        lambda2_at_radial_limit: second.at_radial_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::sr_model::{synthesize, Atom, AtomicMeasure};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex;
    use std::f64::consts::PI;

    fn null_obs(fc: usize, seed: u64) -> Observation<f64> {
        synthesize(&AtomicMeasure::empty(), fc, 1.0, RngStream::new(seed, 0)).unwrap()
    }

    fn spike(fc: usize, x: f64, a: Complex<f64>) -> Observation<f64> {
        let mu = AtomicMeasure::new(vec![Atom { location: x, weight: a }]).unwrap();
        synthesize(&mu, fc, 0.0, RngStream::new(0, 0)).unwrap()
    }

    #[test]
    fn noiseless_spike_first_knot() {
        let obs = spike(5, 2.2, Complex::new(1.7, 0.0));
        let k = first_knot(&obs, &KnotOptions::default()).unwrap();
        assert_abs_diff_eq!(k.z_hat.t, 2.2, epsilon = 1e-10);
        assert!(k.z_hat.theta.min(TAU - k.z_hat.theta) < 1e-12);
        assert_abs_diff_eq!(k.lambda1, 1.7, epsilon = 1e-13);

        let obs = spike(3, 4.0, Complex::from_polar(2.5, 1.1));
        let k = first_knot(&obs, &KnotOptions::default()).unwrap();
        assert_abs_diff_eq!(k.z_hat.theta, 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(k.lambda1, 2.5, epsilon = 1e-13);
    }

    #[test]
    fn flat_process_is_degenerate() {
        let mut y = vec![Complex::new(0.0, 0.0); 7];
        y[3] = Complex::new(1.0, 0.0);
        let obs = Observation::new(3, y, None).unwrap();
        assert!(matches!(
            first_knot(&obs, &KnotOptions::default()),
            Err(Error::DegenerateProcess)
        ));
        let obs = Observation::new(2, vec![Complex::new(0.0, 0.0); 5], None).unwrap();
        assert!(matches!(
            first_knot(&obs, &KnotOptions::default()),
            Err(Error::DegenerateProcess)
        ));
    }

    #[test]
    fn first_knot_is_stationary() {
        for seed in 0..20 {
            let obs = null_obs(3 + (seed as usize % 5), seed);
            let k = first_knot(&obs, &KnotOptions::default()).unwrap();
            let g = obs.x_grad(k.z_hat);
            assert!(g[0].hypot(g[1]) < 1e-8 * k.lambda1.max(1.0));
            assert!(obs.x_hess(k.z_hat).is_negative_definite());
        }
    }

    #[test]
    fn noiseless_spike_alphas_vanish() {
        let obs = spike(4, 1.0, Complex::new(2.0, 0.0));
        let first = first_knot(&obs, &KnotOptions::default()).unwrap();
        let rem = hessian_and_alphas(&obs, &first).unwrap();
        assert_abs_diff_eq!(rem.alpha2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rem.alpha3, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn remainder_matches_analytic_hessian() {
        for seed in 0..10 {
            let obs = null_obs(3, seed);
            let first = first_knot(&obs, &KnotOptions::default()).unwrap();
            let rem = hessian_and_alphas(&obs, &first).unwrap();
            assert_eq!(rem.matrix.theta_theta, 0.0);
            let expected = obs
                .x_hess(first.z_hat)
                .add(&obs.context().lambda_tilde().scale(first.lambda1));
            assert!(rem.matrix.max_abs_diff(&expected) < 1e-9);
        }
    }

    #[test]
    fn non_maximum_is_rejected() {
        let obs = spike(3, 1.0, Complex::new(1.0, 0.0));
        // the antipodal phase is a minimum of X
        let fake = FirstKnot {
            z_hat: TorusPoint::new(1.0, PI),
            lambda1: -1.0,
        };
        assert!(matches!(hessian_and_alphas(&obs, &fake), Err(Error::NotAMaximum)));
    }

    #[test]
    fn theta_circle_regression_vanishes() {
        let obs = null_obs(3, 42);
        let first = first_knot(&obs, &KnotOptions::default()).unwrap();
        for &delta in &[0.3, 1.0, 2.0, PI, 4.0] {
            let y = TorusPoint::new(first.z_hat.t, first.z_hat.theta + delta);
            let v = regressed_value(&obs, first.z_hat, y, Regression::OnValue).unwrap();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn regressions_agree_where_gradient_vanishes() {
        let obs = null_obs(4, 3);
        let first = first_knot(&obs, &KnotOptions::default()).unwrap();
        for i in 1..20 {
            let y = TorusPoint::new(0.3 * i as f64, 0.7 * i as f64);
            let a = regressed_value(&obs, first.z_hat, y, Regression::OnValue).unwrap();
            let b = regressed_value(&obs, first.z_hat, y, Regression::OnValueAndGradient).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn near_singular_regression_is_reported() {
        let obs = null_obs(3, 1);
        let z = TorusPoint::new(1.0, 1.0);
        assert!(matches!(
            regressed_value(&obs, z, z, Regression::OnValue),
            Err(Error::NearSingular { .. })
        ));
    }

    // At a generic point the gradient term matters; the regressed field must
    // tend to uᵀ R(z) u / uᵀ Λ̃ u with R(z) = X''(z) + Λ̃ X(z).
    #[test]
    fn gradient_regression_radial_limit() {
        let obs = null_obs(3, 8);
        let ctx = obs.context();
        let z = TorusPoint::new(0.9, 2.0);
        assert!(obs.x_grad(z)[0].abs() > 0.1);
        let rz = obs.x_hess(z).add(&ctx.lambda_tilde().scale(obs.x(z)));
        for &alpha in &[0.2f64, 1.3, 2.8, 4.4] {
            let u = [alpha.cos(), alpha.sin()];
            let limit = rz.quad(u) / ctx.lambda_tilde().quad(u);
            let at = |s: f64| {
                regressed_value(&obs, z, z.offset([s * u[0], s * u[1]]), Regression::OnValueAndGradient).unwrap()
            };
            let (a, b) = (at(1e-3), at(1e-4));
            // first-order Richardson extrapolation in the radius
            let extrapolated = (10.0 * b - a) / 9.0;
            assert!(
                (extrapolated - limit).abs() < 1e-3 * limit.abs().max(1.0),
                "{extrapolated} vs {limit}"
            );
        }
    }

    #[test]
    fn ratio_branches_agree_at_switch_radius() {
        for seed in 0..5 {
            let obs = null_obs(3, seed);
            let first = first_knot(&obs, &KnotOptions::default()).unwrap();
            let ratio = SecondKnotRatio::new(&obs, &first);
            for i in 0..12 {
                let alpha = i as f64 * 0.5;
                let u = [alpha.cos(), alpha.sin()];
                let d = [RADIUS_SWITCH * u[0], RADIUS_SWITCH * u[1]];
                let y = first.z_hat.offset(d);
                let taylor = ratio.numerator(d, u) / ratio.denominator(RADIUS_SWITCH, u);
                assert_abs_diff_eq!(taylor, ratio.direct(y, d), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn ratio_tends_to_radial_limit() {
        let obs = null_obs(3, 17);
        let first = first_knot(&obs, &KnotOptions::default()).unwrap();
        let ratio = SecondKnotRatio::new(&obs, &first);
        for i in 0..8 {
            let alpha = i as f64 * 0.8;
            let u = [alpha.cos(), alpha.sin()];
            let g = ratio.at_displacement([1e-3 * u[0], 1e-3 * u[1]]).unwrap();
            assert!((g - ratio.radial_limit(u)).abs() < 1e-3 * ratio.radial_limit(u).abs());
        }
    }

    #[test]
    fn noiseless_spike_second_knot_is_zero() {
        let obs = spike(3, 2.0, Complex::new(1.5, 0.0));
        let cert = certify(&obs, &KnotOptions::default()).unwrap();
        assert_abs_diff_eq!(cert.lambda2, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn second_knot_bounds_and_homogeneity() {
        let opts = KnotOptions::default();
        for seed in 0..10 {
            let obs = null_obs(3, seed);
            let cert = certify(&obs, &opts).unwrap();
            assert!(cert.lambda2 >= 0.0 && cert.lambda2 < cert.lambda1);
            let scaled = certify(&obs.scaled(3.5), &opts).unwrap();
            assert_abs_diff_eq!(scaled.lambda2 / 3.5, cert.lambda2, epsilon = 1e-9);
            assert_abs_diff_eq!(scaled.lambda1 / 3.5, cert.lambda1, epsilon = 1e-9);
        }
    }
}
