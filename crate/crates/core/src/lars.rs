//! Continuous LARS: the homotopy path `λ ↦ μ^{(λ)}` of the Beurling lasso
//! started from `λ₁`, with knots where a new location joins the support.
//!
//! Between knots the weights are pinned by the dual constraint on the active
//! set and the locations follow the stationarity of `|Z^{(λ)}|`; the next
//! knot is the largest λ at which an off-support local maximum of the
//! residual modulus reaches λ.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knots::{first_knot, second_knot, KnotOptions};
use crate::numerics::maximize_1d;
use crate::sr_model::{wrap_angle, wrap_signed, ModelContext, Observation};

/// Locations closer than this to an active point are the same point.
pub const MERGE_RADIUS: f64 = 1e-3;

const GRAM_CONDITION: f64 = 1e-12;
const FD_STEP: f64 = 1e-7;
const NEWTON_MAX_ITER: usize = 40;
const MIN_STEP_FRACTION: f64 = 1e-6;
const BISECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LarsOptions {
    pub k_max: usize,
    pub lambda_min: f64,
    /// Continuation step as a fraction of the current λ.
    pub lambda_step_fraction: f64,
    pub newton_tol: f64,
    /// Event scan resolution, in multiples of N.
    pub event_grid_factor: usize,
}

impl Default for LarsOptions {
    fn default() -> Self {
        LarsOptions {
            k_max: 4,
            lambda_min: 1e-3,
            lambda_step_fraction: 1e-2,
            newton_tol: 1e-10,
            event_grid_factor: 64,
        }
    }
}

impl LarsOptions {
    fn validate(&self) -> Result<()> {
        if self.k_max < 2 {
            return Err(Error::InvalidArgument(format!(
                "k_max must be at least 2, got {}",
                self.k_max
            )));
        }
        let positive = [self.lambda_min, self.lambda_step_fraction, self.newton_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || self.event_grid_factor == 0 {
            return Err(Error::InvalidArgument("LARS options must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStatus {
    /// The residual is exactly explained; no further knot exists.
    Completed,
    PathStopSingularGram,
    PathStopSingularJacobian,
    ReachedKMax,
    ReachedLambdaMin,
}

/// State of the path at a knot: the support `A_k` (the newly entered point
/// last, with zero weight) and the weights defining `μ_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LarsKnot {
    pub lambda: f64,
    pub active: Vec<f64>,
    #[serde(serialize_with = "serialize_complex")]
    pub weights: Vec<Complex<f64>>,
}

fn serialize_complex<S: serde::Serializer>(w: &[Complex<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(w.len()))?;
    for c in w {
        seq.serialize_element(&[c.re, c.im])?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LarsPath {
    pub knots: Vec<LarsKnot>,
    pub status: PathStatus,
    /// Kernel scale σ in `K(s, t) = 2σ²Γ(t - s)`.
    pub sigma: f64,
    /// Next knot value when it fell below `lambda_min`.
    pub pending_knot: Option<f64>,
}

impl LarsPath {
    /// CSV rows `k,lambda,t,re,im`, one per active location.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "k,lambda,t,re,im")?;
        for (k, knot) in self.knots.iter().enumerate() {
            for (t, a) in knot.active.iter().zip(&knot.weights) {
                writeln!(
                    out,
                    "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    k + 1,
                    knot.lambda,
                    t,
                    a.re,
                    a.im
                )?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// `Z(t) - Σ a_i 2σ²Γ(t - x_i)` and its derivative.
struct Residual<'a> {
    obs: &'a Observation<f64>,
    ctx: ModelContext<f64>,
    scale: f64,
    points: &'a [f64],
    weights: &'a [Complex<f64>],
}

impl Residual<'_> {
    fn value_and_slope(&self, t: f64) -> (Complex<f64>, Complex<f64>) {
        let jet = self.obs.z_jet(t);
        let (mut r, mut dr) = (jet.z, jet.dz);
        for (x, a) in self.points.iter().zip(self.weights) {
            let [g, g1, _] = self.ctx.kernel(t - x);
            r -= a * (self.scale * g);
            dr -= a * (self.scale * g1);
        }
        (r, dr)
    }

    fn modulus(&self, t: f64) -> f64 {
        self.value_and_slope(t).0.norm()
    }

    /// Newton on `Re(conj(R)R')`, the half-derivative of `|R|²`, to pin a
    /// peak location beyond the accuracy of a value-based search.
    fn polish_peak(&self, mut t: f64) -> f64 {
        for _ in 0..8 {
            let jet = self.obs.z_jet(t);
            let (mut r, mut dr, mut d2r) = (jet.z, jet.dz, jet.d2z);
            for (x, a) in self.points.iter().zip(self.weights) {
                let [g, g1, g2] = self.ctx.kernel(t - x);
                r -= a * (self.scale * g);
                dr -= a * (self.scale * g1);
                d2r -= a * (self.scale * g2);
            }
            let slope = (r.conj() * dr).re;
            let curvature = dr.norm_sqr() + (r.conj() * d2r).re;
            if !(curvature < 0.0) {
                break;
            }
            let step = slope / curvature;
            if step.abs() > 1e-4 {
                break;
            }
            t = wrap_angle(t - step);
            if step.abs() < 1e-15 {
                break;
            }
        }
        t
    }
}

/// Residual `Z_k(t)` of knot `k` (1-based).
pub fn lars_residual(obs: &Observation<f64>, path: &LarsPath, k: usize, t: f64) -> Result<Complex<f64>> {
    let knot = k
        .checked_sub(1)
        .and_then(|i| path.knots.get(i))
        .ok_or(Error::IndexOutOfRange {
            index: k,
            len: path.knots.len(),
        })?;
    let res = Residual {
        obs,
        ctx: obs.context(),
        scale: 2.0 * path.sigma * path.sigma,
        points: &knot.active,
        weights: &knot.weights,
    };
    Ok(res.value_and_slope(t).0)
}

/// One segment of the path: active locations at its starting knot and the
/// residual values there, which fix the phases along the segment.
struct Segment<'a> {
    obs: &'a Observation<f64>,
    ctx: ModelContext<f64>,
    scale: f64,
    anchors: Vec<Complex<f64>>,
    lambda_start: f64,
}

enum SolveFailure {
    Gram,
    Newton,
}

impl Segment<'_> {
    fn weights(&self, x: &[f64], lambda: f64) -> std::result::Result<Vec<Complex<f64>>, SolveFailure> {
        let p = x.len();
        let gram = DMatrix::from_fn(p, p, |i, j| self.scale * self.ctx.kernel(x[i] - x[j])[0]);
        let eig = SymmetricEigen::new(gram);
        let largest = eig.eigenvalues.amax();
        if eig.eigenvalues.iter().any(|&l| !(l > GRAM_CONDITION * largest)) {
            return Err(SolveFailure::Gram);
        }
        let shrink = lambda / self.lambda_start;
        let rhs: Vec<Complex<f64>> = x
            .iter()
            .zip(&self.anchors)
            .map(|(&xi, &c)| self.obs.z(xi) - c * shrink)
            .collect();
        let solve = |b: DVector<f64>| {
            let coords = eig.eigenvectors.transpose() * b;
            let scaled = coords.component_div(&eig.eigenvalues);
            &eig.eigenvectors * scaled
        };
        let re = solve(DVector::from_iterator(p, rhs.iter().map(|c| c.re)));
        let im = solve(DVector::from_iterator(p, rhs.iter().map(|c| c.im)));
        Ok(re.iter().zip(im.iter()).map(|(&a, &b)| Complex::new(a, b)).collect())
    }

    /// `Re(conj(c_j)/|c_j| · R'(x_j))`, zero when every active point is a
    /// critical point of the residual modulus.
    fn stationarity(&self, x: &[f64], lambda: f64) -> std::result::Result<Vec<f64>, SolveFailure> {
        let a = self.weights(x, lambda)?;
        let res = Residual {
            obs: self.obs,
            ctx: self.ctx,
            scale: self.scale,
            points: x,
            weights: &a,
        };
        Ok(x.iter()
            .zip(&self.anchors)
            .map(|(&xj, c)| (c.conj() / c.norm() * res.value_and_slope(xj).1).re)
            .collect())
    }

    fn newton(&self, start: &[f64], lambda: f64, tol: f64) -> std::result::Result<Vec<f64>, SolveFailure> {
        let p = start.len();
        let mut x = start.to_vec();
        for _ in 0..NEWTON_MAX_ITER {
            let f = self.stationarity(&x, lambda)?;
            let fnorm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if fnorm <= tol {
                return Ok(x);
            }
            let mut jac = DMatrix::zeros(p, p);
            for j in 0..p {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += FD_STEP;
                xm[j] -= FD_STEP;
                let fp = self.stationarity(&xp, lambda)?;
                let fm = self.stationarity(&xm, lambda)?;
                for i in 0..p {
                    jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
                }
            }
            let step = jac.lu().solve(&DVector::from_vec(f)).ok_or(SolveFailure::Newton)?;
            if step.iter().any(|s| !s.is_finite() || s.abs() > 0.05) {
                return Err(SolveFailure::Newton);
            }
            for (xi, s) in x.iter_mut().zip(step.iter()) {
                *xi -= s;
            }
        }
        Err(SolveFailure::Newton)
    }

    /// `max |Z^{(λ)}(t)| - λ` over refined off-support local maxima.
    fn event(&self, x: &[f64], lambda: f64, grid: usize) -> std::result::Result<(f64, f64), SolveFailure> {
        let a = self.weights(x, lambda)?;
        let res = Residual {
            obs: self.obs,
            ctx: self.ctx,
            scale: self.scale,
            points: x,
            weights: &a,
        };
        Ok(off_support_peak(&res, x, grid)
            .map(|(t, v)| (v - lambda, t))
            .unwrap_or((f64::NEG_INFINITY, f64::NAN)))
    }
}

fn near_active(t: f64, active: &[f64]) -> bool {
    active.iter().any(|&x| wrap_signed(t - x).abs() < MERGE_RADIUS)
}

/// Largest refined local maximum of the residual modulus away from `active`.
/// Besides the grid's local maxima, the brackets just outside each merge
/// disc are searched: a flat active peak can hide a neighbour the grid does
/// not resolve.
fn off_support_peak(res: &Residual<'_>, active: &[f64], grid: usize) -> Option<(f64, f64)> {
    let h = TAU / grid as f64;
    let values: Vec<f64> = (0..grid).map(|i| res.modulus(i as f64 * h)).collect();
    let grid_brackets = (0..grid)
        .filter(|&i| values[i] >= values[(i + grid - 1) % grid] && values[i] >= values[(i + 1) % grid])
        .map(|i| (i as f64 * h - h, i as f64 * h + h));
    let disc_brackets = active
        .iter()
        .flat_map(|&x| [(x + MERGE_RADIUS, x + 3.0 * h), (x - 3.0 * h, x - MERGE_RADIUS)]);
    grid_brackets
        .chain(disc_brackets)
        .filter_map(|(lo, hi)| {
            let m = maximize_1d(|t| res.modulus(t), (lo, hi), 1e-12).ok()?;
            let t = res.polish_peak(wrap_angle(m.argmax));
            let peak = if near_active(t, active) {
                (wrap_angle(m.argmax), m.max)
            } else {
                (t, res.modulus(t))
            };
            (!near_active(peak.0, active)).then_some(peak)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Runs the path from `λ₁` down to `opts.lambda_min` or `opts.k_max` knots.
pub fn lars_run(obs: &Observation<f64>, sigma: f64, opts: &LarsOptions) -> Result<LarsPath> {
    opts.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let ctx = obs.context();
    let scale = 2.0 * sigma * sigma;
    let knot_opts = KnotOptions::default();
    let first = first_knot(obs, &knot_opts)?;
    let t1 = first.z_hat.t;
    let mut path = LarsPath {
        knots: vec![LarsKnot {
            lambda: first.lambda1,
            active: vec![t1],
            weights: vec![Complex::new(0.0, 0.0)],
        }],
        status: PathStatus::ReachedKMax,
        sigma,
        pending_knot: None,
    };

    let second = second_knot(obs, &first, &knot_opts)?;
    if second.lambda2 <= 1e-12 * first.lambda1 {
        path.status = PathStatus::Completed;
        path.pending_knot = Some(second.lambda2.max(0.0));
        return Ok(path);
    }
    if second.lambda2 < opts.lambda_min {
        path.status = PathStatus::ReachedLambdaMin;
        path.pending_knot = Some(second.lambda2);
        return Ok(path);
    }
    if second.at_radial_limit || near_active(second.y_hat.t, &[t1]) {
        path.status = PathStatus::PathStopSingularGram;
        path.pending_knot = Some(second.lambda2);
        return Ok(path);
    }
    let mu2 = obs.z(t1) * ((1.0 - second.lambda2 / first.lambda1) / scale);
    let entering = Residual {
        obs,
        ctx,
        scale,
        points: &[t1],
        weights: &[mu2],
    }
    .polish_peak(second.y_hat.t);
    path.knots.push(LarsKnot {
        lambda: second.lambda2,
        active: vec![t1, entering],
        weights: vec![mu2, Complex::new(0.0, 0.0)],
    });

    let grid = (opts.event_grid_factor * ctx.n).max(16);
    while path.knots.len() < opts.k_max {
        let knot = path.knots.last().expect("path has at least two knots");
        let active = knot.active.clone();
        let res = Residual {
            obs,
            ctx,
            scale,
            points: &knot.active,
            weights: &knot.weights,
        };
        let anchors: Vec<Complex<f64>> = active.iter().map(|&t| res.value_and_slope(t).0).collect();
        let segment = Segment {
            obs,
            ctx,
            scale,
            anchors,
            lambda_start: knot.lambda,
        };
        match continue_segment(&segment, &active, opts, grid) {
            SegmentEnd::Knot { lambda, x, entering } => {
                let weights = segment
                    .weights(&x, lambda)
                    .map_err(|_| Error::NearSingular { one_minus_rho: 0.0 })?;
                let mut all = x;
                all.push(entering);
                let mut w = weights;
                w.push(Complex::new(0.0, 0.0));
                path.knots.push(LarsKnot {
                    lambda,
                    active: all,
                    weights: w,
                });
            }
            SegmentEnd::Stop(status, pending) => {
                path.status = status;
                path.pending_knot = pending;
                return Ok(path);
            }
        }
    }
    path.status = PathStatus::ReachedKMax;
    Ok(path)
}

enum SegmentEnd {
    Knot { lambda: f64, x: Vec<f64>, entering: f64 },
    Stop(PathStatus, Option<f64>),
}

fn failure_status(f: SolveFailure) -> PathStatus {
    match f {
        SolveFailure::Gram => PathStatus::PathStopSingularGram,
        SolveFailure::Newton => PathStatus::PathStopSingularJacobian,
    }
}

fn continue_segment(seg: &Segment<'_>, start: &[f64], opts: &LarsOptions, grid: usize) -> SegmentEnd {
    let tol = opts.newton_tol * seg.lambda_start;
    let mut lambda = seg.lambda_start;
    let mut x = start.to_vec();
    let mut step = opts.lambda_step_fraction * lambda;
    loop {
        let target = (lambda - step).max(opts.lambda_min);
        let next = match seg.newton(&x, target, tol) {
            Ok(v) => v,
            Err(SolveFailure::Gram) => return SegmentEnd::Stop(PathStatus::PathStopSingularGram, None),
            Err(SolveFailure::Newton) => {
                step *= 0.5;
                if step < MIN_STEP_FRACTION * lambda {
                    return SegmentEnd::Stop(PathStatus::PathStopSingularJacobian, None);
                }
                continue;
            }
        };
        let (m, _) = match seg.event(&next, target, grid) {
            Ok(e) => e,
            Err(f) => return SegmentEnd::Stop(failure_status(f), None),
        };
        if m >= 0.0 {
            return bisect_knot(seg, (lambda, x), (target, next), tol, grid);
        }
        if target <= opts.lambda_min {
            return SegmentEnd::Stop(PathStatus::ReachedLambdaMin, None);
        }
        lambda = target;
        x = next;
        step = opts.lambda_step_fraction * lambda;
    }
}

/// Bisection between `hi` (event negative) and `lo` (event non-negative).
fn bisect_knot(seg: &Segment<'_>, hi: (f64, Vec<f64>), lo: (f64, Vec<f64>), tol: f64, grid: usize) -> SegmentEnd {
    let (mut l_hi, mut x_hi) = hi;
    let (mut l_lo, _) = lo;
    while l_hi - l_lo > BISECTION_TOL * l_hi {
        let mid = 0.5 * (l_hi + l_lo);
        let x_mid = match seg.newton(&x_hi, mid, tol) {
            Ok(v) => v,
            Err(f) => return SegmentEnd::Stop(failure_status(f), Some(mid)),
        };
        match seg.event(&x_mid, mid, grid) {
            Ok((m, _)) if m >= 0.0 => l_lo = mid,
            Ok(_) => {
                l_hi = mid;
                x_hi = x_mid;
            }
            Err(f) => return SegmentEnd::Stop(failure_status(f), Some(mid)),
        }
    }
    match seg.event(&x_hi, l_hi, grid) {
        Ok((_, entering)) if entering.is_finite() => SegmentEnd::Knot {
            lambda: l_hi,
            x: x_hi,
            entering,
        },
        Ok(_) => SegmentEnd::Stop(PathStatus::PathStopSingularJacobian, Some(l_hi)),
        Err(f) => SegmentEnd::Stop(failure_status(f), Some(l_hi)),
    }
}
