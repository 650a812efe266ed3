//! Exact p-values for the null hypothesis "no spike": the grid-less Rice
//! tests, the spacing test on continuous or grid knots, and the randomized
//! grid-limit tests.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::knots::{certify, KnotCertificate, KnotOptions};
use crate::numerics::{integrate_upper, normal_pdf, normal_sf, student_pdf, student_sf, QuadratureSpec, RngStream};
use crate::sr_model::{ModelContext, Observation, Sym2, TorusPoint};
use crate::variance::{sigma_hat_cond, sigma_hat_grid, VarianceEstimate};

/// Slack allowed outside `[0, 1]` before a statistic is reported as invalid.
pub const RANGE_SLACK: f64 = 1e-9;

/// Default half-width of the lattice window in the randomized second knot.
pub const DEFAULT_K_WINDOW: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestName {
    Rice,
    TRice,
    Spacing,
    Grid,
    TGrid,
    /// Spacing test on the `p × p` grid.
    GridSpacing(usize),
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestName::Rice => f.write_str("rice"),
            TestName::TRice => f.write_str("t-rice"),
            TestName::Spacing => f.write_str("st"),
            TestName::Grid => f.write_str("grid"),
            TestName::TGrid => f.write_str("t-grid"),
            TestName::GridSpacing(p) => write!(f, "grid-st-{p}"),
        }
    }
}

impl std::str::FromStr for TestName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rice" => Ok(TestName::Rice),
            "t-rice" => Ok(TestName::TRice),
            "st" => Ok(TestName::Spacing),
            "grid" => Ok(TestName::Grid),
            "t-grid" => Ok(TestName::TGrid),
            other => other
                .strip_prefix("grid-st-")
                .and_then(|p| p.parse().ok())
                .filter(|&p: &usize| p >= 2)
                .map(TestName::GridSpacing)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown statistic {other:?}"))),
        }
    }
}

impl Serialize for TestName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Diagnostics attached to a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReportAux {
    pub lambda1: f64,
    /// Second knot, or its randomized version for the grid tests.
    pub lambda2: f64,
    /// Known σ or the estimate σ̂.
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
    /// Closed-form evaluation of a statistic computed by quadrature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
    /// Quadrature evaluation of a statistic computed in closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestReport {
    pub name: TestName,
    pub value: f64,
    #[serde(flatten)]
    pub aux: ReportAux,
}

impl TestReport {
    /// Validates that `value` is a p-value; out-of-range values are errors,
    /// never clamped.
    pub fn new(name: TestName, value: f64, aux: ReportAux) -> Result<Self> {
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
            return Err(Error::OutOfRange {
                name: name_str(name),
                value,
            });
        }
        Ok(TestReport { name, value, aux })
    }
}

fn name_str(name: TestName) -> &'static str {
    match name {
        TestName::Rice => "rice",
        TestName::TRice => "t-rice",
        TestName::Spacing => "st",
        TestName::Grid => "grid",
        TestName::TGrid => "t-grid",
        TestName::GridSpacing(_) => "grid-st",
    }
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::NonPositiveDenominator(den));
    }
    Ok(num / den)
}

/// `det(-Λ̃ u + r)`.
fn det_shifted(ctx: &ModelContext<f64>, r: &Sym2<f64>, u: f64) -> f64 {
    (r.tt - ctx.alpha1 * u) * (r.theta_theta - u) - r.t_theta * r.t_theta
}

/// `∫_ℓ^∞ det(-Λ̃u + r) φ(u/σ) du` by quadrature.
pub fn g_bar(ell: f64, r: &Sym2<f64>, sigma: f64, ctx: &ModelContext<f64>, spec: &QuadratureSpec<f64>) -> Result<f64> {
    integrate_upper(|u| det_shifted(ctx, r, u) * normal_pdf(u / sigma), ell, sigma, spec)
}

/// Closed form of [`g_bar`] for `r = [[-α₂, α₃], [α₃, 0]]`:
/// `σ[σ(α₁ℓ + α₂)φ(ℓ/σ) + (α₁σ² - α₃²)Φ̄(ℓ/σ)]`.
pub fn g_bar_closed(ell: f64, alpha1: f64, alpha2: f64, alpha3: f64, sigma: f64) -> f64 {
    let l = ell / sigma;
    sigma
        * (sigma * (alpha1 * ell + alpha2) * normal_pdf(l) + (alpha1 * sigma * sigma - alpha3 * alpha3) * normal_sf(l))
}

fn student_scale(m: usize) -> f64 {
    ((m as f64 - 1.0) / (m as f64 - 3.0)).sqrt()
}

/// `∫_ℓ^∞ det(-Λ̃t + r) f_{m-1}(t √((m-1)/(m-3))) dt` by quadrature.
pub fn h_bar(ell: f64, r: &Sym2<f64>, m: usize, ctx: &ModelContext<f64>, spec: &QuadratureSpec<f64>) -> Result<f64> {
    if m <= 3 {
        return Err(Error::InvalidArgument(format!("h_bar needs m > 3, got {m}")));
    }
    let c = student_scale(m);
    let dof = m as f64 - 1.0;
    integrate_upper(
        |t| det_shifted(ctx, r, t) * crate::numerics::student_pdf_unchecked(c * t, dof),
        ell,
        1.0,
        spec,
    )
}

/// Closed form of [`h_bar`] for `r = [[-a, b], [b, 0]]` (already divided by σ̂):
/// `(1/c)[α₁(T f_{m-3}(T) + F̄_{m-3}(T)) + a f_{m-3}(T) - b² F̄_{m-1}(cT)]`.
pub fn h_bar_closed(ell: f64, alpha1: f64, a: f64, b: f64, m: usize) -> Result<f64> {
    if m <= 3 {
        return Err(Error::InvalidArgument(format!("h_bar needs m > 3, got {m}")));
    }
    let c = student_scale(m);
    let low = m as f64 - 3.0;
    let pdf = student_pdf(ell, low)?;
    let sf = student_sf(ell, low)?;
    let tail = student_sf(c * ell, m as f64 - 1.0)?;
    Ok((alpha1 * (ell * pdf + sf) + a * pdf - b * b * tail) / c)
}

/// Known-variance Rice test `Ḡ_R(λ₁) / Ḡ_R(λ₂)`.
pub fn rice_known(cert: &KnotCertificate, sigma: f64, ctx: &ModelContext<f64>) -> Result<TestReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let num = g_bar_closed(cert.lambda1, ctx.alpha1, cert.alpha2, cert.alpha3, sigma);
    let den = g_bar_closed(cert.lambda2, ctx.alpha1, cert.alpha2, cert.alpha3, sigma);
    let value = ratio(num, den)?;
    let spec = QuadratureSpec::default();
    let quad = ratio(
        g_bar(cert.lambda1, &cert.remainder, sigma, ctx, &spec)?,
        g_bar(cert.lambda2, &cert.remainder, sigma, ctx, &spec)?,
    )?;
    TestReport::new(
        TestName::Rice,
        value,
        ReportAux {
            lambda1: cert.lambda1,
            lambda2: cert.lambda2,
            sigma,
            quadrature: Some(quad),
            ..ReportAux::default()
        },
    )
}

/// Unknown-variance Rice test `H̄_r(λ₁/σ̂) / H̄_r(λ₂/σ̂)` with `r = R/σ̂` and
/// σ̂ from the gradient-aware estimator.
pub fn rice_unknown(
    cert: &KnotCertificate,
    estimate: &VarianceEstimate,
    ctx: &ModelContext<f64>,
) -> Result<TestReport> {
    let m = ctx.m;
    if estimate.dof != m - 3 {
        return Err(Error::InvalidArgument(format!(
            "the studentized Rice test needs {} degrees of freedom, got {}",
            m - 3,
            estimate.dof
        )));
    }
    let s = estimate.sigma();
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("estimated sigma is zero".into()));
    }
    let (t1, t2) = (cert.lambda1 / s, cert.lambda2 / s);
    let r = cert.remainder.scale(1.0 / s);
    let spec = QuadratureSpec::default();
    let value = ratio(h_bar(t1, &r, m, ctx, &spec)?, h_bar(t2, &r, m, ctx, &spec)?)?;
    let (a, b) = (cert.alpha2 / s, cert.alpha3 / s);
    let closed = ratio(
        h_bar_closed(t1, ctx.alpha1, a, b, m)?,
        h_bar_closed(t2, ctx.alpha1, a, b, m)?,
    )?;
    TestReport::new(
        TestName::TRice,
        value,
        ReportAux {
            lambda1: cert.lambda1,
            lambda2: cert.lambda2,
            sigma: s,
            dof: Some(estimate.dof),
            closed_form: Some(closed),
            ..ReportAux::default()
        },
    )
}

/// Spacing statistic `Φ̄(λ₁/σ) / Φ̄(λ₂/σ)`.
pub fn spacing_statistic(lambda1: f64, lambda2: f64, sigma: f64) -> Result<TestReport> {
    spacing_named(TestName::Spacing, lambda1, lambda2, sigma)
}

fn spacing_named(name: TestName, lambda1: f64, lambda2: f64, sigma: f64) -> Result<TestReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let value = ratio(normal_sf(lambda1 / sigma), normal_sf(lambda2 / sigma))?;
    TestReport::new(
        name,
        value,
        ReportAux {
            lambda1,
            lambda2,
            sigma,
            ..ReportAux::default()
        },
    )
}

/// First two knots of the LARS path restricted to the `p × p` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridKnots {
    pub lambda1: f64,
    pub z_hat: TorusPoint<f64>,
    pub lambda2: f64,
}

pub fn grid_knots(obs: &Observation<f64>, p: usize) -> Result<GridKnots> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("grid size must be at least 2, got {p}")));
    }
    let ctx = obs.context();
    let h = TAU / p as f64;
    let jets: Vec<_> = (0..p).map(|i| obs.z_jet(i as f64 * h)).collect();
    let values: Vec<f64> = (0..p * p).map(|idx| jets[idx / p].x((idx % p) as f64 * h)).collect();
    let mut best = 0;
    for (idx, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = idx;
        }
    }
    let (bi, bj) = (best / p, best % p);
    let lambda1 = values[best];
    let mut lambda2 = f64::NEG_INFINITY;
    for (idx, &v) in values.iter().enumerate() {
        if idx == best {
            continue;
        }
        let (i, j) = (idx / p, idx % p);
        let rho = ctx.correlation([(i as f64 - bi as f64) * h, (j as f64 - bj as f64) * h]);
        let one_minus = 1.0 - rho;
        if !(one_minus > 1e-14) {
            return Err(Error::NearSingular {
                one_minus_rho: one_minus,
            });
        }
        lambda2 = lambda2.max((v - rho * lambda1) / one_minus);
    }
    Ok(GridKnots {
        lambda1,
        z_hat: TorusPoint::new(bi as f64 * h, bj as f64 * h),
        lambda2,
    })
}

/// Spacing test on the `p × p` grid; exact for any fixed grid.
pub fn grid_spacing_test(obs: &Observation<f64>, p: usize, sigma: f64) -> Result<TestReport> {
    let k = grid_knots(obs, p)?;
    spacing_named(TestName::GridSpacing(p), k.lambda1, k.lambda2, sigma)
}

/// Randomization used by the grid-limit tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomizedAux {
    pub u: [f64; 2],
    pub lambda2_bar: f64,
    pub k_window: i64,
}

/// Lagrange–Gauss reduced basis of `Z²` for the metric `q`.
fn reduced_basis(q: &Sym2<f64>) -> [[f64; 2]; 2] {
    let mut b1 = [1.0, 0.0];
    let mut b2 = [0.0, 1.0];
    if q.quad(b1) > q.quad(b2) {
        std::mem::swap(&mut b1, &mut b2);
    }
    for _ in 0..64 {
        let mu = (q.bilinear(b1, b2) / q.quad(b1)).round();
        let c = [b2[0] - mu * b1[0], b2[1] - mu * b1[1]];
        if q.quad(c) >= q.quad(b1) {
            b2 = c;
            break;
        }
        b2 = b1;
        b1 = c;
    }
    [b1, b2]
}

fn lattice_candidates(q: &Sym2<f64>, w: [f64; 2]) -> impl Iterator<Item = [f64; 2]> {
    let [b1, b2] = reduced_basis(q);
    let det = b1[0] * b2[1] - b1[1] * b2[0];
    let c1 = ((w[0] * b2[1] - w[1] * b2[0]) / det).round();
    let c2 = ((b1[0] * w[1] - b1[1] * w[0]) / det).round();
    (-2..=2).flat_map(move |i| {
        (-2..=2).map(move |j| {
            let (a, b) = (c1 + i as f64, c2 + j as f64);
            [a * b1[0] + b * b2[0], a * b1[1] + b * b2[1]]
        })
    })
}

/// Whether `u` lies in the Voronoi cell of the origin of `Z²` under `‖v‖² = vᵀqv`.
pub fn in_voronoi_cell(u: [f64; 2], q: &Sym2<f64>) -> bool {
    let nu = q.quad(u);
    lattice_candidates(q, [0.0, 0.0])
        .filter(|k| k[0] != 0.0 || k[1] != 0.0)
        .all(|k| nu <= q.quad([u[0] - k[0], u[1] - k[1]]) + 1e-12 * nu.max(1e-300))
}

/// Uniform draw on the Voronoi cell `V₀` of `Z²` under the metric `-hess`.
///
/// A uniform point of the fundamental square `[-½, ½)²` is moved to `V₀` by
/// subtracting its closest lattice vector; this map preserves Lebesgue
/// measure, so the image is uniform on `V₀`.
pub fn voronoi_sample(hess: &Sym2<f64>, stream: RngStream) -> Result<[f64; 2]> {
    let q = hess.scale(-1.0);
    if !(q.tt > 0.0 && q.det() > 0.0) {
        return Err(Error::InvalidArgument(
            "voronoi_sample needs a negative definite Hessian".into(),
        ));
    }
    let mut rng = stream.rng();
    let w = [rng.uniform() - 0.5, rng.uniform() - 0.5];
    let nearest = lattice_candidates(&q, w)
        .map(|k| (q.quad([w[0] - k[0], w[1] - k[1]]), k))
        .fold((f64::INFINITY, [0.0, 0.0]), |acc, c| if c.0 < acc.0 { c } else { acc })
        .1;
    Ok([w[0] - nearest[0], w[1] - nearest[1]])
}

/// Randomized second knot
/// `max(λ₂, λ₁ + max_{k ∈ [-K, K]² \ 0} kᵀ hess (k - 2u) / kᵀΛ̃k)`.
pub fn lambda2_bar(
    lambda1: f64,
    lambda2: f64,
    hess: &Sym2<f64>,
    u: [f64; 2],
    ctx: &ModelContext<f64>,
    k_window: i64,
) -> f64 {
    let lt = ctx.lambda_tilde();
    let mut sup = f64::NEG_INFINITY;
    for i in -k_window..=k_window {
        for j in -k_window..=k_window {
            if i == 0 && j == 0 {
                continue;
            }
            let k = [i as f64, j as f64];
            let v = hess.bilinear(k, [k[0] - 2.0 * u[0], k[1] - 2.0 * u[1]]) / lt.quad(k);
            sup = sup.max(v);
        }
    }
    lambda2.max(lambda1 + sup)
}

/// Draws `U` and evaluates λ̄₂ for a certificate.
pub fn randomize(
    cert: &KnotCertificate,
    ctx: &ModelContext<f64>,
    stream: RngStream,
    k_window: i64,
) -> Result<RandomizedAux> {
    let hess = cert.hessian();
    let u = voronoi_sample(&hess, stream)?;
    Ok(RandomizedAux {
        u,
        lambda2_bar: lambda2_bar(cert.lambda1, cert.lambda2, &hess, u, ctx, k_window),
        k_window,
    })
}

/// Randomized grid-limit test `Φ̄(λ₁/σ) / Φ̄(λ̄₂/σ)`.
pub fn grid_test_known(lambda1: f64, lambda2_bar: f64, sigma: f64) -> Result<TestReport> {
    spacing_named(TestName::Grid, lambda1, lambda2_bar, sigma)
}

/// Studentized grid-limit test `F̄_{m-1}(λ₁/σ̂) / F̄_{m-1}(λ̄₂/σ̂)` with σ̂
/// from the value-regressed estimator.
pub fn grid_test_unknown(
    lambda1: f64,
    lambda2_bar: f64,
    estimate: &VarianceEstimate,
    ctx: &ModelContext<f64>,
) -> Result<TestReport> {
    let dof = ctx.m - 1;
    if estimate.dof != dof {
        return Err(Error::InvalidArgument(format!(
            "the studentized grid test needs {dof} degrees of freedom, got {}",
            estimate.dof
        )));
    }
    let s = estimate.sigma();
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("estimated sigma is zero".into()));
    }
    let nu = dof as f64;
    let value = ratio(student_sf(lambda1 / s, nu)?, student_sf(lambda2_bar / s, nu)?)?;
    TestReport::new(
        TestName::TGrid,
        value,
        ReportAux {
            lambda1,
            lambda2: lambda2_bar,
            sigma: s,
            dof: Some(dof),
            ..ReportAux::default()
        },
    )
}

/// Computes any set of statistics on one observation, sharing the knot
/// certificate and the lattice randomization between them.
pub struct TestRunner<'a> {
    obs: &'a Observation<f64>,
    sigma: Option<f64>,
    randomization: RngStream,
    cert: Option<KnotCertificate>,
    randomized: Option<RandomizedAux>,
}

impl<'a> TestRunner<'a> {
    /// `sigma` is the known noise level; without it only the studentized
    /// statistics are available.
    pub fn new(obs: &'a Observation<f64>, sigma: Option<f64>, randomization: RngStream) -> Self {
        TestRunner {
            obs,
            sigma,
            randomization,
            cert: None,
            randomized: None,
        }
    }

    pub fn certificate(&mut self) -> Result<&KnotCertificate> {
        if self.cert.is_none() {
            self.cert = Some(certify(self.obs, &KnotOptions::default())?);
        }
        Ok(self.cert.as_ref().expect("certificate just computed"))
    }

    fn randomized(&mut self) -> Result<RandomizedAux> {
        if let Some(r) = self.randomized {
            return Ok(r);
        }
        let ctx = self.obs.context();
        let stream = self.randomization;
        let r = randomize(self.certificate()?, &ctx, stream, DEFAULT_K_WINDOW)?;
        self.randomized = Some(r);
        Ok(r)
    }

    fn known_sigma(&self, name: TestName) -> Result<f64> {
        self.sigma
            .ok_or_else(|| Error::InvalidArgument(format!("{name} needs a known noise level")))
    }

    pub fn run(&mut self, name: TestName) -> Result<TestReport> {
        let ctx = self.obs.context();
        match name {
            TestName::Rice => {
                let sigma = self.known_sigma(name)?;
                rice_known(self.certificate()?, sigma, &ctx)
            }
            TestName::TRice => {
                let cert = *self.certificate()?;
                let estimate = sigma_hat_cond(self.obs, cert.z_hat)?;
                rice_unknown(&cert, &estimate, &ctx)
            }
            TestName::Spacing => {
                let sigma = self.known_sigma(name)?;
                let cert = self.certificate()?;
                spacing_statistic(cert.lambda1, cert.lambda2, sigma)
            }
            TestName::Grid => {
                let sigma = self.known_sigma(name)?;
                let r = self.randomized()?;
                grid_test_known(self.certificate()?.lambda1, r.lambda2_bar, sigma)
            }
            TestName::TGrid => {
                let r = self.randomized()?;
                let cert = *self.certificate()?;
                let estimate = sigma_hat_grid(self.obs, cert.z_hat)?;
                grid_test_unknown(cert.lambda1, r.lambda2_bar, &estimate, &ctx)
            }
            TestName::GridSpacing(p) => {
                let sigma = self.known_sigma(name)?;
                grid_spacing_test(self.obs, p, sigma)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::{certify, KnotOptions};
    use crate::sr_model::{synthesize, AtomicMeasure};
    use crate::variance::{sigma_hat_cond, sigma_hat_grid};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ctx(fc: usize) -> ModelContext<f64> {
        ModelContext::new(fc).unwrap()
    }

    fn null_cert(fc: usize, seed: u64) -> (Observation<f64>, KnotCertificate) {
        let obs = synthesize(&AtomicMeasure::empty(), fc, 1.0, RngStream::new(seed, 0)).unwrap();
        let cert = certify(&obs, &KnotOptions::default()).unwrap();
        (obs, cert)
    }

    #[test]
    fn names_round_trip() {
        for name in [
            TestName::Rice,
            TestName::TRice,
            TestName::Spacing,
            TestName::Grid,
            TestName::TGrid,
            TestName::GridSpacing(32),
        ] {
            assert_eq!(name.to_string().parse::<TestName>().unwrap(), name);
        }
        assert!("grid-st-1".parse::<TestName>().is_err());
        assert!("foo".parse::<TestName>().is_err());
    }

    #[test]
    fn report_range_is_enforced_not_clamped() {
        assert!(TestReport::new(TestName::Rice, 1.0 + 1e-10, ReportAux::default()).is_ok());
        assert!(matches!(
            TestReport::new(TestName::Rice, 1.01, ReportAux::default()),
            Err(Error::OutOfRange { .. })
        ));
        assert!(TestReport::new(TestName::Rice, f64::NAN, ReportAux::default()).is_err());
        assert!(TestReport::new(TestName::Rice, -1e-3, ReportAux::default()).is_err());
    }

    #[test]
    fn g_bar_reference_values() {
        let c = ctx(3);
        let spec = QuadratureSpec::default();
        let zero = Sym2::zero();
        assert_abs_diff_eq!(
            g_bar(0.0, &zero, 1.0, &c, &spec).unwrap(),
            c.alpha1 / 2.0,
            epsilon = 1e-12
        );
        assert!(g_bar(40.0, &zero, 1.0, &c, &spec).unwrap().abs() < 1e-15);
    }

    #[test]
    fn g_bar_matches_closed_form() {
        let c = ctx(5);
        let spec = QuadratureSpec::default();
        let mut rng = RngStream::new(2024, 0).rng();
        for _ in 0..100 {
            let ell = rng.uniform_in(0.0, 5.0);
            let a2 = rng.uniform_in(-5.0, 5.0);
            let a3 = rng.uniform_in(-3.0, 3.0);
            let sigma = rng.uniform_in(0.3, 3.0);
            let r = Sym2::new(-a2, a3, 0.0);
            let q = g_bar(ell, &r, sigma, &c, &spec).unwrap();
            let closed = g_bar_closed(ell, c.alpha1, a2, a3, sigma);
            assert!(((q - closed) / closed).abs() < 1e-9, "{q} vs {closed}");
        }
    }

    #[test]
    fn h_bar_reference_values() {
        let c = ctx(3);
        let spec = QuadratureSpec::default();
        let zero = Sym2::zero();
        let v0 = h_bar(0.0, &zero, 14, &c, &spec).unwrap();
        assert_abs_diff_eq!(v0, c.alpha1 * (11.0f64 / 13.0).sqrt() / 2.0, epsilon = 1e-10);
        let v40 = h_bar(40.0, &zero, 14, &c, &spec).unwrap();
        assert!(v40 < 1e-8 * v0);
        assert!(h_bar(0.0, &zero, 3, &c, &spec).is_err());
    }

    #[test]
    fn h_bar_matches_closed_form() {
        let spec = QuadratureSpec::default();
        let mut rng = RngStream::new(99, 0).rng();
        for _ in 0..100 {
            let fc = 2 + (rng.uniform() * 6.0) as usize;
            let c = ctx(fc);
            let ell = rng.uniform_in(0.0, 5.0);
            let a = rng.uniform_in(-5.0, 5.0);
            let b = rng.uniform_in(-3.0, 3.0);
            let r = Sym2::new(-a, b, 0.0);
            let q = h_bar(ell, &r, c.m, &c, &spec).unwrap();
            let closed = h_bar_closed(ell, c.alpha1, a, b, c.m).unwrap();
            assert!(((q - closed) / closed).abs() < 1e-7, "{q} vs {closed}");
        }
    }

    #[test]
    fn rice_known_reference_values() {
        let (_, mut cert) = null_cert(3, 1);
        let c = ctx(3);
        cert.lambda2 = cert.lambda1;
        assert_abs_diff_eq!(rice_known(&cert, 1.0, &c).unwrap().value, 1.0, epsilon = 1e-15);

        cert.lambda1 = 2.0;
        cert.lambda2 = 1.0;
        cert.alpha2 = 0.0;
        cert.alpha3 = 0.0;
        cert.remainder = Sym2::zero();
        let v = rice_known(&cert, 1.0, &c).unwrap().value;
        let expected = (2.0 * normal_pdf(2.0) + normal_sf(2.0)) / (normal_pdf(1.0) + normal_sf(1.0));
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.326_319_5, epsilon = 1e-6);
    }

    #[test]
    fn rice_closed_form_agrees_with_quadrature() {
        for seed in 0..20 {
            let (_, cert) = null_cert(4, seed);
            let rep = rice_known(&cert, 1.0, &ctx(4)).unwrap();
            assert!((rep.value - rep.aux.quadrature.unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn rice_is_scale_equivariant() {
        let opts = KnotOptions::default();
        for seed in 0..5 {
            let (obs, cert) = null_cert(3, seed);
            let scaled = certify(&obs.scaled(4.0), &opts).unwrap();
            let a = rice_known(&cert, 1.0, &ctx(3)).unwrap().value;
            let b = rice_known(&scaled, 4.0, &ctx(3)).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn rice_unknown_basics() {
        let (obs, mut cert) = null_cert(3, 5);
        let c = ctx(3);
        let est = sigma_hat_cond(&obs, cert.z_hat).unwrap();
        let rep = rice_unknown(&cert, &est, &c).unwrap();
        assert!((rep.value - rep.aux.closed_form.unwrap()).abs() < 1e-7);
        assert_eq!(rep.aux.dof, Some(11));
        cert.lambda2 = cert.lambda1;
        assert_abs_diff_eq!(rice_unknown(&cert, &est, &c).unwrap().value, 1.0, epsilon = 1e-15);
        let wrong = sigma_hat_grid(&obs, cert.z_hat).unwrap();
        assert!(rice_unknown(&cert, &wrong, &c).is_err());
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn spacing_reference_values() {
        assert_abs_diff_eq!(spacing_statistic(1.3, 1.3, 1.0).unwrap().value, 1.0, epsilon = 1e-15);
        let v = spacing_statistic(2.0, 1.0, 1.0).unwrap().value;
        assert_abs_diff_eq!(v, 0.022_750_131_948_179_207 / 0.158_655_253_931_457_05, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.14339, epsilon = 1e-5);
        assert!(spacing_statistic(2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_knots_basics() {
        let (obs, cert) = null_cert(3, 42);
        let mut prev = f64::NEG_INFINITY;
        for p in [3, 10, 32, 50, 200] {
            let k = grid_knots(&obs, p).unwrap();
            assert!(k.lambda1 <= cert.lambda1 + 1e-12);
            if p >= 32 {
                assert!(k.lambda1 >= prev - 1e-3);
            }
            prev = k.lambda1;
        }
        // grid error is at most the quadratic growth of -X'' over half a diagonal cell
        let hmax = -cert.hessian().eigenvalues()[0];
        for p in [50, 200, 400] {
            let h = TAU / p as f64;
            let gap = cert.lambda1 - grid_knots(&obs, p).unwrap().lambda1;
            assert!(gap >= -1e-12 && gap <= 1.5 * 0.5 * hmax * h * h / 2.0, "p={p}: {gap}");
        }
        let atom = crate::sr_model::Atom {
            location: TAU * 3.0 / 10.0,
            weight: num_complex::Complex::new(1.25, 0.0),
        };
        let spike = synthesize(&AtomicMeasure::new(vec![atom]).unwrap(), 3, 0.0, RngStream::new(0, 0)).unwrap();
        assert_abs_diff_eq!(grid_knots(&spike, 10).unwrap().lambda1, 1.25, epsilon = 1e-13);
        assert!(grid_knots(&spike, 1).is_err());
    }

    #[test]
    fn grid_first_knot_within_1e4_at_p200() {
        let (obs, cert) = null_cert(3, 42);
        let gap = cert.lambda1 - grid_knots(&obs, 200).unwrap().lambda1;
        assert!(gap < 1e-4, "lambda1 - lambda1_n = {gap:e} at p = 200");
    }

    #[test]
    fn voronoi_diagonal_metric_gives_unit_square() {
        let hess = Sym2::diag(-3.0, -0.7);
        let mut mean = [0.0, 0.0];
        for r in 0..10_000 {
            let u = voronoi_sample(&hess, RngStream::new(1, r)).unwrap();
            assert!(u[0].abs() <= 0.5 && u[1].abs() <= 0.5);
            mean[0] += u[0] / 1e4;
            mean[1] += u[1] / 1e4;
        }
        assert!(mean[0].abs() < 0.02 && mean[1].abs() < 0.02);
        assert!(in_voronoi_cell([0.49, -0.49], &hess.scale(-1.0)));
        assert!(!in_voronoi_cell([0.51, 0.0], &hess.scale(-1.0)));
    }

    #[test]
    fn voronoi_samples_lie_in_cell_for_skewed_metrics() {
        let mut rng = RngStream::new(7, 0).rng();
        for case in 0..50 {
            let a = [[rng.normal() * 3.0, rng.normal()], [rng.normal(), rng.normal() * 0.2]];
            let q = Sym2::new(
                a[0][0] * a[0][0] + a[0][1] * a[0][1] + 1e-3,
                a[0][0] * a[1][0] + a[0][1] * a[1][1],
                a[1][0] * a[1][0] + a[1][1] * a[1][1] + 1e-3,
            );
            let hess = q.scale(-1.0);
            let mut mean = [0.0, 0.0];
            for r in 0..2000 {
                let u = voronoi_sample(&hess, RngStream::new(case, r)).unwrap();
                assert!(in_voronoi_cell(u, &q));
                mean[0] += u[0] / 2000.0;
                mean[1] += u[1] / 2000.0;
            }
            // cell has area 1 and is centrally symmetric
            let spread = (q.theta_theta / q.det()).sqrt().max((q.tt / q.det()).sqrt());
            assert!(mean[0].hypot(mean[1]) < 0.15 * spread.max(1.0));
        }
    }

    // The fraction of uniform proposals on [-1, 1]² landing in V₀ is 1/4 when the
    // cell is contained in the box.
    #[test]
    fn voronoi_cell_area_is_one() {
        let q = Sym2::new(2.0, 0.6, 1.0);
        let mut rng = RngStream::new(11, 0).rng();
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|_| in_voronoi_cell([rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)], &q))
            .count();
        assert!((hits as f64 / trials as f64 - 0.25).abs() < 0.02);
    }

    #[test]
    fn lambda2_bar_axis_case() {
        let c = ctx(3);
        let (d1, d2) = (10.0, 1.5);
        let hess = Sym2::diag(-d1, -d2);
        let v = lambda2_bar(3.0, 0.1, &hess, [0.0, 0.0], &c, DEFAULT_K_WINDOW);
        assert_abs_diff_eq!(v, (3.0 - (d1 / c.alpha1).min(d2)).max(0.1), epsilon = 1e-14);
        let v = lambda2_bar(3.0, 2.9, &hess, [0.0, 0.0], &c, DEFAULT_K_WINDOW);
        assert_eq!(v, 2.9);
    }

    #[test]
    fn lambda2_bar_window_is_stable() {
        for seed in 0..100 {
            let (_, cert) = null_cert(3, seed);
            let c = ctx(3);
            let aux = randomize(&cert, &c, RngStream::new(seed, 1), DEFAULT_K_WINDOW).unwrap();
            let wide = lambda2_bar(cert.lambda1, cert.lambda2, &cert.hessian(), aux.u, &c, 64);
            assert!(aux.lambda2_bar >= cert.lambda2);
            assert!((aux.lambda2_bar - wide).abs() < 1e-12);
            let s_grid = grid_test_known(cert.lambda1, aux.lambda2_bar, 1.0).unwrap().value;
            let s_st = spacing_statistic(cert.lambda1, cert.lambda2, 1.0).unwrap().value;
            assert!(s_grid >= s_st);
        }
    }

    #[test]
    fn grid_tests_equal_one_at_tie() {
        let (obs, cert) = null_cert(3, 3);
        assert_abs_diff_eq!(grid_test_known(1.7, 1.7, 1.0).unwrap().value, 1.0, epsilon = 1e-15);
        let est = sigma_hat_grid(&obs, cert.z_hat).unwrap();
        assert_abs_diff_eq!(
            grid_test_unknown(1.7, 1.7, &est, &ctx(3)).unwrap().value,
            1.0,
            epsilon = 1e-15
        );
        let cond = sigma_hat_cond(&obs, cert.z_hat).unwrap();
        assert!(grid_test_unknown(1.7, 1.2, &cond, &ctx(3)).is_err());
    }

    proptest! {
        #[test]
        fn spacing_is_a_p_value(l2 in 0.0f64..5.0, gap in 0.0f64..5.0, sigma in 0.2f64..3.0) {
            let v = spacing_statistic(l2 + gap, l2, sigma).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn rice_closed_form_monotone_in_level(
            l2 in 0.0f64..4.0, gap in 0.0f64..3.0, a2 in -2.0f64..2.0, a3 in -1.0f64..1.0
        ) {
            let c = ctx(3);
            let num = g_bar_closed(l2 + gap, c.alpha1, a2, a3, 1.0);
            let den = g_bar_closed(l2, c.alpha1, a2, a3, 1.0);
            // the integrand is positive for u beyond the largest root of det(-Λ̃u + R)
            let root = (-a2 + (a2 * a2 + 4.0 * c.alpha1 * a3 * a3).sqrt()) / (2.0 * c.alpha1);
            prop_assume!(l2 >= root);
            prop_assert!(num <= den * (1.0 + 1e-12));
        }
    }
}
