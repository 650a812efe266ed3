//! Super-resolution observation model on the circle.
//!
//! Data are noisy Fourier coefficients `y_k`, `k = -fc..=fc`, of a spike
//! train. The correlation process `Z(t) = N^{-1/2} Σ y_k e^{ikt}` and the
//! real field `X(t, θ) = Re(e^{-iθ} Z(t))` on the 2-torus are evaluated with
//! exact derivatives.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Real, RngStream, StreamRng};

/// Symmetric 2×2 matrix indexed by the torus coordinates (t, θ).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2<T> {
    pub tt: T,
    pub t_theta: T,
    pub theta_theta: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(tt: T, t_theta: T, theta_theta: T) -> Self {
        Sym2 {
            tt,
            t_theta,
            theta_theta,
        }
    }

    pub fn diag(a: T, b: T) -> Self {
        Sym2::new(a, T::zero(), b)
    }

    pub fn zero() -> Self {
        Sym2::new(T::zero(), T::zero(), T::zero())
    }

    pub fn det(&self) -> T {
        self.tt * self.theta_theta - self.t_theta * self.t_theta
    }

    pub fn trace(&self) -> T {
        self.tt + self.theta_theta
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: [T; 2], v: [T; 2]) -> T {
        u[0] * (self.tt * v[0] + self.t_theta * v[1]) + u[1] * (self.t_theta * v[0] + self.theta_theta * v[1])
    }

    pub fn quad(&self, u: [T; 2]) -> T {
        self.bilinear(u, u)
    }

    pub fn apply(&self, u: [T; 2]) -> [T; 2] {
        [
            self.tt * u[0] + self.t_theta * u[1],
            self.t_theta * u[0] + self.theta_theta * u[1],
        ]
    }

    pub fn scale(&self, c: T) -> Self {
        Sym2::new(self.tt * c, self.t_theta * c, self.theta_theta * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        Sym2::new(
            self.tt + other.tt,
            self.t_theta + other.t_theta,
            self.theta_theta + other.theta_theta,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> [T; 2] {
        let half = T::lit(0.5);
        let mean = (self.tt + self.theta_theta) * half;
        let dev = ((self.tt - self.theta_theta) * half).hypot(self.t_theta);
        [mean - dev, mean + dev]
    }

    pub fn is_negative_definite(&self) -> bool {
        self.tt < T::zero() && self.det() > T::zero()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.tt - other.tt)
            .abs()
            .max((self.t_theta - other.t_theta).abs())
            .max((self.theta_theta - other.theta_theta).abs())
    }
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let r = x % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Reduces an angle difference to `[-π, π)`.
pub fn wrap_signed<T: Real>(x: T) -> T {
    wrap_angle(x + T::PI()) - T::PI()
}

/// A point `(t, θ)` of the 2-torus, both coordinates kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TorusPoint<T> {
    pub t: T,
    pub theta: T,
}

impl<T: Real> TorusPoint<T> {
    pub fn new(t: T, theta: T) -> Self {
        TorusPoint {
            t: wrap_angle(t),
            theta: wrap_angle(theta),
        }
    }

    pub fn offset(&self, d: [T; 2]) -> Self {
        TorusPoint::new(self.t + d[0], self.theta + d[1])
    }

    /// Shortest displacement `other - self`, each component in `[-π, π)`.
    pub fn displacement_to(&self, other: &Self) -> [T; 2] {
        [wrap_signed(other.t - self.t), wrap_signed(other.theta - self.theta)]
    }

    pub fn distance(&self, other: &Self) -> T {
        let d = self.displacement_to(other);
        d[0].hypot(d[1])
    }
}

/// `sin(Nt/2) / sin(t/2)` with `N = 2fc + 1`; equals `Σ_{|k|≤fc} cos(kt)`.
pub fn dirichlet<T: Real>(fc: usize, t: T) -> T {
    let half = T::lit(0.5);
    let s = (t * half).sin();
    if s.abs() < T::lit(1e-8) {
        return (1..=fc).fold(T::one(), |acc, k| {
            acc + T::lit(2.0) * (T::from_usize_lossy(k) * t).cos()
        });
    }
    let n = T::from_usize_lossy(2 * fc + 1);
    (n * t * half).sin() / s
}

/// Quantities fixed by the cutoff frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelContext<T> {
    pub fc: usize,
    /// Number of observed frequencies, `2fc + 1`.
    pub n: usize,
    /// `fc(fc+1)/3`, the curvature of the correlation along t.
    pub alpha1: T,
    /// Karhunen–Loève dimension of the real field, `2n`.
    pub m: usize,
}

impl<T: Real> ModelContext<T> {
    pub fn new(fc: usize) -> Result<Self> {
        if fc == 0 {
            return Err(Error::InvalidArgument("cutoff frequency must be at least 1".into()));
        }
        let f = T::from_usize_lossy(fc);
        Ok(ModelContext {
            fc,
            n: 2 * fc + 1,
            alpha1: f * (f + T::one()) / T::lit(3.0),
            m: 2 * (2 * fc + 1),
        })
    }

    pub fn n_real(&self) -> T {
        T::from_usize_lossy(self.n)
    }

    /// Negative Hessian of the correlation at the origin, `diag(alpha1, 1)`.
    pub fn lambda_tilde(&self) -> Sym2<T> {
        Sym2::diag(self.alpha1, T::one())
    }

    pub fn frequencies(&self) -> impl Iterator<Item = i64> + Clone {
        let f = self.fc as i64;
        -f..=f
    }

    /// Normalized kernel `Γ(t) = D_N(t)/N` and its first two derivatives.
    pub fn kernel(&self, t: T) -> [T; 3] {
        let mut g = T::one();
        let mut g1 = T::zero();
        let mut g2 = T::zero();
        let two = T::lit(2.0);
        for k in 1..=self.fc {
            let kf = T::from_usize_lossy(k);
            let (s, c) = (kf * t).sin_cos();
            g = g + two * c;
            g1 = g1 - two * kf * s;
            g2 = g2 - two * kf * kf * c;
        }
        let n = self.n_real();
        [g / n, g1 / n, g2 / n]
    }

    /// `ρ(d) = Γ(d_t) cos(d_θ)`.
    pub fn correlation(&self, d: [T; 2]) -> T {
        self.kernel(d[0])[0] * d[1].cos()
    }

    pub fn correlation_grad(&self, d: [T; 2]) -> [T; 2] {
        let [g, g1, _] = self.kernel(d[0]);
        let (s, c) = d[1].sin_cos();
        [g1 * c, -g * s]
    }

    pub fn correlation_hess(&self, d: [T; 2]) -> Sym2<T> {
        let [g, g1, g2] = self.kernel(d[0]);
        let (s, c) = d[1].sin_cos();
        Sym2::new(g2 * c, -g1 * s, -g * c)
    }

    /// Value, gradient and Hessian of ρ in one kernel evaluation.
    pub fn correlation_jet(&self, d: [T; 2]) -> (T, [T; 2], Sym2<T>) {
        let [g, g1, g2] = self.kernel(d[0]);
        let (s, c) = d[1].sin_cos();
        (g * c, [g1 * c, -g * s], Sym2::new(g2 * c, -g1 * s, -g * c))
    }
}

/// One spike: location on the circle and complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub location: T,
    pub weight: Complex<T>,
}

/// Finite sum of spikes; empty under the null hypothesis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure<T> {
    atoms: Vec<Atom<T>>,
}

impl<T: Real> AtomicMeasure<T> {
    pub fn empty() -> Self {
        AtomicMeasure { atoms: Vec::new() }
    }

    /// Builds a measure, rejecting coincident locations (modulo 2π).
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let atoms: Vec<Atom<T>> = atoms
            .into_iter()
            .map(|a| Atom {
                location: wrap_angle(a.location),
                weight: a.weight,
            })
            .collect();
        for (i, a) in atoms.iter().enumerate() {
            if !a.location.is_finite() || !a.weight.re.is_finite() || !a.weight.im.is_finite() {
                return Err(Error::InvalidArgument("non-finite spike".into()));
            }
            for b in &atoms[..i] {
                if wrap_signed(a.location - b.location).abs() <= T::epsilon() {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate spike location {}",
                        a.location
                    )));
                }
            }
        }
        Ok(AtomicMeasure { atoms })
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Noiseless data `N^{-1/2} Σ_j a_j e^{-ik x_j}`.
    pub fn fourier(&self, fc: usize) -> Vec<Complex<T>> {
        let inv_sqrt_n = T::from_usize_lossy(2 * fc + 1).sqrt().recip();
        let f = fc as i64;
        (-f..=f)
            .map(|k| {
                self.atoms.iter().fold(Complex::new(T::zero(), T::zero()), |acc, a| {
                    acc + a.weight * Complex::from_polar(T::one(), -T::from_i64_lossy(k) * a.location)
                }) * inv_sqrt_n
            })
            .collect()
    }
}

/// `Z`, `Z'` and `Z''` at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZJet<T> {
    pub z: Complex<T>,
    pub dz: Complex<T>,
    pub d2z: Complex<T>,
}

impl<T: Real> ZJet<T> {
    /// `X(t, θ)` for the `t` at which the jet was taken.
    pub fn x(&self, theta: T) -> T {
        rotate(self.z, theta).re
    }

    pub fn x_grad(&self, theta: T) -> [T; 2] {
        [rotate(self.dz, theta).re, rotate(self.z, theta).im]
    }

    pub fn x_hess(&self, theta: T) -> Sym2<T> {
        Sym2::new(
            rotate(self.d2z, theta).re,
            rotate(self.dz, theta).im,
            -rotate(self.z, theta).re,
        )
    }
}

#[inline]
fn rotate<T: Real>(z: Complex<T>, theta: T) -> Complex<T> {
    z * Complex::from_polar(T::one(), -theta)
}

/// Noisy Fourier data `y_k`, `k = -fc..=fc`, with an optional known noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    fc: usize,
    y: Vec<Complex<T>>,
    sigma: Option<T>,
}

impl<T: Real> Observation<T> {
    pub fn new(fc: usize, y: Vec<Complex<T>>, sigma: Option<T>) -> Result<Self> {
        if fc == 0 {
            return Err(Error::Schema("fc must be at least 1".into()));
        }
        if y.len() != 2 * fc + 1 {
            return Err(Error::Schema(format!(
                "expected {} coefficients for fc = {fc}, found {}",
                2 * fc + 1,
                y.len()
            )));
        }
        if y.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Schema("non-finite coefficient".into()));
        }
        if let Some(s) = sigma {
            if !(s > T::zero() && s.is_finite()) {
                return Err(Error::Schema(format!("sigma must be positive, got {s}")));
            }
        }
        Ok(Observation { fc, y, sigma })
    }

    pub fn fc(&self) -> usize {
        self.fc
    }

    pub fn y(&self) -> &[Complex<T>] {
        &self.y
    }

    pub fn sigma(&self) -> Option<T> {
        self.sigma
    }

    pub fn context(&self) -> ModelContext<T> {
        ModelContext::new(self.fc).expect("fc validated at construction")
    }

    pub fn with_sigma(mut self, sigma: Option<T>) -> Result<Self> {
        if let Some(s) = sigma {
            if !(s > T::zero() && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
            }
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Multiplies the data (and the known noise level) by `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        Observation {
            fc: self.fc,
            y: self.y.iter().map(|v| v * c).collect(),
            sigma: self.sigma.map(|s| s * c),
        }
    }

    /// Applies the global phase `e^{iφ}` to every coefficient.
    pub fn rotated(&self, phi: T) -> Self {
        let w = Complex::from_polar(T::one(), phi);
        Observation {
            fc: self.fc,
            y: self.y.iter().map(|v| v * w).collect(),
            sigma: self.sigma,
        }
    }

    pub fn z(&self, t: T) -> Complex<T> {
        self.z_jet(t).z
    }

    /// `Z(t)` with its first two derivatives.
    pub fn z_jet(&self, t: T) -> ZJet<T> {
        let step = Complex::from_polar(T::one(), t);
        let f = self.fc as i64;
        let mut w = Complex::from_polar(T::one(), -T::from_i64_lossy(f) * t);
        let zero = Complex::new(T::zero(), T::zero());
        let (mut z, mut dz, mut d2z) = (zero, zero, zero);
        for (k, yk) in (-f..=f).zip(&self.y) {
            let term = yk * w;
            let kf = T::from_i64_lossy(k);
            z = z + term;
            // d/dt e^{ikt} = ik e^{ikt}
            dz = dz + Complex::new(-term.im, term.re) * kf;
            d2z = d2z - term * (kf * kf);
            w = w * step;
        }
        let s = T::from_usize_lossy(self.y.len()).sqrt().recip();
        ZJet {
            z: z * s,
            dz: dz * s,
            d2z: d2z * s,
        }
    }

    pub fn x(&self, p: TorusPoint<T>) -> T {
        self.z_jet(p.t).x(p.theta)
    }

    pub fn x_grad(&self, p: TorusPoint<T>) -> [T; 2] {
        self.z_jet(p.t).x_grad(p.theta)
    }

    pub fn x_hess(&self, p: TorusPoint<T>) -> Sym2<T> {
        self.z_jet(p.t).x_hess(p.theta)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.y.iter().all(|c| c.re == T::zero() && c.im == T::zero())
    }
}

/// Draws `y = N^{-1/2} F(measure) + σ(ζ₁ + iζ₂)` from `stream`.
pub fn synthesize<T: Real>(
    measure: &AtomicMeasure<T>,
    fc: usize,
    sigma: T,
    stream: RngStream,
) -> Result<Observation<T>> {
    synthesize_with(measure, fc, sigma, &mut stream.rng())
}

/// As [`synthesize`], continuing an already-positioned generator. Noise is
/// drawn in frequency order, real part before imaginary part.
pub fn synthesize_with<T: Real>(
    measure: &AtomicMeasure<T>,
    fc: usize,
    sigma: T,
    rng: &mut StreamRng,
) -> Result<Observation<T>> {
    if fc == 0 {
        return Err(Error::InvalidArgument("cutoff frequency must be at least 1".into()));
    }
    if !(sigma >= T::zero() && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    let mut y = measure.fourier(fc);
    if sigma > T::zero() {
        for v in &mut y {
            let re = T::lit(rng.normal());
            let im = T::lit(rng.normal());
            *v = *v + Complex::new(re, im) * sigma;
        }
    }
    let known = (sigma > T::zero()).then_some(sigma);
    Observation::new(fc, y, known)
}

#[derive(Serialize, Deserialize)]
struct ObservationFile {
    fc: i64,
    sigma: Option<f64>,
    y: Vec<[f64; 2]>,
}

impl Observation<f64> {
    /// JSON text `{"fc", "sigma", "y": [[re, im], ...]}` with 17 significant digits.
    pub fn to_json(&self) -> String {
        let file = ObservationFile {
            fc: self.fc as i64,
            sigma: self.sigma,
            y: self.y.iter().map(|c| [c.re, c.im]).collect(),
        };
        crate::json::to_string(&file)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ObservationFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.fc < 1 {
            return Err(Error::Schema(format!("fc must be at least 1, got {}", file.fc)));
        }
        let y = file.y.into_iter().map(|[re, im]| Complex::new(re, im)).collect();
        Observation::new(file.fc as usize, y, file.sigma)
    }
}

pub fn save_observation(obs: &Observation<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, obs.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_observation(path: impl AsRef<Path>) -> Result<Observation<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Observation::from_json(&text)
}

/// Uniform location on the circle.
pub fn uniform_location(rng: &mut StreamRng) -> f64 {
    rng.uniform() * TAU
}
