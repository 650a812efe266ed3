use super::Real;
use crate::error::{Error, Result};

const PANEL_NODES: usize = 16;
const MAX_TAIL_PANELS: usize = 64;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial
    /// (nodes and weights are computed in `f64` and then converted).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = T::lit(0.5);
        let mid = (a + b) * half;
        let rad = (b - a) * half;
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(mid + rad * x))
            * rad
    }

    fn integrate_checked<F: FnMut(T) -> T>(&self, a: T, b: T, f: &mut F) -> Result<T> {
        let half = T::lit(0.5);
        let mid = (a + b) * half;
        let rad = (b - a) * half;
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let t = mid + rad * x;
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand {
                    at: t.to_f64().unwrap_or(f64::NAN),
                });
            }
            acc = acc + w * v;
        }
        Ok(acc * rad)
    }
}

// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for [`integrate_upper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec<T> {
    /// Total Gauss–Legendre nodes spent on the body `[lower, lower + tail_cut·scale]`.
    pub node_count: usize,
    /// Length of the body in units of the integrand's scale.
    pub tail_cut: T,
    pub abs_tol: T,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        QuadratureSpec {
            node_count: 64,
            tail_cut: T::lit(12.0),
            abs_tol: T::lit(1e-12),
        }
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn new(node_count: usize, tail_cut: T, abs_tol: T) -> Result<Self> {
        let spec = QuadratureSpec {
            node_count,
            tail_cut,
            abs_tol,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 8 {
            return Err(Error::InvalidArgument(format!(
                "node_count must be at least 8, got {}",
                self.node_count
            )));
        }
        if !(self.tail_cut > T::zero()) || !(self.abs_tol > T::zero()) {
            return Err(Error::InvalidArgument("tail_cut and abs_tol must be positive".into()));
        }
        Ok(())
    }
}

/// ∫_lower^∞ f(t) dt for integrands decaying like a Gaussian or Student tail
/// of width `scale`.
///
/// The body `[lower, lower + tail_cut·scale]` is split into 16-node panels.
/// Heavy tails are then followed with panels of doubling width until a panel
/// contributes less than `min(abs_tol, ε·|total|)`.
pub fn integrate_upper<T, F>(mut f: F, lower: T, scale: T, spec: &QuadratureSpec<T>) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    spec.validate()?;
    if !(scale > T::zero()) || !lower.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "integrate_upper needs finite lower and positive scale (lower={lower}, scale={scale})"
        )));
    }
    let per_panel = spec.node_count.min(PANEL_NODES);
    let panels = (spec.node_count / per_panel).max(1);
    let rule = GaussLegendre::<T>::new(per_panel);

    let body = spec.tail_cut * scale;
    let width = body / T::from_usize_lossy(panels);
    let mut total = T::zero();
    for p in 0..panels {
        let a = lower + width * T::from_usize_lossy(p);
        total = total + rule.integrate_checked(a, a + width, &mut f)?;
    }

    let mut a = lower + body;
    let mut w = scale;
    for _ in 0..MAX_TAIL_PANELS {
        let piece = rule.integrate_checked(a, a + w, &mut f)?;
        total = total + piece;
        if piece.abs() <= spec.abs_tol.min(T::epsilon() * total.abs()) {
            break;
        }
        a = a + w;
        w = w + w;
    }
    Ok(total)
}
