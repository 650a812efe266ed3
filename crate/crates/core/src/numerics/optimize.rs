use super::Real;
use crate::error::{Error, Result};

const BRENT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum1d<T> {
    pub argmax: T,
    pub max: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum2d<T> {
    pub argmax: [T; 2],
    pub max: T,
}

/// Brent's parabolic/golden-section search for the maximum of a unimodal `f`
/// on `[lo, hi]`; `tol` is an absolute tolerance on the argmax.
pub fn maximize_1d<T, F>(mut f: F, bracket: (T, T), tol: T) -> Result<Maximum1d<T>>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let (mut a, mut b) = bracket;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::DegenerateBracket {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = T::lit(0.5);
    let golden = T::lit(0.381_966_011_250_105_1);
    let tol = tol.max(T::epsilon());
    let rel = T::epsilon() * T::lit(2.0);
    let mut g = |x: T| -f(x);

    let mut x = a + golden * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d = T::zero();
    let mut e = T::zero();

    for _ in 0..BRENT_MAX_ITER {
        let xm = half * (a + b);
        let tol1 = rel * x.abs() + tol / T::lit(3.0);
        let tol2 = tol1 + tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            break;
        }
        let mut golden_step = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = (q - r) * T::lit(2.0);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (half * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden_step = false;
            }
        }
        if golden_step {
            e = if x >= xm { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(Maximum1d { argmax: x, max: -fx })
}

/// Nelder–Mead settings for [`maximize_2d_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions<T> {
    pub initial_step: T,
    /// Stop once the simplex diameter drops below this value.
    pub tol: T,
    pub max_iter: usize,
    /// Fresh simplices built around the best vertex after `max_iter` runs out.
    pub restarts: usize,
}

impl<T: Real> Default for SimplexOptions<T> {
    fn default() -> Self {
        SimplexOptions {
            initial_step: T::lit(0.1),
            tol: T::lit(1e-10),
            max_iter: 10_000,
            restarts: 0,
        }
    }
}

/// Nelder–Mead maximization from `start` with the default initial step.
pub fn maximize_2d<T, F>(f: F, start: [T; 2], tol: T) -> Result<Maximum2d<T>>
where
    T: Real,
    F: FnMut([T; 2]) -> T,
{
    let opts = SimplexOptions {
        tol,
        ..SimplexOptions::default()
    };
    maximize_2d_with(f, start, &opts)
}

pub fn maximize_2d_with<T, F>(mut f: F, start: [T; 2], opts: &SimplexOptions<T>) -> Result<Maximum2d<T>>
where
    T: Real,
    F: FnMut([T; 2]) -> T,
{
    let mut from = start;
    for _ in 0..=opts.restarts {
        match simplex_run(&mut f, from, opts) {
            Ok(m) => return Ok(m),
            Err(best) => from = best,
        }
    }
    Err(Error::Unconverged {
        iterations: opts.max_iter * (opts.restarts + 1),
    })
}

/// One Nelder–Mead run; on exhaustion returns the best vertex.
fn simplex_run<T, F>(f: &mut F, start: [T; 2], opts: &SimplexOptions<T>) -> std::result::Result<Maximum2d<T>, [T; 2]>
where
    T: Real,
    F: FnMut([T; 2]) -> T,
{
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let h = opts.initial_step;
    let mut g = |p: [T; 2]| {
        let v = f(p);
        if v.is_nan() {
            T::infinity()
        } else {
            -v
        }
    };
    let mut simplex = [start, [start[0] + h, start[1]], [start[0], start[1] + h]];
    let mut vals = simplex.map(&mut g);

    let lerp = |a: [T; 2], b: [T; 2], s: T| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
    let dist = |a: [T; 2], b: [T; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    for _ in 0..opts.max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);

        let diameter = dist(simplex[0], simplex[1]).max(dist(simplex[0], simplex[2]));
        if diameter < opts.tol {
            return Ok(Maximum2d {
                argmax: simplex[0],
                max: -vals[0],
            });
        }

        let centroid = lerp(simplex[0], simplex[1], half);
        let reflected = lerp(simplex[2], centroid, two);
        let fr = g(reflected);
        if fr < vals[0] {
            let expanded = lerp(simplex[2], centroid, T::lit(3.0));
            let fe = g(expanded);
            if fe < fr {
                simplex[2] = expanded;
                vals[2] = fe;
            } else {
                simplex[2] = reflected;
                vals[2] = fr;
            }
            continue;
        }
        if fr < vals[1] {
            simplex[2] = reflected;
            vals[2] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[2] {
            let c = lerp(simplex[2], centroid, T::lit(1.5));
            (c, g(c))
        } else {
            let c = lerp(simplex[2], centroid, half);
            (c, g(c))
        };
        if fc < vals[2].min(fr) {
            simplex[2] = contracted;
            vals[2] = fc;
            continue;
        }
        for i in 1..3 {
            simplex[i] = lerp(simplex[0], simplex[i], half);
            vals[i] = g(simplex[i]);
        }
    }
    let best = (0..3).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
    Err(simplex[best])
}
