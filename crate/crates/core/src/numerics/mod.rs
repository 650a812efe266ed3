//! Scalar-generic numerical kernels shared by every other module: special
//! functions, semi-infinite quadrature, local maximizers and reproducible
//! random streams.

mod optimize;
mod quadrature;
mod rng;
mod special;

pub(crate) use special::student_pdf_unchecked;

pub use optimize::{maximize_1d, maximize_2d, maximize_2d_with, Maximum1d, Maximum2d, SimplexOptions};
pub use quadrature::{integrate_upper, GaussLegendre, QuadratureSpec};
pub use rng::{RngStream, StreamRng};
pub use special::{
    chi_square_cdf, erf, erfc, gamma_m_constant, gamma_p, gamma_q, ln_gamma, normal_cdf, normal_pdf, normal_sf,
    regularized_beta, student_pdf, student_sf,
};

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar the numerical core is written against (`f32`, `f64`).
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn from_i64_lossy(n: i64) -> Self {
        Self::from_i64(n).expect("i64 representable")
    }
}

impl<T> Real for T where T: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {}
