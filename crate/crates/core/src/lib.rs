//! Exact tests for the mean of the super-resolution Gaussian process: knots of
//! the continuous LARS, grid-less Rice tests, randomized grid tests, the
//! spacing test, and a Monte-Carlo harness to calibrate them.
//!
//! The process model is generic over the scalar type; the statistical layers
//! work in `f64`, and the aliases below name the `f64` instances.

// `!(a > b)` is used on purpose: it is also true when either side is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod json;
pub mod numerics;
pub mod sr_model;

pub mod knots;
pub mod lars;
pub mod mc_harness;
pub mod stat_tests;
pub mod variance;

pub use error::{Error, Result};

pub type Observation = sr_model::Observation<f64>;
pub type ModelContext = sr_model::ModelContext<f64>;
pub type TorusPoint = sr_model::TorusPoint<f64>;
pub type Sym2 = sr_model::Sym2<f64>;
pub type AtomicMeasure = sr_model::AtomicMeasure<f64>;
pub type Atom = sr_model::Atom<f64>;
pub type QuadratureSpec = numerics::QuadratureSpec<f64>;
