//! Intrinsic-stability analysis for delay differential equations with
//! time-varying delays.
//!
//! The central object is the stability matrix `𝓜 = M₀ + Σ Mᵢ` built from
//! derivative bounds of `f`; a system is intrinsically stable when its
//! spectral abscissa is negative. Around it the crate provides a
//! method-of-steps integrator, a comparison-principle verifier, exact
//! discretization into block-companion matrix families, spectral-radius
//! bounds for those families, and reservoir-computing consistency tools.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod csv;
pub mod discretize;
pub mod integrate;
pub mod linalg;
pub mod parallel;
pub mod reduction;
pub mod reservoir;
pub mod stability;
pub mod system;

mod error;

pub use error::{Error, Result};
