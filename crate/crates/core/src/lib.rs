//! radiprior: a self-contained differentiable Monte Carlo renderer and
//! inverse-rendering toolkit.
//!
//! Scene parameters (spatially varying albedo/roughness, environment
//! lighting) are recovered from multi-view images by minimizing a
//! photometric loss plus a radiometric prior: the norm of the
//! rendering-equation residual of a neural radiance cache, instead of
//! differentiating multi-bounce path integrals.

pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod materials;
pub mod math;
pub mod neuralfield;
pub mod rng;
pub mod scenes;
pub mod transport;

pub use error::{Error, Result};
