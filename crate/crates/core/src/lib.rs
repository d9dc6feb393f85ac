//! Floquet-Bloch finite element solver for time-harmonic scattering by
//! locally perturbed periodic Dirichlet surfaces in two dimensions.
//!
//! The pipeline: [`geometry`] flattens the perturbed surface onto the periodic
//! one, [`quasigrid`] discretizes the quasi-momentum, [`mesh`] and [`assembly`]
//! build one sparse Helmholtz system per quasi-momentum node plus the dense
//! finite-section coupling, [`solver`] solves the coupled system and
//! [`postprocess`] transforms back to physical space.

pub mod assembly;
pub mod config;
pub mod dtn;
mod error;
pub mod experiment;
pub mod geometry;
pub mod incident;
pub mod mesh;
pub mod par;
pub mod postprocess;
pub mod quad;
pub mod quasigrid;
pub mod solver;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = faer::c64;

/// `sqrt(Lambda / 2 pi)`, the normalization of the Bloch transform pair.
pub fn bloch_normalization(lambda: f64) -> f64 {
    (lambda / (2.0 * std::f64::consts::PI)).sqrt()
}

/// Unit-modulus `exp(i * phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    let (s, c) = phase.sin_cos();
    C64::new(c, s)
}
