//! Desk-scale laboratory for fixed-frequency inverse obstacle scattering at `k = 1`.
//!
//! * [`special_functions`] – harmonics (real and complex argument), spherical Bessel
//!   functions, sphere quadrature.
//! * [`geometry`] – star-shaped surfaces, surface quadrature, admissibility, Hausdorff distance.
//! * [`forward_solver`] – Mie series and a combined-field boundary integral solver.
//! * [`far_field_operator`] – harmonic coefficients of the far field, continuation to complex
//!   directions, the uniform data metric, complex direction pairs.
//! * [`reconstruction`] – Herglotz densities, Fourier transform of the indicator, inversion.
//! * [`stability_lab`] – δ–ρ experiments, rate fits, the Hankel counterexample, CLI.

pub mod error;
pub mod far_field_operator;
pub mod forward_solver;
pub mod geometry;
pub mod reconstruction;
pub mod special_functions;
pub mod stability_lab;

pub use error::{LabError, Result};
