//! Harmonic analysis of far-field data: coefficients on the sphere, continuation to
//! the complex variety `θ·θ = 1`, the uniform data metric, and complex direction pairs.

mod coefficients;
mod pairs;

pub use coefficients::{
    compute_all_coefficients, compute_coefficients, continue_far_field, delta_metric, ContinuedValue, DeltaMetric, FarFieldCoefficients,
    DEFAULT_L_TRUNC, NOISE_FLOOR_REL,
};
pub use pairs::{make_direction_pair, minimal_imag_scale, ComplexDirectionPair, IMAG_MARGIN};
