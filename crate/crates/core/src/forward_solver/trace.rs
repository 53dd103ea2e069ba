use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::geometry::SurfaceQuadrature;
use crate::special_functions::{bilinear_dot, build_sphere_quadrature};

/// Tolerance on `|θ·θ − 1|` for points of the complex variety.
pub const VARIETY_TOLERANCE: f64 = 1e-10;

/// Normal derivative `u_N(s, α)` of the total field on a surface quadrature.
#[derive(Debug, Clone)]
pub struct ScatteringSolutionTrace {
    pub quadrature: Arc<SurfaceQuadrature>,
    pub alpha: Vector3<f64>,
    pub un_values: Vec<Complex64>,
    pub wavenumber: f64,
    /// Relative residual of the discrete system (zero for series traces).
    pub residual: f64,
}

/// Errors unless `θ·θ = 1` within [`VARIETY_TOLERANCE`] (scaled by `‖θ‖²`).
pub fn check_variety(theta: &Vector3<Complex64>) -> Result<()> {
    let residual = (bilinear_dot(theta, theta) - 1.0).norm();
    let scale = theta.iter().map(|c| c.norm_sqr()).sum::<f64>().max(1.0);
    if residual > VARIETY_TOLERANCE * scale {
        return Err(LabError::OffVariety { residual });
    }
    Ok(())
}

/// Real vector as a complex one.
pub fn complexify(x: &Vector3<f64>) -> Vector3<Complex64> {
    x.map(|v| Complex64::new(v, 0.0))
}

/// `A(θ′, α) = −(1/4π) Σ_i exp(−iθ′·s_i) u_N(s_i) w_i` for `θ′` on the variety.
pub fn far_field_from_trace(trace: &ScatteringSolutionTrace, theta_out: &Vector3<Complex64>) -> Result<Complex64> {
    check_variety(theta_out)?;
    let q = &trace.quadrature;
    let mut acc = Complex64::new(0.0, 0.0);
    for ((s, w), un) in q.points.iter().zip(&q.weights).zip(&trace.un_values) {
        let phase = theta_out[0] * s[0] + theta_out[1] * s[1] + theta_out[2] * s[2];
        acc += (-Complex64::i() * phase).exp() * un * *w;
    }
    Ok(-acc / (4.0 * PI))
}

/// Real observation direction; same code path as the complex one.
pub fn far_field_real(trace: &ScatteringSolutionTrace, alpha_out: &Vector3<f64>) -> Result<Complex64> {
    far_field_from_trace(trace, &complexify(alpha_out))
}

/// `|Im A(α,α) − (1/4π) ∫ |A(α′,α)|² dα′|`, integrated with a rule of degree `degree`.
pub fn optical_theorem_residual(trace: &ScatteringSolutionTrace, degree: usize) -> Result<f64> {
    let grid = build_sphere_quadrature(degree)?;
    let mut energy = 0.0;
    for (x, w) in grid.nodes.iter().zip(&grid.weights) {
        energy += far_field_real(trace, x)?.norm_sqr() * w;
    }
    let forward = far_field_real(trace, &trace.alpha)?;
    Ok((forward.im - energy / (4.0 * PI)).abs())
}
