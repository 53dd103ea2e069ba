use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::tangent_frame;

/// Margin added to the minimal feasible imaginary scale when `|λ| > 2`.
pub const IMAG_MARGIN: f64 = 0.1;

/// `θ, θ′` on the variety with `θ′ − θ = λ` and `Im θ = Im θ′ = t ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexDirectionPair {
    pub theta: Vector3<Complex64>,
    pub theta_prime: Vector3<Complex64>,
    /// Frequency actually realized; equals the request up to one rounding of `λ/2`.
    pub lambda: Vector3<f64>,
    pub t: f64,
    pub eta: Vector3<f64>,
    pub zeta: Vector3<f64>,
}

/// Power of two `q` such that sums of multiples of `q` bounded by `m` are exact.
fn dyadic_quantum(m: f64) -> f64 {
    let e = (2.0 * m.max(1.0)).log2().ceil() as i32;
    2f64.powi(e - 53)
}

fn quantize(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

/// `0` for `|λ| ≤ 2`, otherwise `sqrt(|λ|²/4 − 1) + IMAG_MARGIN`.
pub fn minimal_imag_scale(lambda: &Vector3<f64>) -> f64 {
    let n = lambda.norm();
    if n <= 2.0 {
        0.0
    } else {
        (n * n / 4.0 - 1.0).sqrt() + IMAG_MARGIN
    }
}

/// `θ = −λ/2 + aη + itζ`, `θ′ = λ/2 + aη + itζ`, `a = sqrt(1 + t² − |λ|²/4)`.
pub fn make_direction_pair(lambda: &Vector3<f64>, t: f64) -> Result<ComplexDirectionPair> {
    if !(t >= 0.0) || !t.is_finite() || !lambda.iter().all(|v| v.is_finite()) {
        return Err(LabError::Validation(format!("invalid pair request λ = {lambda:?}, t = {t}")));
    }
    let deficit = 1.0 + t * t - lambda.norm_squared() / 4.0;
    if deficit < 0.0 {
        return Err(LabError::InfeasiblePair { deficit });
    }
    // real parts on a common dyadic grid make θ′ − θ exact in floating point
    let q = dyadic_quantum(0.5 * lambda.abs().max() + deficit.sqrt() + 1.0);
    let half = lambda.map(|v| quantize(0.5 * v, q));
    let lam = half * 2.0;
    let a = (1.0 + t * t - lam.norm_squared() / 4.0).max(0.0).sqrt();
    let axis = if lam.norm() > 0.0 { lam.normalize() } else { Vector3::z() };
    let (eta, zeta) = tangent_frame(&axis);
    let centre = (eta * a).map(|v| quantize(v, q));
    let im = zeta * t;
    let theta = Vector3::from_fn(|k, _| Complex64::new(centre[k] - half[k], im[k]));
    let theta_prime = Vector3::from_fn(|k, _| Complex64::new(centre[k] + half[k], im[k]));
    Ok(ComplexDirectionPair { theta, theta_prime, lambda: lam, t, eta, zeta })
}
