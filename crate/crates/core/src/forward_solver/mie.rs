//! Partial-wave series for the sound-soft ball at `k = 1`.

use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;

use super::trace::{check_variety, ScatteringSolutionTrace};
use crate::error::{LabError, Result};
use crate::geometry::StarSurface;
use crate::special_functions::bessel::MAX_BESSEL_ORDER;
use crate::special_functions::{build_sphere_quadrature, spherical_bessel_j_all, spherical_hankel_h1_all};

const SERIES_CUTOFF: f64 = 1e-16;

/// Legendre polynomials `P_0 .. P_lmax` at a (possibly complex) argument.
pub fn legendre_all(lmax: usize, z: Complex64) -> Vec<Complex64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(Complex64::new(1.0, 0.0));
    if lmax >= 1 {
        p.push(z);
    }
    for l in 1..lmax {
        let lf = l as f64;
        let next = (z * p[l] * (2.0 * lf + 1.0) - p[l - 1] * lf) / (lf + 1.0);
        p.push(next);
    }
    p
}

fn check_radius(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(LabError::Domain(format!("sphere radius must be positive, got {a}")));
    }
    Ok(())
}

/// Series order needed at radius `a`: terms beyond are below `1e-16` relative.
fn series_order(a: f64) -> usize {
    ((a + 12.0 * a.cbrt() + 16.0).ceil() as usize).min(MAX_BESSEL_ORDER - 1)
}

/// Far-field partial-wave weights `i (2l+1) j_l(a)/h_l(a)`, truncated.
pub fn mie_far_field_weights(a: f64) -> Result<Vec<Complex64>> {
    check_radius(a)?;
    let lmax = series_order(a);
    let j = spherical_bessel_j_all(lmax, a)?;
    let h = spherical_hankel_h1_all(lmax, a)?;
    let mut out: Vec<Complex64> = (0..=lmax)
        .map(|l| Complex64::i() * (2 * l + 1) as f64 * j[l] / h[l])
        .collect();
    let peak = out.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    while out.len() > 1 && out.last().unwrap().norm() < SERIES_CUTOFF * peak {
        out.pop();
    }
    Ok(out)
}

/// `u_N` partial-wave weights `−(i/a²) i^l (2l+1) / h_l(a)`, truncated.
pub fn mie_trace_weights(a: f64) -> Result<Vec<Complex64>> {
    check_radius(a)?;
    let lmax = series_order(a);
    let h = spherical_hankel_h1_all(lmax, a)?;
    let mut il = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(lmax + 1);
    for (l, hl) in h.iter().enumerate() {
        out.push(-Complex64::i() / (a * a) * il * (2 * l + 1) as f64 / hl);
        il *= Complex64::i();
    }
    let peak = out.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    while out.len() > 1 && out.last().unwrap().norm() < SERIES_CUTOFF * peak {
        out.pop();
    }
    Ok(out)
}

fn sum_series(weights: &[Complex64], z: Complex64) -> Complex64 {
    let p = legendre_all(weights.len() - 1, z);
    weights.iter().zip(&p).map(|(w, p)| w * p).sum()
}

/// `A(α′, α)` for the sound-soft ball of radius `a`.
pub fn mie_far_field(a: f64, alpha_out: &Vector3<f64>, alpha_in: &Vector3<f64>) -> Result<Complex64> {
    let w = mie_far_field_weights(a)?;
    Ok(sum_series(&w, Complex64::new(alpha_out.dot(alpha_in), 0.0)))
}

/// `A(θ′, α)` with `θ′` on the complex variety (the series is a polynomial in `θ′·α`).
pub fn mie_far_field_complex(a: f64, theta_out: &Vector3<Complex64>, alpha_in: &Vector3<f64>) -> Result<Complex64> {
    check_variety(theta_out)?;
    let w = mie_far_field_weights(a)?;
    let z = theta_out[0] * alpha_in[0] + theta_out[1] * alpha_in[1] + theta_out[2] * alpha_in[2];
    Ok(sum_series(&w, z))
}

/// `u_N(s, α)` on a sphere-quadrature of degree `degree` over the ball of radius `a`.
pub fn mie_un_trace(a: f64, alpha: &Vector3<f64>, degree: usize) -> Result<ScatteringSolutionTrace> {
    let w = mie_trace_weights(a)?;
    let surface = StarSurface::sphere(a);
    let quadrature = Arc::new(surface.surface_quadrature(&build_sphere_quadrature(degree)?));
    let un_values = quadrature
        .directions
        .iter()
        .map(|x| sum_series(&w, Complex64::new(x.dot(alpha), 0.0)))
        .collect();
    Ok(ScatteringSolutionTrace { quadrature, alpha: *alpha, un_values, wavenumber: 1.0, residual: 0.0 })
}
