use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::far_field_operator::ComplexDirectionPair;
use crate::forward_solver::trace::check_variety;
use crate::geometry::{StarSurface, SurfaceQuadrature};
use crate::special_functions::{build_sphere_quadrature, gauss_legendre_interval};

/// `4π (sin ka − ka cos ka) / k³`, the Fourier transform of the ball indicator at `|λ| = k`.
pub fn ball_transform(radius: f64, k: f64) -> f64 {
    let x = k * radius;
    if x < 1e-3 {
        let x2 = x * x;
        return 4.0 * PI * radius.powi(3) / 3.0 * (1.0 - x2 / 10.0 + x2 * x2 / 280.0);
    }
    4.0 * PI * (x.sin() - x * x.cos()) / k.powi(3)
}

/// Radial Gauss–Legendre × sphere rule over the star-shaped interior.
#[derive(Debug, Clone)]
pub struct VolumeQuadrature {
    pub points: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

impl VolumeQuadrature {
    pub fn new(surface: &StarSurface, sphere_degree: usize, radial_nodes: usize) -> Result<Self> {
        let sphere = build_sphere_quadrature(sphere_degree)?;
        let (t, wt) = gauss_legendre_interval(radial_nodes, 0.0, 1.0);
        let mut points = Vec::with_capacity(sphere.len() * radial_nodes);
        let mut weights = Vec::with_capacity(sphere.len() * radial_nodes);
        for (x, w) in sphere.nodes.iter().zip(&sphere.weights) {
            let r = surface.radius_at(x);
            for (s, ws) in t.iter().zip(&wt) {
                let rho = r * s;
                points.push(x * rho);
                weights.push(w * ws * r * rho * rho);
            }
        }
        Ok(Self { points, weights })
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫_D exp(−iλ·x) dx`.
    pub fn transform(&self, lambda: &Vector3<f64>) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| Complex64::new(0.0, -lambda.dot(x)).exp() * *w)
            .sum()
    }
}

/// `i (θ·N_s) exp(iθ·s)` at each node of `quadrature`.
pub fn target_trace(quadrature: &SurfaceQuadrature, theta: &Vector3<Complex64>) -> Result<Vec<Complex64>> {
    check_variety(theta)?;
    Ok(quadrature
        .points
        .iter()
        .zip(&quadrature.normals)
        .map(|(s, n)| {
            let dot_n = theta[0] * n[0] + theta[1] * n[1] + theta[2] * n[2];
            let dot_s = theta[0] * s[0] + theta[1] * s[1] + theta[2] * s[2];
            Complex64::i() * dot_n * (Complex64::i() * dot_s).exp()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `∫_Γ exp(−iθ′·s) ∂_N exp(iθ·s) ds` by surface quadrature.
    pub lhs: Complex64,
    /// `−(|λ|²/2) ∫_D exp(−iλ·x) dx` by volume quadrature.
    pub rhs: Complex64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityQuadrature {
    pub surface_degree: usize,
    pub sphere_degree: usize,
    pub radial_nodes: usize,
}

impl Default for IdentityQuadrature {
    fn default() -> Self {
        Self { surface_degree: 48, sphere_degree: 48, radial_nodes: 24 }
    }
}

pub fn volume_identity_check(surface: &StarSurface, pair: &ComplexDirectionPair, quad: &IdentityQuadrature) -> Result<IdentityReport> {
    let sq = surface.surface_quadrature(&build_sphere_quadrature(quad.surface_degree)?);
    let vq = VolumeQuadrature::new(surface, quad.sphere_degree, quad.radial_nodes)?;
    identity_with(&sq, &vq, pair)
}

/// Same check with prebuilt quadratures.
pub fn identity_with(sq: &SurfaceQuadrature, vq: &VolumeQuadrature, pair: &ComplexDirectionPair) -> Result<IdentityReport> {
    let target = target_trace(sq, &pair.theta)?;
    let tp = &pair.theta_prime;
    let lhs: Complex64 = sq
        .points
        .iter()
        .zip(&sq.weights)
        .zip(&target)
        .map(|((s, w), f)| (-Complex64::i() * (tp[0] * s[0] + tp[1] * s[1] + tp[2] * s[2])).exp() * f * *w)
        .sum();
    let rhs = vq.transform(&pair.lambda) * (-pair.lambda.norm_squared() / 2.0);
    let scale = lhs.norm().max(rhs.norm());
    let discrepancy = if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale };
    Ok(IdentityReport { lhs, rhs, discrepancy })
}
