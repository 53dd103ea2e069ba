use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}

/// Product rule on S²: Gauss–Legendre in `cos θ` times the trapezoid rule in `φ`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SphereQuadrature {
    pub nodes: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    /// Spherical polynomials up to this degree are integrated exactly.
    pub degree: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&Vector3<f64>) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| f(x) * w).sum()
    }
}

/// Builds a rule exact for spherical polynomials of degree `<= degree`.
///
/// The azimuthal count is rounded up to an even number so the node set is
/// closed under `x -> -x`.
pub fn build_sphere_quadrature(degree: usize) -> Result<SphereQuadrature> {
    if degree < 1 {
        return Err(LabError::Domain("sphere quadrature degree must be >= 1".into()));
    }
    let n_theta = degree / 2 + 1;
    let mut n_phi = degree + 1;
    if n_phi % 2 == 1 {
        n_phi += 1;
    }
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (c, w) in ct.iter().zip(&wt) {
        let s = (1.0 - c * c).sqrt();
        for k in 0..n_phi {
            let phi = k as f64 * dphi;
            nodes.push(Vector3::new(s * phi.cos(), s * phi.sin(), *c));
            weights.push(w * dphi);
        }
    }
    Ok(SphereQuadrature { nodes, weights, degree, n_theta, n_phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::harmonics::{sph_harmonic, HarmonicIndex};

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        for p in 0..14 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| x.powi(p) * w).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "p = {p}");
        }
        let (x1, w1) = gauss_legendre(1);
        assert_eq!(x1, vec![0.0]);
        assert!((w1[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        for d in [1, 2, 5, 17, 80] {
            let q = build_sphere_quadrature(d).unwrap();
            let s: f64 = q.weights.iter().sum();
            assert!((s - 4.0 * PI).abs() < 1e-13, "degree {d}");
            for x in &q.nodes {
                assert!((x.norm() - 1.0).abs() < 1e-14);
            }
            assert!(q.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn harmonic_y32_integrates_to_zero() {
        let q = build_sphere_quadrature(6).unwrap();
        let idx = HarmonicIndex::new(3, 2).unwrap();
        let (mut re, mut im) = (0.0, 0.0);
        for (x, w) in q.nodes.iter().zip(&q.weights) {
            let y = sph_harmonic(idx, x).unwrap();
            re += y.re * w;
            im += y.im * w;
        }
        assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
    }

    #[test]
    fn second_moment() {
        let q = build_sphere_quadrature(2).unwrap();
        let s = q.integrate(|x| x[2] * x[2]);
        assert!((s - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn antipodal_closure() {
        let q = build_sphere_quadrature(9).unwrap();
        for x in &q.nodes {
            assert!(q.nodes.iter().any(|y| (x + y).norm() < 1e-14));
        }
    }

    #[test]
    fn zero_degree_is_rejected() {
        assert!(build_sphere_quadrature(0).is_err());
    }
}
