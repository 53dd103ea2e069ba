use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::special_functions::harmonics::{lm_index, num_harmonics, UNIT_TOLERANCE};
use crate::special_functions::{
    build_sphere_quadrature, real_harmonics, real_harmonics_with_gradient, SphereQuadrature,
};

/// Default band limit of radial functions.
pub const DEFAULT_L_GEOM: usize = 16;

/// On-disk form of a surface: `{a0, a1, c0, L_geom, coefficients: [[l, m, value], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub a0: f64,
    pub a1: f64,
    pub c0: f64,
    #[serde(rename = "L_geom")]
    pub l_geom: usize,
    pub coefficients: Vec<(usize, i64, f64)>,
}

/// Star-shaped boundary `r = r(x⁰)` with `r` a real spherical-harmonic series.
///
/// Real basis: `S_l0 = Y_l0`, `S_lm = √2 (-1)^m Re Y_lm` and
/// `S_l,-m = √2 (-1)^m Im Y_lm` for `m > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSurface {
    a0: f64,
    a1: f64,
    c0: f64,
    l_geom: usize,
    coeffs: Vec<f64>,
    /// Highest degree with a nonzero coefficient.
    active_degree: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Surface measure relative to `dS` on the unit sphere.
    pub jacobian: f64,
}

/// Nodes, outward normals and weights of a rule on Γ pulled back from a sphere rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceQuadrature {
    pub directions: Vec<Vector3<f64>>,
    pub points: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    /// Weights of the underlying sphere rule.
    pub sphere_weights: Vec<f64>,
    pub degree: usize,
}

impl SurfaceQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∮ N dS`, zero for a closed surface.
    pub fn normal_integral(&self) -> Vector3<f64> {
        self.normals.iter().zip(&self.weights).map(|(n, w)| n * *w).sum()
    }
}

impl StarSurface {
    /// Builds a surface without checking the class constraints.
    pub fn from_coefficients(
        a0: f64,
        a1: f64,
        c0: f64,
        l_geom: usize,
        coefficients: &[(usize, i64, f64)],
    ) -> Result<Self> {
        if !(a0 > 0.0 && a1 >= a0 && c0 > 0.0) {
            return Err(LabError::Validation(format!(
                "surface bounds must satisfy 0 < a0 <= a1 and c0 > 0 (a0={a0}, a1={a1}, c0={c0})"
            )));
        }
        let mut coeffs = vec![0.0; num_harmonics(l_geom)];
        for &(l, m, v) in coefficients {
            if l > l_geom {
                return Err(LabError::UnsupportedDegree { degree: l, max: l_geom });
            }
            if m.unsigned_abs() as usize > l {
                return Err(LabError::InvalidIndex { degree: l, order: m });
            }
            if !v.is_finite() {
                return Err(LabError::Validation(format!("coefficient ({l},{m}) is not finite")));
            }
            coeffs[lm_index(l, m)] += v;
        }
        let active_degree = (0..=l_geom)
            .rev()
            .find(|&l| (-(l as i64)..=l as i64).any(|m| coeffs[lm_index(l, m)] != 0.0))
            .unwrap_or(0);
        Ok(Self { a0, a1, c0, l_geom, coeffs, active_degree })
    }

    /// Builds a surface and enforces `a0 <= r <= a1` on a fine grid.
    pub fn new(a0: f64, a1: f64, c0: f64, l_geom: usize, coefficients: &[(usize, i64, f64)]) -> Result<Self> {
        let s = Self::from_coefficients(a0, a1, c0, l_geom, coefficients)?;
        let report = s.admissibility_check();
        if !report.annulus_ok {
            return Err(LabError::ClassViolation(format!(
                "radius range [{:.6}, {:.6}] leaves annulus [{}, {}]",
                report.min_radius, report.max_radius, a0, a1
            )));
        }
        Ok(s)
    }

    /// Round sphere with annulus `[r/2, 2r]` and smoothness budget `10 r`.
    pub fn sphere(radius: f64) -> Self {
        Self::new(0.5 * radius, 2.0 * radius, 10.0 * radius, DEFAULT_L_GEOM, &[(0, 0, radius * (4.0 * PI).sqrt())])
            .expect("sphere is admissible")
    }

    /// Sphere of radius `radius` plus `Σ amp · S_lm`, with the sphere's default bounds.
    pub fn perturbed_sphere(radius: f64, perturbation: &[(usize, i64, f64)]) -> Result<Self> {
        let mut coeffs = vec![(0, 0, radius * (4.0 * PI).sqrt())];
        coeffs.extend_from_slice(perturbation);
        Self::new(0.5 * radius, 2.0 * radius, 10.0 * radius, DEFAULT_L_GEOM, &coeffs)
    }

    /// Least-squares fit of a radial function by quadrature projection.
    pub fn fit_radial<F: Fn(&Vector3<f64>) -> f64>(
        radial: F,
        l_geom: usize,
        a0: f64,
        a1: f64,
        c0: f64,
    ) -> Result<Self> {
        let q = build_sphere_quadrature(2 * l_geom + 24)?;
        let mut acc = vec![0.0; num_harmonics(l_geom)];
        for (x, w) in q.nodes.iter().zip(&q.weights) {
            let r = radial(x) * w;
            for (a, s) in acc.iter_mut().zip(real_harmonics(l_geom, x)) {
                *a += r * s;
            }
        }
        let list: Vec<_> = (0..acc.len())
            .map(|k| {
                let idx = crate::special_functions::HarmonicIndex::from_linear(k);
                (idx.degree(), idx.order(), acc[k])
            })
            .collect();
        Self::from_coefficients(a0, a1, c0, l_geom, &list)
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }
    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn l_geom(&self) -> usize {
        self.l_geom
    }
    pub fn active_degree(&self) -> usize {
        self.active_degree
    }

    pub fn coefficient(&self, l: usize, m: i64) -> f64 {
        if l > self.l_geom || m.unsigned_abs() as usize > l {
            return 0.0;
        }
        self.coeffs[lm_index(l, m)]
    }

    /// Nonzero coefficients as `(l, m, value)`.
    pub fn coefficients(&self) -> Vec<(usize, i64, f64)> {
        let mut out = Vec::new();
        for l in 0..=self.l_geom {
            for m in -(l as i64)..=(l as i64) {
                let v = self.coeffs[lm_index(l, m)];
                if v != 0.0 {
                    out.push((l, m, v));
                }
            }
        }
        out
    }

    /// Radius of the surface if it is a round sphere about the origin.
    pub fn sphere_radius(&self) -> Option<f64> {
        if self.active_degree == 0 {
            Some(self.coeffs[0] / (4.0 * PI).sqrt())
        } else {
            None
        }
    }

    /// `self + amplitude · other` (coefficients only; bounds from `self`).
    pub fn add_scaled(&self, other: &[(usize, i64, f64)], amplitude: f64) -> Result<Self> {
        let mut list = self.coefficients();
        list.extend(other.iter().map(|&(l, m, v)| (l, m, v * amplitude)));
        Self::from_coefficients(self.a0, self.a1, self.c0, self.l_geom, &list)
    }

    #[inline]
    pub(crate) fn radius_at(&self, x: &Vector3<f64>) -> f64 {
        if self.active_degree == 0 {
            return self.coeffs[0] / (4.0 * PI).sqrt();
        }
        real_harmonics(self.active_degree, x).iter().zip(&self.coeffs).map(|(s, c)| s * c).sum()
    }

    pub fn eval_radius(&self, x: &Vector3<f64>) -> Result<f64> {
        check_unit(x)?;
        Ok(self.radius_at(x))
    }

    pub(crate) fn point_and_normal_at(&self, x: &Vector3<f64>) -> SurfacePoint {
        if self.active_degree == 0 {
            let r = self.coeffs[0] / (4.0 * PI).sqrt();
            return SurfacePoint { point: x * r, normal: *x, jacobian: r * r };
        }
        let (vals, grads) = real_harmonics_with_gradient(self.active_degree, x);
        let mut r = 0.0;
        let mut g = Vector3::zeros();
        for ((v, gr), c) in vals.iter().zip(&grads).zip(&self.coeffs) {
            r += c * v;
            g += gr * *c;
        }
        let stretch = (r * r + g.norm_squared()).sqrt();
        SurfacePoint { point: x * r, normal: (x * r - g) / stretch, jacobian: r * stretch }
    }

    pub fn surface_point_and_normal(&self, x: &Vector3<f64>) -> Result<SurfacePoint> {
        check_unit(x)?;
        let p = self.point_and_normal_at(x);
        if !(p.jacobian > 0.0) || !p.normal.iter().all(|v| v.is_finite()) {
            return Err(LabError::Numerical(format!("degenerate surface gradient at {x:?}")));
        }
        Ok(p)
    }

    pub fn surface_quadrature(&self, sphere: &SphereQuadrature) -> SurfaceQuadrature {
        let n = sphere.len();
        let mut out = SurfaceQuadrature {
            directions: sphere.nodes.clone(),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            sphere_weights: sphere.weights.clone(),
            degree: sphere.degree,
        };
        for (x, w) in sphere.nodes.iter().zip(&sphere.weights) {
            let p = self.point_and_normal_at(x);
            out.points.push(p.point);
            out.normals.push(p.normal);
            out.weights.push(p.jacobian * w);
        }
        out
    }

    /// Coefficient bound on the C² norm of `r`:
    /// `Σ |c_lm| (1 + l(l+1)) sqrt((2l+1)/4π)`.
    pub fn smoothness_proxy(&self) -> f64 {
        let mut s = 0.0;
        for l in 0..=self.l_geom {
            let lf = l as f64;
            let sup = ((2.0 * lf + 1.0) / (4.0 * PI)).sqrt();
            for m in -(l as i64)..=(l as i64) {
                s += self.coeffs[lm_index(l, m)].abs() * (1.0 + lf * (lf + 1.0)) * sup;
            }
        }
        s
    }

    pub fn admissibility_check(&self) -> AdmissibilityReport {
        let grid = build_sphere_quadrature((4 * self.active_degree).max(48)).expect("degree >= 1");
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in &grid.nodes {
            let r = self.radius_at(x);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        // poles are not quadrature nodes
        for x in [Vector3::z(), -Vector3::z()] {
            let r = self.radius_at(&x);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let proxy = self.smoothness_proxy();
        AdmissibilityReport {
            min_radius: lo,
            max_radius: hi,
            a0: self.a0,
            a1: self.a1,
            positive_ok: lo > 0.0,
            annulus_ok: lo >= self.a0 && hi <= self.a1,
            smoothness_proxy: proxy,
            c0: self.c0,
            smoothness_ok: proxy <= self.c0,
        }
    }

    pub fn to_file(&self) -> SurfaceFile {
        SurfaceFile { a0: self.a0, a1: self.a1, c0: self.c0, l_geom: self.l_geom, coefficients: self.coefficients() }
    }

    pub fn from_file(file: &SurfaceFile) -> Result<Self> {
        Self::from_coefficients(file.a0, file.a1, file.c0, file.l_geom, &file.coefficients)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("surface serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SurfaceFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(&self.to_file()).expect("surface serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn check_unit(x: &Vector3<f64>) -> Result<()> {
    let n = x.norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(LabError::Domain(format!("direction has norm {n}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub min_radius: f64,
    pub max_radius: f64,
    pub a0: f64,
    pub a1: f64,
    pub positive_ok: bool,
    pub annulus_ok: bool,
    pub smoothness_proxy: f64,
    pub c0: f64,
    pub smoothness_ok: bool,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.positive_ok && self.annulus_ok && self.smoothness_ok
    }
}

impl std::fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(f, "positivity : {} (min r = {:.6})", mark(self.positive_ok), self.min_radius)?;
        writeln!(
            f,
            "annulus    : {} (r in [{:.6}, {:.6}], allowed [{}, {}])",
            mark(self.annulus_ok),
            self.min_radius,
            self.max_radius,
            self.a0,
            self.a1
        )?;
        write!(
            f,
            "smoothness : {} (proxy {:.6} vs c0 = {})",
            mark(self.smoothness_ok),
            self.smoothness_proxy,
            self.c0
        )
    }
}
