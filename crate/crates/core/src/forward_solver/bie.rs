//! Spectral Galerkin discretization of the direct combined-field equation
//!
//! `(½ + K′ − iη S) u_N = ∂_N u^i − iη u^i` on Γ,
//!
//! with `u_N ∘ q` expanded in `Y_lm` on the parameter sphere. Weakly singular
//! integrals use a polar grid rotated onto each target node, where the `sin θ`
//! factor cancels the `1/R` singularity.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trace::ScatteringSolutionTrace;
use crate::error::{LabError, Result};
use crate::geometry::{tangent_frame, StarSurface, SurfaceQuadrature};
use crate::special_functions::{build_sphere_quadrature, gauss_legendre_interval, harmonics_real_into, num_harmonics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardConfig {
    /// Harmonic degree of the unknown.
    pub degree: usize,
    /// Degree of the sphere rule carrying Galerkin inner products (0 = `2L + 8`).
    pub galerkin_degree: usize,
    /// Gauss–Legendre nodes in the polar angle of the singular rule (0 = `L + 20`).
    pub polar_theta: usize,
    /// Trapezoid nodes in the azimuth of the singular rule (0 = `2L + 16`).
    pub polar_phi: usize,
    /// Degree of the rule on which traces are returned (0 = `2L + 32`).
    pub trace_degree: usize,
    /// Coupling parameter of the combined-field equation.
    pub eta: f64,
    /// Maximum relative residual of the discrete system.
    pub tolerance: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self { degree: 16, galerkin_degree: 0, polar_theta: 0, polar_phi: 0, trace_degree: 0, eta: 1.0, tolerance: 1e-10 }
    }
}

impl ForwardConfig {
    pub fn with_degree(degree: usize) -> Self {
        Self { degree, ..Self::default() }
    }

    /// Copy with every `0 = auto` field replaced by its value.
    pub fn resolved(&self) -> Self {
        let l = self.degree;
        let pick = |v: usize, auto: usize| if v == 0 { auto } else { v };
        Self {
            galerkin_degree: pick(self.galerkin_degree, 2 * l + 8),
            polar_theta: pick(self.polar_theta, l + 20),
            polar_phi: pick(self.polar_phi, 2 * l + 16),
            trace_degree: pick(self.trace_degree, 2 * l + 32),
            ..*self
        }
    }

    /// Doubled harmonic degree with the auto-derived grids of that degree.
    pub fn refined(&self) -> Self {
        Self { degree: 2 * self.degree, eta: self.eta, tolerance: self.tolerance, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let l = self.degree;
        if l == 0 {
            return Err(LabError::Resolution("harmonic degree must be positive".into()));
        }
        if self.galerkin_degree < 2 * l {
            return Err(LabError::Resolution(format!(
                "galerkin degree {} below 2L = {}",
                self.galerkin_degree,
                2 * l
            )));
        }
        if self.polar_theta < l + 2 || self.polar_phi < 2 * l + 2 {
            return Err(LabError::Resolution(format!(
                "polar grid {}x{} too coarse for degree {l}",
                self.polar_theta, self.polar_phi
            )));
        }
        if self.trace_degree < l {
            return Err(LabError::Resolution(format!("trace degree {} below L = {l}", self.trace_degree)));
        }
        if !(self.eta.is_finite() && self.eta != 0.0) {
            return Err(LabError::Validation(format!("coupling parameter must be nonzero, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Factorized Galerkin system for one surface; solves any number of incident directions.
pub struct BieSolver {
    config: ForwardConfig,
    galerkin: DMatrix<Complex64>,
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    base: SurfaceQuadrature,
    /// `conj(Y_lm(x_i)) w_i`, harmonics by rows.
    projector: DMatrix<Complex64>,
    trace_quadrature: Arc<SurfaceQuadrature>,
    trace_harmonics: DMatrix<Complex64>,
}

struct PolarRule {
    local: Vec<Vector3<f64>>,
    weights: Vec<f64>,
}

fn polar_rule(n_theta: usize, n_phi: usize) -> PolarRule {
    let (th, wt) = gauss_legendre_interval(n_theta, 0.0, PI);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut local = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (t, w) in th.iter().zip(&wt) {
        let (st, ct) = t.sin_cos();
        for k in 0..n_phi {
            let (sp, cp) = (k as f64 * dphi).sin_cos();
            local.push(Vector3::new(st * cp, st * sp, ct));
            weights.push(w * st * dphi);
        }
    }
    PolarRule { local, weights }
}

impl BieSolver {
    pub fn new(surface: &StarSurface, config: &ForwardConfig) -> Result<Self> {
        let config = config.resolved();
        config.validate()?;
        let report = surface.admissibility_check();
        if !report.positive_ok || !report.annulus_ok {
            return Err(LabError::ClassViolation(report.to_string()));
        }
        let l = config.degree;
        let nh = num_harmonics(l);
        let base = surface.surface_quadrature(&build_sphere_quadrature(config.galerkin_degree)?);
        let polar = polar_rule(config.polar_theta, config.polar_phi);
        let eta = config.eta;

        let rows: Vec<Vec<Complex64>> = (0..base.len())
            .into_par_iter()
            .map(|i| {
                let xhat = base.directions[i];
                let x = base.points[i];
                let nx = base.normals[i];
                let (e1, e2) = tangent_frame(&xhat);
                let mut row = vec![Complex64::new(0.0, 0.0); nh];
                let mut y = vec![Complex64::new(0.0, 0.0); nh];
                harmonics_real_into(l, &xhat, &mut y);
                for (r, v) in row.iter_mut().zip(&y) {
                    *r = v * 0.5;
                }
                for (p, w) in polar.local.iter().zip(&polar.weights) {
                    let yhat = (e1 * p[0] + e2 * p[1] + xhat * p[2]).normalize();
                    let sp = surface.point_and_normal_at(&yhat);
                    let d = x - sp.point;
                    let r = d.norm();
                    let green = Complex64::new(0.0, r).exp() / (4.0 * PI * r);
                    let dlp = green * Complex64::new(-1.0, r) * (nx.dot(&d) / (r * r));
                    let kernel = (dlp - Complex64::i() * eta * green) * (w * sp.jacobian);
                    harmonics_real_into(l, &yhat, &mut y);
                    for (acc, v) in row.iter_mut().zip(&y) {
                        *acc += kernel * v;
                    }
                }
                row
            })
            .collect();
        let n = base.len();
        let b = DMatrix::from_fn(n, nh, |i, j| rows[i][j]);
        let mut projector = DMatrix::zeros(nh, n);
        let mut y = vec![Complex64::new(0.0, 0.0); nh];
        for i in 0..n {
            harmonics_real_into(l, &base.directions[i], &mut y);
            for j in 0..nh {
                projector[(j, i)] = y[j].conj() * base.sphere_weights[i];
            }
        }
        let galerkin = &projector * &b;
        if galerkin.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(LabError::Resolution("non-finite entries in the Galerkin matrix".into()));
        }
        let lu = galerkin.clone().lu();

        let trace_quadrature = Arc::new(surface.surface_quadrature(&build_sphere_quadrature(config.trace_degree)?));
        let mut trace_harmonics = DMatrix::zeros(trace_quadrature.len(), nh);
        for (i, d) in trace_quadrature.directions.iter().enumerate() {
            harmonics_real_into(l, d, &mut y);
            for j in 0..nh {
                trace_harmonics[(i, j)] = y[j];
            }
        }
        Ok(Self { config, galerkin, lu, base, projector, trace_quadrature, trace_harmonics })
    }

    pub fn config(&self) -> &ForwardConfig {
        &self.config
    }

    pub fn trace_quadrature(&self) -> &Arc<SurfaceQuadrature> {
        &self.trace_quadrature
    }

    /// `Y_lm` at the trace nodes, one row per node.
    pub fn trace_harmonics(&self) -> &DMatrix<Complex64> {
        &self.trace_harmonics
    }

    /// Galerkin coefficients of `u_N ∘ q` for each incident direction (one column each).
    pub fn solve_coefficients(&self, alphas: &[Vector3<f64>]) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
        let n = self.base.len();
        let eta = self.config.eta;
        let rhs_nodes = DMatrix::from_fn(n, alphas.len(), |i, q| {
            let alpha = &alphas[q];
            let inc = Complex64::new(0.0, alpha.dot(&self.base.points[i])).exp();
            Complex64::i() * alpha.dot(&self.base.normals[i]) * inc - Complex64::i() * eta * inc
        });
        let rhs = &self.projector * rhs_nodes;
        let coeffs = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| LabError::Numerical("singular Galerkin matrix".into()))?;
        let resid = &self.galerkin * &coeffs - &rhs;
        let mut residuals = Vec::with_capacity(alphas.len());
        for q in 0..alphas.len() {
            let r = resid.column(q).norm() / rhs.column(q).norm().max(f64::MIN_POSITIVE);
            if !(r <= self.config.tolerance) {
                return Err(LabError::IncidentDirection {
                    index: q,
                    source: Box::new(LabError::NonConvergence { residual: r, tolerance: self.config.tolerance }),
                });
            }
            residuals.push(r);
        }
        Ok((coeffs, residuals))
    }

    pub fn solve_many(&self, alphas: &[Vector3<f64>]) -> Result<Vec<ScatteringSolutionTrace>> {
        let (coeffs, residuals) = self.solve_coefficients(alphas)?;
        let values = &self.trace_harmonics * coeffs;
        Ok(alphas
            .iter()
            .enumerate()
            .map(|(q, alpha)| ScatteringSolutionTrace {
                quadrature: Arc::clone(&self.trace_quadrature),
                alpha: *alpha,
                un_values: values.column(q).iter().copied().collect(),
                wavenumber: 1.0,
                residual: residuals[q],
            })
            .collect())
    }

    pub fn solve(&self, alpha: &Vector3<f64>) -> Result<ScatteringSolutionTrace> {
        check_direction(alpha)?;
        Ok(self.solve_many(std::slice::from_ref(alpha))?.remove(0))
    }
}

pub(crate) fn check_direction(alpha: &Vector3<f64>) -> Result<()> {
    if (alpha.norm() - 1.0).abs() > 1e-10 {
        return Err(LabError::Domain(format!("incident direction has norm {}", alpha.norm())));
    }
    Ok(())
}

/// One-shot solve: builds and factorizes the system, then solves for `alpha`.
pub fn bie_solve(surface: &StarSurface, alpha: &Vector3<f64>, config: &ForwardConfig) -> Result<ScatteringSolutionTrace> {
    BieSolver::new(surface, config)?.solve(alpha)
}
