use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{DensityOperator, HerglotzDensity};
use super::identity::VolumeQuadrature;
use crate::error::{LabError, Result};
use crate::far_field_operator::{
    compute_all_coefficients, continue_far_field, make_direction_pair, minimal_imag_scale, ComplexDirectionPair,
    FarFieldCoefficients, DEFAULT_L_TRUNC,
};
use crate::forward_solver::trace::check_variety;
use crate::forward_solver::{assemble_with_solver, BieSolver, DirectionGrid, FarFieldMatrix, ForwardConfig};
use crate::geometry::{StarSurface, SurfaceQuadrature};

/// Resolution parameters for oracle-mode reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig {
    pub forward: ForwardConfig,
    /// Exactness degree of the incident-direction rule carrying `ν`.
    pub in_degree: usize,
    /// Truncation degree of the far-field expansion used by the data path.
    pub l_trunc: usize,
    pub volume_sphere_degree: usize,
    pub volume_radial_nodes: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            forward: ForwardConfig::default(),
            in_degree: 24,
            l_trunc: DEFAULT_L_TRUNC,
            volume_sphere_degree: 48,
            volume_radial_nodes: 24,
        }
    }
}

/// Source of `A(θ′, α_j)` in the data path.
#[derive(Debug, Clone)]
pub enum DataPath {
    /// Oracle path only.
    None,
    /// Synthesize a far-field matrix on an exact rule of degree `2·l_trunc` with the same solver.
    Synthesize,
    /// Use a supplied matrix whose incident grid must match the density grid.
    Matrix(Box<FarFieldMatrix>),
}

/// Everything needed to estimate `χ̃_D(λ)` for a known surface.
#[derive(Debug, Clone)]
pub struct OracleSetup {
    pub surface: StarSurface,
    pub config: ReconstructionConfig,
    pub in_grid: DirectionGrid,
    pub operator: DensityOperator,
    /// Per-incident-direction far-field coefficients for the data path.
    pub data: Option<Vec<FarFieldCoefficients>>,
    /// `|D|` by volume quadrature.
    pub volume: f64,
    pub max_solver_residual: f64,
}

impl OracleSetup {
    pub fn new(surface: &StarSurface, config: &ReconstructionConfig, data: DataPath) -> Result<Self> {
        let in_grid = match &data {
            DataPath::Matrix(m) => {
                if m.surface_hash != surface.content_hash() {
                    return Err(LabError::Validation(
                        "far-field data were generated for a different surface".into(),
                    ));
                }
                m.in_grid.clone()
            }
            _ => DirectionGrid::quadrature(config.in_degree)?,
        };
        let solver = BieSolver::new(surface, &config.forward)?;
        let (coeffs, residuals) = solver.solve_coefficients(&in_grid.directions)?;
        let traces = solver.trace_harmonics() * coeffs;
        let quadrature: Arc<SurfaceQuadrature> = Arc::clone(solver.trace_quadrature());
        let operator =
            DensityOperator::from_matrix(quadrature, in_grid.directions.clone(), in_grid.weights.clone(), traces)?;
        let coefficients = match data {
            DataPath::None => None,
            DataPath::Synthesize => {
                let out = DirectionGrid::quadrature(2 * config.l_trunc)?;
                let m = assemble_with_solver(&solver, &surface.content_hash(), &out, &in_grid)?;
                Some(compute_all_coefficients(&m, config.l_trunc)?)
            }
            DataPath::Matrix(m) => Some(compute_all_coefficients(&m, config.l_trunc)?),
        };
        let volume = VolumeQuadrature::new(surface, config.volume_sphere_degree, config.volume_radial_nodes)?.volume();
        Ok(Self {
            surface: surface.clone(),
            config: *config,
            in_grid,
            operator,
            data: coefficients,
            volume,
            max_solver_residual: residuals.iter().fold(0.0, |a: f64, b| a.max(*b)),
        })
    }

    /// Pair with the minimal feasible imaginary scale.
    pub fn pair_for(&self, lambda: &Vector3<f64>) -> Result<ComplexDirectionPair> {
        make_direction_pair(lambda, minimal_imag_scale(lambda))
    }

    pub fn solve_density(&self, pair: &ComplexDirectionPair, epsilon: f64) -> Result<HerglotzDensity> {
        self.operator.solve_density(pair, epsilon)
    }

    /// `A(θ′, α_j)` from the traces: `−(1/4π) Σ_i e^{−iθ′·s_i} u_N(s_i, α_j) w_i`.
    pub fn oracle_far_field(&self, theta_out: &Vector3<Complex64>) -> Result<Vec<Complex64>> {
        check_variety(theta_out)?;
        let q = &self.operator.quadrature;
        let e: Vec<Complex64> = q
            .points
            .iter()
            .zip(&q.weights)
            .map(|(s, w)| {
                let phase = theta_out[0] * s[0] + theta_out[1] * s[1] + theta_out[2] * s[2];
                (-Complex64::i() * phase).exp() * (-w / (4.0 * PI))
            })
            .collect();
        let t = &self.operator.traces;
        Ok((0..t.ncols()).map(|j| t.column(j).iter().zip(&e).map(|(u, ei)| u * ei).sum()).collect())
    }

    /// `‖e^{−iθ′·s}‖_{L²(Γ)}`.
    pub fn exponential_norm(&self, theta_out: &Vector3<Complex64>) -> f64 {
        let q = &self.operator.quadrature;
        q.points
            .iter()
            .zip(&q.weights)
            .map(|(s, w)| {
                let phase = theta_out[0] * s[0] + theta_out[1] * s[1] + theta_out[2] * s[2];
                (-Complex64::i() * phase).exp().norm_sqr() * w
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Estimate of `χ̃_D(λ)` from a density, by both paths when data are available.
    pub fn spectral_estimate(&self, density: &HerglotzDensity) -> Result<SpectralEstimate> {
        let pair = &density.pair;
        let lam2 = pair.lambda.norm_squared();
        if lam2 == 0.0 {
            return Err(LabError::DegenerateFrequency);
        }
        if density.alphas != self.in_grid.directions {
            return Err(LabError::GridMismatch("density lives on a different incident grid".into()));
        }
        let denom = -lam2 / 2.0;
        let combine = |a: &[Complex64]| -> Complex64 {
            let s: Complex64 = a.iter().zip(&density.values).zip(&density.weights).map(|((a, v), w)| a * v * *w).sum();
            -4.0 * PI * s / denom
        };
        let oracle = combine(&self.oracle_far_field(&pair.theta_prime)?);
        let oracle_bound = self.exponential_norm(&pair.theta_prime) * density.residual / (lam2 / 2.0);
        let (data, data_bound, warning) = match &self.data {
            None => (None, None, false),
            Some(coeffs) => {
                let mut values = Vec::with_capacity(coeffs.len());
                let mut bound = 0.0;
                let mut warning = false;
                for ((c, v), w) in coeffs.iter().zip(&density.values).zip(&density.weights) {
                    let cv = continue_far_field(c, &pair.theta_prime)?;
                    values.push(cv.value);
                    bound += cv.bound * v.norm() * w;
                    warning |= cv.warning;
                }
                (Some(combine(&values)), Some(4.0 * PI * bound / (lam2 / 2.0)), warning)
            }
        };
        Ok(SpectralEstimate {
            lambda: pair.lambda,
            oracle,
            oracle_bound,
            data,
            data_bound,
            path_discrepancy: data.map(|d| (d - oracle).norm()),
            continuation_warning: warning,
            residual: density.residual,
            unattainable: density.unattainable,
        })
    }

    /// Pair, density and estimate in one call.
    pub fn estimate(&self, lambda: &Vector3<f64>, epsilon: f64) -> Result<SpectralEstimate> {
        let pair = self.pair_for(lambda)?;
        let density = self.solve_density(&pair, epsilon)?;
        self.spectral_estimate(&density)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Realized frequency.
    pub lambda: Vector3<f64>,
    /// `A(θ′, α_j)` integrated from the traces.
    pub oracle: Complex64,
    /// `‖e^{−iθ′·s}‖_{L²(Γ)} · residual / (|λ|²/2)`.
    pub oracle_bound: f64,
    /// `A(θ′, α_j)` by continuation of far-field data.
    pub data: Option<Complex64>,
    /// Continuation bounds propagated through the density.
    pub data_bound: Option<f64>,
    pub path_discrepancy: Option<f64>,
    pub continuation_warning: bool,
    pub residual: f64,
    pub unattainable: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruction::identity::ball_transform;
    use std::sync::OnceLock;

    fn cfg() -> ReconstructionConfig {
        ReconstructionConfig { forward: ForwardConfig::with_degree(10), in_degree: 16, l_trunc: 16, ..Default::default() }
    }

    fn ball() -> &'static OracleSetup {
        static SETUP: OnceLock<OracleSetup> = OnceLock::new();
        SETUP.get_or_init(|| OracleSetup::new(&StarSurface::sphere(1.0), &cfg(), DataPath::Synthesize).unwrap())
    }

    #[test]
    fn ball_at_unit_frequency() {
        let s = ball();
        assert!((s.volume - 4.0 * PI / 3.0).abs() < 1e-12);
        let lam = Vector3::new(0.0, 0.6, 0.8);
        let exact = ball_transform(1.0, 1.0);
        let mut errors = Vec::new();
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let e = s.estimate(&lam, eps).unwrap();
            let err = (e.oracle - exact).norm();
            assert!(err <= e.oracle_bound * (1.0 + 1e-6) + 1e-8, "eps {eps}: {err} > {}", e.oracle_bound);
            assert!(e.path_discrepancy.unwrap() <= e.data_bound.unwrap().max(1e-9));
            errors.push(err);
        }
        assert!(errors[3] < 0.01 * exact, "{errors:?}");
    }

    #[test]
    fn complex_pair_beyond_real_regime() {
        let s = ball();
        let lam = Vector3::new(1.5, -1.5, 1.5);
        let e = s.estimate(&lam, 1e-4).unwrap();
        let exact = ball_transform(1.0, lam.norm());
        assert!((e.oracle - exact).norm() < 0.02 * exact.abs(), "{e:?} vs {exact}");
        assert!(e.oracle.im.abs() < 1e-3 * exact.abs());
    }

    #[test]
    fn sign_change_across_transform_zero() {
        // the ball transform vanishes at |λ| ≈ 4.4934 (tan x = x) and changes sign there
        let s = OracleSetup::new(&StarSurface::sphere(1.0), &ReconstructionConfig::default(), DataPath::None).unwrap();
        let dir = Vector3::new(0.36, 0.48, 0.8);
        let below = s.estimate(&(dir * 4.4), 1e-4).unwrap();
        let above = s.estimate(&(dir * 4.6), 1e-4).unwrap();
        assert!(ball_transform(1.0, 4.4) > 0.0 && ball_transform(1.0, 4.6) < 0.0);
        assert!(below.oracle.re > 0.0 && above.oracle.re < 0.0, "{below:?} {above:?}");
        for (e, k) in [(&below, 4.4), (&above, 4.6)] {
            let err = (e.oracle - ball_transform(1.0, k)).norm();
            assert!(err <= e.oracle_bound * (1.0 + 1e-6) + 1e-8, "{e:?}");
        }
    }

    #[test]
    fn degenerate_frequency_and_grid_checks() {
        let s = ball();
        let pair = make_direction_pair(&Vector3::zeros(), 0.0).unwrap();
        let d = s.solve_density(&pair, 1e-2).unwrap();
        assert!(matches!(s.spectral_estimate(&d), Err(LabError::DegenerateFrequency)));
        let mut other = d.clone();
        other.pair = make_direction_pair(&Vector3::new(0.5, 0.0, 0.0), 0.0).unwrap();
        other.alphas[0] = -other.alphas[0];
        assert!(matches!(s.spectral_estimate(&other), Err(LabError::GridMismatch(_))));
    }

    #[test]
    fn data_from_foreign_surface_is_rejected() {
        let out = DirectionGrid::quadrature(4).unwrap();
        let m = crate::forward_solver::mie_far_field_matrix(2.0, &out, &DirectionGrid::cube26()).unwrap();
        let r = OracleSetup::new(&StarSurface::sphere(1.0), &cfg(), DataPath::Matrix(Box::new(m)));
        assert!(matches!(r, Err(LabError::Validation(_))));
    }
}
