use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ratefit::rate_variable;
use crate::error::{LabError, Result};
use crate::far_field_operator::delta_metric;
use crate::forward_solver::{assemble_far_field_matrix, mie_far_field_matrix, DirectionGrid, FarFieldMatrix, ForwardConfig};
use crate::geometry::{hausdorff_distance, HausdorffConfig, StarSurface, SurfaceFile};

/// How the second obstacle of each pair is generated from the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Concentric sphere of radius `r + amplitude`; far fields from the series solution.
    Radius,
    /// `r + amplitude · Σ c_lm S_lm`; far fields from the boundary integral solver.
    Coefficients { coefficients: Vec<(usize, i64, f64)> },
    /// Records `δ = amplitude`, `ρ = c₁ (ln|ln δ|/|ln δ|)^{c₂}` with no physics.
    SyntheticLaw { c1: f64, c2: f64 },
}

/// Observation and incidence grids; degree 0 selects the 26-direction cube grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub out_degree: usize,
    pub in_degree: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { out_degree: 0, in_degree: 0 }
    }
}

impl GridSpec {
    fn grid(degree: usize) -> Result<DirectionGrid> {
        if degree == 0 {
            Ok(DirectionGrid::cube26())
        } else {
            DirectionGrid::quadrature(degree)
        }
    }

    pub fn grids(&self) -> Result<(DirectionGrid, DirectionGrid)> {
        Ok((Self::grid(self.out_degree)?, Self::grid(self.in_degree)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// A record is trustworthy when its solver tolerance is at most `δ / trust_factor`.
    pub trust_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { trust_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_base")]
    pub base_surface: SurfaceFile,
    pub perturbation: Perturbation,
    /// Strictly decreasing.
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub grids: GridSpec,
    #[serde(default)]
    pub forward: ForwardConfig,
    #[serde(default)]
    pub hausdorff: HausdorffConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_base() -> SurfaceFile {
    StarSurface::sphere(1.0).to_file()
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() {
            return Err(LabError::Validation("experiment has no amplitudes".into()));
        }
        if self.amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(LabError::Validation("amplitudes must be finite and non-negative".into()));
        }
        if self.amplitudes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::Validation("amplitudes must be strictly decreasing".into()));
        }
        if !(self.tolerances.trust_factor >= 1.0) {
            return Err(LabError::Validation("trust factor must be at least 1".into()));
        }
        if let Perturbation::SyntheticLaw { c1, c2 } = self.perturbation {
            if !(c1 > 0.0 && c2.is_finite()) {
                return Err(LabError::Validation("synthetic law needs c1 > 0 and finite c2".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub amplitude: f64,
    pub delta: Option<f64>,
    pub rho_one_sided: Option<f64>,
    pub rho_symmetric: Option<f64>,
    /// Estimated far-field error of the forward computations.
    pub solver_tolerance: f64,
    pub trustworthy: bool,
    /// Reason a record was skipped or flagged.
    pub note: Option<String>,
}

impl StabilityRecord {
    /// Record with prescribed values and zero solver error.
    pub fn synthetic(amplitude: f64, delta: f64, rho: f64) -> Self {
        Self {
            amplitude,
            delta: Some(delta),
            rho_one_sided: Some(rho),
            rho_symmetric: Some(rho),
            solver_tolerance: 0.0,
            trustworthy: true,
            note: None,
        }
    }

    fn skipped(amplitude: f64, reason: String) -> Self {
        Self {
            amplitude,
            delta: None,
            rho_one_sided: None,
            rho_symmetric: None,
            solver_tolerance: 0.0,
            trustworthy: false,
            note: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityExperiment {
    pub spec: ExperimentSpec,
    pub records: Vec<StabilityRecord>,
}

fn matrix_scale(m: &FarFieldMatrix) -> f64 {
    m.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Far-field error estimate: difference to a solve four harmonic degrees coarser.
fn bie_error_estimate(surface: &StarSurface, spec: &ExperimentSpec, fine: &FarFieldMatrix) -> Result<f64> {
    let coarse_cfg = ForwardConfig { degree: spec.forward.degree.saturating_sub(4).max(4), ..ForwardConfig::default() };
    let coarse_cfg = ForwardConfig { eta: spec.forward.eta, tolerance: spec.forward.tolerance, ..coarse_cfg };
    let coarse = assemble_far_field_matrix(surface, &fine.out_grid, &fine.in_grid, &coarse_cfg)?;
    Ok(delta_metric(fine, &coarse)?.value.max(fine.diagnostics.max_solver_residual * matrix_scale(fine)))
}

pub fn run_pair_family(spec: &ExperimentSpec) -> Result<StabilityExperiment> {
    spec.validate()?;
    let base = StarSurface::from_file(&spec.base_surface)?;
    let records = match &spec.perturbation {
        Perturbation::SyntheticLaw { c1, c2 } => spec
            .amplitudes
            .iter()
            .map(|&d| match rate_variable(d) {
                Ok(x) => StabilityRecord::synthetic(d, d, c1 * x.powf(*c2)),
                Err(e) => StabilityRecord::skipped(d, e.to_string()),
            })
            .collect(),
        Perturbation::Radius => {
            let r0 = base
                .sphere_radius()
                .ok_or_else(|| LabError::Validation("radius family needs a spherical base surface".into()))?;
            let (out, inc) = spec.grids.grids()?;
            let m0 = mie_far_field_matrix(r0, &out, &inc)?;
            spec.amplitudes
                .par_iter()
                .map(|&h| {
                    let other = StarSurface::sphere(r0 + h);
                    let m1 = mie_far_field_matrix(r0 + h, &out, &inc)?;
                    let tol = 1e-15 * matrix_scale(&m0).max(matrix_scale(&m1));
                    pair_record(spec, h, &base, &other, &m0, &m1, tol)
                })
                .collect::<Result<Vec<_>>>()?
        }
        Perturbation::Coefficients { coefficients } => {
            let (out, inc) = spec.grids.grids()?;
            let m0 = assemble_far_field_matrix(&base, &out, &inc, &spec.forward)?;
            let tol = bie_error_estimate(&base, spec, &m0)?;
            spec.amplitudes
                .par_iter()
                .map(|&a| {
                    let other = match base.add_scaled(coefficients, a).and_then(|s| {
                        let rep = s.admissibility_check();
                        if rep.passed() {
                            Ok(s)
                        } else {
                            Err(LabError::ClassViolation(rep.to_string()))
                        }
                    }) {
                        Ok(s) => s,
                        Err(e) => return Ok(StabilityRecord::skipped(a, format!("inadmissible: {e}"))),
                    };
                    match assemble_far_field_matrix(&other, &out, &inc, &spec.forward) {
                        Ok(m1) => pair_record(spec, a, &base, &other, &m0, &m1, tol),
                        Err(e) => {
                            let mut r = StabilityRecord::skipped(a, format!("solver failure: {e}"));
                            r.solver_tolerance = f64::INFINITY;
                            Ok(r)
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(StabilityExperiment { spec: spec.clone(), records })
}

fn pair_record(
    spec: &ExperimentSpec,
    amplitude: f64,
    base: &StarSurface,
    other: &StarSurface,
    m0: &FarFieldMatrix,
    m1: &FarFieldMatrix,
    tol: f64,
) -> Result<StabilityRecord> {
    let delta = delta_metric(m0, m1)?.value;
    let one = hausdorff_distance(base, other, false, &spec.hausdorff).distance;
    let sym = hausdorff_distance(base, other, true, &spec.hausdorff).distance;
    Ok(StabilityRecord {
        amplitude,
        delta: Some(delta),
        rho_one_sided: Some(one),
        rho_symmetric: Some(sym),
        solver_tolerance: tol,
        trustworthy: tol * spec.tolerances.trust_factor <= delta,
        note: None,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl StabilityExperiment {
    /// CSV `amplitude,delta,rho_one_sided,rho_symmetric,trustworthy,solver_tolerance,note`.
    pub fn write_records_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "amplitude,delta,rho_one_sided,rho_symmetric,trustworthy,solver_tolerance,note")?;
        for r in &self.records {
            let note = r.note.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(
                w,
                "{:e},{},{},{},{},{:e},{}",
                r.amplitude,
                opt(r.delta),
                opt(r.rho_one_sided),
                opt(r.rho_symmetric),
                r.trustworthy,
                r.solver_tolerance,
                note
            )?;
        }
        Ok(())
    }
}
