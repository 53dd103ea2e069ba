use std::io::Write;

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{SpectralEstimate, OracleSetup};
use crate::error::{LabError, Result};

/// Cartesian λ-grid and tolerance schedule for a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub lambda_max: f64,
    pub spacing: f64,
    /// Tolerances tried from largest to smallest; the smallest attainable one is kept.
    pub epsilons: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { lambda_max: 3.0, spacing: 0.5, epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4] }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max > 0.0 && self.spacing > 0.0 && self.lambda_max.is_finite()) {
            return Err(LabError::Validation(format!(
                "scan needs positive extent and spacing (got {} and {})",
                self.lambda_max, self.spacing
            )));
        }
        if self.lambda_max / self.spacing > 64.0 {
            return Err(LabError::Validation("scan has more than 64 points per half-axis".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(LabError::Validation("tolerance schedule must be non-empty and positive".into()));
        }
        Ok(())
    }

    /// Half-width of the index cube.
    pub fn half_width(&self) -> i64 {
        (self.lambda_max / self.spacing + 1e-9).floor() as i64
    }

    /// Integer offsets `n` with `|n h| ≤ Λ_max`, in lexicographic order.
    pub fn indices(&self) -> Vec<[i64; 3]> {
        let n = self.half_width();
        let r2 = self.lambda_max * self.lambda_max * (1.0 + 1e-12);
        let mut out = Vec::new();
        for i in -n..=n {
            for j in -n..=n {
                for k in -n..=n {
                    let l = self.lambda_of(&[i, j, k]);
                    if l.norm_squared() <= r2 {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    pub fn lambda_of(&self, index: &[i64; 3]) -> Vector3<f64> {
        Vector3::new(index[0] as f64, index[1] as f64, index[2] as f64) * self.spacing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub index: [i64; 3],
    pub lambda: Vector3<f64>,
    /// Hermitian-symmetrized estimate.
    pub value: Complex64,
    /// Estimate before symmetrization.
    pub raw: Complex64,
    pub residual: f64,
    pub bound: f64,
    /// Tolerance whose density was kept.
    pub epsilon: f64,
    pub unattainable: bool,
    /// `|χ̃(λ) − conj χ̃(−λ)|` before symmetrization.
    pub hermitian_residual: f64,
    pub data_value: Option<Complex64>,
    pub path_discrepancy: Option<f64>,
    pub continuation_warning: bool,
    pub failure: Option<String>,
}

/// Estimates of `χ̃_D` on a Cartesian λ-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub config: ScanConfig,
    pub points: Vec<SpectrumPoint>,
}

fn blank(config: &ScanConfig, index: [i64; 3]) -> SpectrumPoint {
    SpectrumPoint {
        index,
        lambda: config.lambda_of(&index),
        value: Complex64::new(0.0, 0.0),
        raw: Complex64::new(0.0, 0.0),
        residual: 0.0,
        bound: 0.0,
        epsilon: 0.0,
        unattainable: false,
        hermitian_residual: 0.0,
        data_value: None,
        path_discrepancy: None,
        continuation_warning: false,
        failure: None,
    }
}

fn estimate_point(setup: &OracleSetup, config: &ScanConfig, index: [i64; 3]) -> SpectrumPoint {
    let mut p = blank(config, index);
    if index == [0, 0, 0] {
        p.raw = Complex64::new(setup.volume, 0.0);
        return p;
    }
    let pair = match setup.pair_for(&p.lambda) {
        Ok(pair) => pair,
        Err(e) => {
            p.failure = Some(e.to_string());
            return p;
        }
    };
    let mut schedule = config.epsilons.clone();
    schedule.sort_by(|a, b| b.total_cmp(a));
    let mut kept: Option<(f64, SpectralEstimate)> = None;
    for eps in schedule {
        let result = setup.solve_density(&pair, eps).and_then(|d| setup.spectral_estimate(&d));
        match result {
            Ok(e) => {
                let stop = e.unattainable;
                if kept.is_none() || !stop {
                    kept = Some((eps, e));
                }
                if stop {
                    break;
                }
            }
            Err(e) => {
                p.failure = Some(e.to_string());
                break;
            }
        }
    }
    if let Some((eps, e)) = kept {
        p.failure = None;
        p.raw = e.oracle;
        p.residual = e.residual;
        p.bound = e.oracle_bound;
        p.epsilon = eps;
        p.unattainable = e.unattainable;
        p.data_value = e.data;
        p.path_discrepancy = e.path_discrepancy;
        p.continuation_warning = e.continuation_warning;
    }
    p
}

/// Oracle estimates at every grid point; `χ̃(0)` is the quadrature volume.
pub fn spectrum_scan(setup: &OracleSetup, config: &ScanConfig) -> Result<SpectrumGrid> {
    config.validate()?;
    let indices = config.indices();
    let points: Vec<SpectrumPoint> = indices.par_iter().map(|&i| estimate_point(setup, config, i)).collect();
    let mut grid = SpectrumGrid { config: config.clone(), points };
    grid.symmetrize();
    Ok(grid)
}

impl SpectrumGrid {
    /// Grid filled from a closed-form transform `f(λ)`, with the same truncation as a scan.
    pub fn from_fn<F: Fn(&Vector3<f64>) -> Complex64>(config: &ScanConfig, f: F) -> Result<Self> {
        config.validate()?;
        let points = config
            .indices()
            .into_iter()
            .map(|i| {
                let mut p = blank(config, i);
                p.raw = f(&p.lambda);
                p
            })
            .collect();
        let mut grid = Self { config: config.clone(), points };
        grid.symmetrize();
        Ok(grid)
    }

    fn position(&self, index: &[i64; 3]) -> Option<usize> {
        // indices are generated in lexicographic order
        self.points.binary_search_by(|p| p.index.cmp(index)).ok()
    }

    pub fn get(&self, index: &[i64; 3]) -> Option<&SpectrumPoint> {
        self.position(index).map(|k| &self.points[k])
    }

    /// Averages `χ̃(λ)` with `conj χ̃(−λ)` and records the pre-averaging residual.
    fn symmetrize(&mut self) {
        let raw: Vec<(Complex64, bool)> = self.points.iter().map(|p| (p.raw, p.failure.is_none())).collect();
        for k in 0..self.points.len() {
            let idx = self.points[k].index;
            let partner = self.position(&[-idx[0], -idx[1], -idx[2]]);
            let p = &mut self.points[k];
            match partner {
                Some(j) if raw[k].1 && raw[j].1 => {
                    let mirror = raw[j].0.conj();
                    p.hermitian_residual = (raw[k].0 - mirror).norm();
                    p.value = 0.5 * (raw[k].0 + mirror);
                }
                _ => p.value = raw[k].0,
            }
        }
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.failure.is_some()).count()
    }

    /// CSV `lambda1,lambda2,lambda3,re,im,residual,bound`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda1,lambda2,lambda3,re,im,residual,bound")?;
        for p in &self.points {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                p.lambda[0], p.lambda[1], p.lambda[2], p.value.re, p.value.im, p.residual, p.bound
            )?;
        }
        Ok(())
    }
}
