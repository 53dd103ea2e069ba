use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectrum::SpectrumGrid;
use crate::error::{LabError, Result};
use crate::geometry::{hausdorff_distance, HausdorffConfig, HausdorffEstimate, StarSurface};
use crate::special_functions::build_sphere_quadrature;

const VOXEL_FORMAT: &str = "scatterlab-voxels-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    /// The voxel box is `[−half_width, half_width]³`.
    pub half_width: f64,
    /// Voxels per axis (odd, so the origin is a voxel centre).
    pub voxels: usize,
    pub threshold: f64,
    /// Harmonic degree of the fitted surface estimate.
    pub fit_degree: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self { half_width: 2.0, voxels: 41, threshold: 0.5, fit_degree: 8 }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || self.voxels < 3 || self.voxels % 2 == 0 || self.voxels > 401 {
            return Err(LabError::Validation(format!(
                "voxel box needs positive half-width and an odd count in [3, 401] (got {}, {})",
                self.half_width, self.voxels
            )));
        }
        if !self.threshold.is_finite() {
            return Err(LabError::Validation("threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.voxels - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }
}

/// Band-limited indicator sampled at voxel centres, `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelIndicator {
    pub config: InversionConfig,
    /// Real part of the inverse sum.
    pub field: Vec<f64>,
    /// Largest imaginary part encountered.
    pub max_imag: f64,
}

#[derive(Serialize, Deserialize)]
struct VoxelHeader {
    format: String,
    dims: [usize; 3],
    box_min: [f64; 3],
    box_max: [f64; 3],
    threshold: f64,
}

impl VoxelIndicator {
    fn n(&self) -> usize {
        self.config.voxels
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n();
        self.field[i + n * (j + n * k)]
    }

    pub fn interior_count(&self, threshold: f64) -> usize {
        self.field.iter().filter(|v| **v > threshold).count()
    }

    /// Volume of the superlevel set `{f > threshold}` counted in voxels.
    pub fn thresholded_volume(&self, threshold: f64) -> f64 {
        self.interior_count(threshold) as f64 * self.config.spacing().powi(3)
    }

    /// `Σ f · h³` over the box.
    pub fn integrated_volume(&self) -> f64 {
        self.field.iter().sum::<f64>() * self.config.spacing().powi(3)
    }

    /// Trilinear interpolation; zero outside the box.
    pub fn interpolate(&self, x: &Vector3<f64>) -> f64 {
        let n = self.n();
        let h = self.config.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = (x[a] + self.config.half_width) / h;
            if !(u >= 0.0 && u <= (n - 1) as f64) {
                return 0.0;
            }
            let b = (u.floor() as usize).min(n - 2);
            base[a] = b;
            frac[a] = u - b as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let (di, dj, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
            if w != 0.0 {
                acc += w * self.at(base[0] + di, base[1] + dj, base[2] + dk);
            }
        }
        acc
    }

    /// Distance from the origin to the first crossing below `threshold` along `dir`.
    pub fn radial_crossing(&self, dir: &Vector3<f64>, threshold: f64) -> Option<f64> {
        let step = 0.25 * self.config.spacing();
        let r_max = self.config.half_width;
        if self.interpolate(&Vector3::zeros()) <= threshold {
            return None;
        }
        let mut r = 0.0;
        while r < r_max {
            let next = (r + step).min(r_max);
            if self.interpolate(&(dir * next)) <= threshold {
                let (mut lo, mut hi) = (r, next);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if self.interpolate(&(dir * mid)) > threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            r = next;
        }
        None
    }

    /// Flat `u8` indicator (`x` fastest) after a one-line JSON header.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        let hw = self.config.half_width;
        let header = VoxelHeader {
            format: VOXEL_FORMAT.into(),
            dims: [n; 3],
            box_min: [-hw; 3],
            box_max: [hw; 3],
            threshold: self.config.threshold,
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        let bytes: Vec<u8> = self.field.iter().map(|v| u8::from(*v > self.config.threshold)).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Reads the header and indicator bytes written by [`VoxelIndicator::write_binary`].
    pub fn read_indicator<R: Read>(mut r: R) -> Result<([usize; 3], f64, Vec<u8>)> {
        let mut all = Vec::new();
        r.read_to_end(&mut all)?;
        let nl = all
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| LabError::Validation("voxel file has no header line".into()))?;
        let header: VoxelHeader = serde_json::from_slice(&all[..nl])?;
        if header.format != VOXEL_FORMAT {
            return Err(LabError::Validation(format!("unknown voxel format {}", header.format)));
        }
        let body = all[nl + 1..].to_vec();
        if body.len() != header.dims.iter().product::<usize>() {
            return Err(LabError::Validation("voxel body length does not match header dims".into()));
        }
        Ok((header.dims, header.threshold, body))
    }
}

/// `f(x) = (h/2π)³ Σ_λ χ̃(λ) e^{iλ·x}` on the voxel centres, evaluated axis by axis.
pub fn inverse_transform(grid: &SpectrumGrid, config: &InversionConfig) -> Result<VoxelIndicator> {
    config.validate()?;
    if grid.points.is_empty() {
        return Err(LabError::Validation("empty spectrum".into()));
    }
    let m = grid.config.half_width();
    let w = (2 * m + 1) as usize;
    let n = config.voxels;
    let h = grid.config.spacing;
    let xs: Vec<f64> = (0..n).map(|i| config.coordinate(i)).collect();
    // phase[a][x] = e^{i a h x} for a in −m..=m
    let phase: Vec<Vec<Complex64>> =
        (-m..=m).map(|a| xs.iter().map(|x| Complex64::new(0.0, a as f64 * h * x).exp()).collect()).collect();
    let mut spec = vec![Complex64::new(0.0, 0.0); w * w * w];
    let off = |a: i64| (a + m) as usize;
    for p in &grid.points {
        if p.failure.is_none() {
            spec[off(p.index[0]) + w * (off(p.index[1]) + w * off(p.index[2]))] = p.value;
        }
    }
    // contract λ₃ → z, then λ₂ → y, then λ₁ → x
    let mut s1 = vec![Complex64::new(0.0, 0.0); w * w * n];
    for a in 0..w {
        for b in 0..w {
            for c in 0..w {
                let v = spec[a + w * (b + w * c)];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for z in 0..n {
                    s1[a + w * (b + w * z)] += v * phase[c][z];
                }
            }
        }
    }
    let mut s2 = vec![Complex64::new(0.0, 0.0); w * n * n];
    for z in 0..n {
        for b in 0..w {
            for a in 0..w {
                let v = s1[a + w * (b + w * z)];
                for y in 0..n {
                    s2[a + w * (y + n * z)] += v * phase[b][y];
                }
            }
        }
    }
    let scale = (h / (2.0 * PI)).powi(3);
    let mut field = vec![0.0; n * n * n];
    let mut max_imag: f64 = 0.0;
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..w {
                    acc += s2[a + w * (y + n * z)] * phase[a][x];
                }
                acc *= scale;
                field[x + n * (y + n * z)] = acc.re;
                max_imag = max_imag.max(acc.im.abs());
            }
        }
    }
    Ok(VoxelIndicator { config: *config, field, max_imag })
}

/// Agreement of the voxel field with its images under grid-preserving rotations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// Largest `|f(x) − f(R x)|` over voxels and tested rotations.
    pub max_field_difference: f64,
    /// Voxels whose interior flag differs from that of their image.
    pub mismatched_voxels: usize,
    /// Mismatches not explained by `|f − threshold| ≤ max_field_difference`.
    pub unexplained_mismatches: usize,
}

impl SymmetryReport {
    pub fn symmetric(&self) -> bool {
        self.unexplained_mismatches == 0
    }
}

/// Quarter turn about `z` and the cyclic axis permutation.
pub fn symmetry_check(v: &VoxelIndicator) -> SymmetryReport {
    let n = v.n();
    let thr = v.config.threshold;
    let maps: [fn(usize, usize, usize, usize) -> (usize, usize, usize); 2] =
        [|i, j, k, n| (n - 1 - j, i, k), |i, j, k, _| (j, k, i)];
    let mut max_diff: f64 = 0.0;
    let mut pairs = Vec::new();
    for map in maps {
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c) = map(i, j, k, n);
                    let f = v.at(i, j, k);
                    let g = v.at(a, b, c);
                    max_diff = max_diff.max((f - g).abs());
                    if (f > thr) != (g > thr) {
                        pairs.push((f, g));
                    }
                }
            }
        }
    }
    let unexplained = pairs
        .iter()
        .filter(|(f, g)| (f - thr).abs() > max_diff && (g - thr).abs() > max_diff)
        .count();
    SymmetryReport { max_field_difference: max_diff, mismatched_voxels: pairs.len(), unexplained_mismatches: unexplained }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub threshold: f64,
    pub voxel_spacing: f64,
    pub thresholded_volume: f64,
    pub integrated_volume: f64,
    /// `π / Λ_max`.
    pub diffraction_bound: f64,
    pub max_imag: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub mean_radius: f64,
    /// `max |r_est − r_true|` over scan directions, when the truth is known.
    pub radial_error: Option<f64>,
    pub hausdorff: Option<HausdorffEstimate>,
    pub symmetry: SymmetryReport,
    /// Set when the thresholded interior is empty or a radial scan fails.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub voxels: VoxelIndicator,
    pub surface: Option<StarSurface>,
    pub report: InversionReport,
}

/// Inverse sum, threshold, radial surface extraction and comparison with `truth`.
pub fn invert_to_indicator(
    grid: &SpectrumGrid,
    config: &InversionConfig,
    truth: Option<&StarSurface>,
    hausdorff: &HausdorffConfig,
) -> Result<Reconstruction> {
    if let Some(t) = truth {
        if config.half_width < t.a1() {
            return Err(LabError::Validation(format!(
                "voxel box half-width {} does not contain the annulus radius {}",
                config.half_width,
                t.a1()
            )));
        }
    }
    let voxels = inverse_transform(grid, config)?;
    let mut report = InversionReport {
        threshold: config.threshold,
        voxel_spacing: config.spacing(),
        thresholded_volume: voxels.thresholded_volume(config.threshold),
        integrated_volume: voxels.integrated_volume(),
        diffraction_bound: PI / grid.config.lambda_max,
        max_imag: voxels.max_imag,
        min_radius: 0.0,
        max_radius: 0.0,
        mean_radius: 0.0,
        radial_error: None,
        hausdorff: None,
        symmetry: symmetry_check(&voxels),
        failure: None,
    };
    if voxels.interior_count(config.threshold) == 0 {
        report.failure = Some("reconstruction failed: empty interior after thresholding".into());
        return Ok(Reconstruction { voxels, surface: None, report });
    }
    // scan directions of the fitting rule
    let q = build_sphere_quadrature(2 * config.fit_degree + 24)?;
    let mut radii = Vec::with_capacity(q.len());
    for x in &q.nodes {
        match voxels.radial_crossing(x, config.threshold) {
            Some(r) => radii.push(r),
            None => {
                report.failure = Some(format!("radial scan found no boundary crossing along {x:?}"));
                return Ok(Reconstruction { voxels, surface: None, report });
            }
        }
    }
    report.min_radius = radii.iter().copied().fold(f64::INFINITY, f64::min);
    report.max_radius = radii.iter().copied().fold(0.0, f64::max);
    report.mean_radius = radii.iter().zip(&q.weights).map(|(r, w)| r * w).sum::<f64>() / (4.0 * PI);
    let a0 = 0.5 * report.min_radius;
    let a1 = config.half_width.max(2.0 * report.max_radius);
    let surface = StarSurface::fit_radial(
        |x| voxels.radial_crossing(x, config.threshold).unwrap_or(0.0),
        config.fit_degree,
        a0,
        a1,
        f64::MAX,
    )?;
    if let Some(t) = truth {
        let err = q
            .nodes
            .iter()
            .zip(&radii)
            .map(|(x, r)| (r - t.radius_at(x)).abs())
            .fold(0.0, f64::max);
        report.radial_error = Some(err);
        report.hausdorff = Some(hausdorff_distance(&surface, t, true, hausdorff));
    }
    Ok(Reconstruction { voxels, surface: Some(surface), report })
}
