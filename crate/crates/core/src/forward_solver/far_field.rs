use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bie::{check_direction, BieSolver, ForwardConfig};
use super::mie::{legendre_all, mie_far_field_weights};
use crate::error::{LabError, Result};
use crate::geometry::StarSurface;
use crate::special_functions::build_sphere_quadrature;

const FORMAT_TAG: &str = "scatterlab-farfield-v1";
const OPTICAL_DEGREE: usize = 48;

/// Directions on S² with weights; `degree` is set when the weights form an exact rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionGrid {
    pub label: String,
    pub degree: Option<usize>,
    pub directions: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
}

impl DirectionGrid {
    /// Nodes of the product rule exact to `degree`.
    pub fn quadrature(degree: usize) -> Result<Self> {
        let q = build_sphere_quadrature(degree)?;
        Ok(Self { label: format!("quadrature-{degree}"), degree: Some(degree), directions: q.nodes, weights: q.weights })
    }

    /// The 26 normalized nonzero vectors of `{-1, 0, 1}³` (axes, edges, corners), equal weights.
    pub fn cube26() -> Self {
        let mut directions = Vec::with_capacity(26);
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    if (i, j, k) != (0, 0, 0) {
                        directions.push(Vector3::new(i as f64, j as f64, k as f64).normalize());
                    }
                }
            }
        }
        Self { label: "cube26".into(), degree: None, directions, weights: vec![4.0 * PI / 26.0; 26] }
    }

    /// Arbitrary unit directions with equal weights.
    pub fn from_directions(label: &str, directions: Vec<Vector3<f64>>) -> Result<Self> {
        for d in &directions {
            check_direction(d)?;
        }
        let w = 4.0 * PI / directions.len().max(1) as f64;
        Ok(Self { label: label.into(), degree: None, weights: vec![w; directions.len()], directions })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Index of a grid direction within `1e-12` of `x`.
    pub fn find(&self, x: &Vector3<f64>) -> Option<usize> {
        self.directions.iter().position(|d| (d - x).norm() < 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FarFieldDiagnostics {
    /// Largest relative residual of the discrete systems.
    pub max_solver_residual: f64,
    /// Largest optical-theorem residual over incident directions.
    pub optical_residual: f64,
    /// `max |A(α′,α) − A(−α,−α′)|` over pairs available on the grids.
    pub reciprocity_residual: Option<f64>,
}

/// `values[(p, q)] = A(out_grid[p], in_grid[q])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldMatrix {
    pub out_grid: DirectionGrid,
    pub in_grid: DirectionGrid,
    pub values: DMatrix<Complex64>,
    pub surface_hash: String,
    pub config: ForwardConfig,
    pub diagnostics: FarFieldDiagnostics,
}

#[derive(Serialize, Deserialize)]
struct FarFieldHeader {
    format: String,
    surface_hash: String,
    config: ForwardConfig,
    diagnostics: FarFieldDiagnostics,
    rows: usize,
    cols: usize,
    out_grid: DirectionGrid,
    in_grid: DirectionGrid,
}

/// `e^{-i α′_p · s_i}` times `−w_i/4π`, the far-field integration matrix.
fn far_field_operator(points: &[Vector3<f64>], weights: &[f64], outs: &[Vector3<f64>]) -> DMatrix<Complex64> {
    DMatrix::from_fn(outs.len(), points.len(), |p, i| {
        Complex64::new(0.0, -outs[p].dot(&points[i])).exp() * (-weights[i] / (4.0 * PI))
    })
}

pub fn assemble_far_field_matrix(
    surface: &StarSurface,
    out_grid: &DirectionGrid,
    in_grid: &DirectionGrid,
    config: &ForwardConfig,
) -> Result<FarFieldMatrix> {
    check_grids(out_grid, in_grid)?;
    let solver = BieSolver::new(surface, config)?;
    assemble_with_solver(&solver, &surface.content_hash(), out_grid, in_grid)
}

fn check_grids(out_grid: &DirectionGrid, in_grid: &DirectionGrid) -> Result<()> {
    for (index, d) in in_grid.directions.iter().enumerate() {
        check_direction(d).map_err(|e| LabError::IncidentDirection { index, source: Box::new(e) })?;
    }
    for d in &out_grid.directions {
        check_direction(d)?;
    }
    Ok(())
}

/// As [`assemble_far_field_matrix`] with an already factorized solver.
pub fn assemble_with_solver(
    solver: &BieSolver,
    surface_hash: &str,
    out_grid: &DirectionGrid,
    in_grid: &DirectionGrid,
) -> Result<FarFieldMatrix> {
    check_grids(out_grid, in_grid)?;
    let (coeffs, residuals) = solver.solve_coefficients(&in_grid.directions)?;
    let tq = solver.trace_quadrature();
    let un = solver.trace_harmonics() * coeffs;
    let values = far_field_operator(&tq.points, &tq.weights, &out_grid.directions) * &un;

    let opt_grid = build_sphere_quadrature(OPTICAL_DEGREE)?;
    let on_grid = far_field_operator(&tq.points, &tq.weights, &opt_grid.nodes) * &un;
    let forward = far_field_operator(&tq.points, &tq.weights, &in_grid.directions) * &un;
    let mut optical: f64 = 0.0;
    for q in 0..in_grid.len() {
        let energy: f64 = on_grid.column(q).iter().zip(&opt_grid.weights).map(|(a, w)| a.norm_sqr() * w).sum();
        optical = optical.max((forward[(q, q)].im - energy / (4.0 * PI)).abs());
    }
    let mut m = FarFieldMatrix {
        out_grid: out_grid.clone(),
        in_grid: in_grid.clone(),
        values,
        surface_hash: surface_hash.to_owned(),
        config: *solver.config(),
        diagnostics: FarFieldDiagnostics {
            max_solver_residual: residuals.iter().fold(0.0, |a: f64, b| a.max(*b)),
            optical_residual: optical,
            reciprocity_residual: None,
        },
    };
    m.diagnostics.reciprocity_residual = m.reciprocity_residual().ok();
    Ok(m)
}

/// Far-field matrix of the ball of radius `a` from the partial-wave series.
pub fn mie_far_field_matrix(a: f64, out_grid: &DirectionGrid, in_grid: &DirectionGrid) -> Result<FarFieldMatrix> {
    let w = mie_far_field_weights(a)?;
    let values = DMatrix::from_fn(out_grid.len(), in_grid.len(), |p, q| {
        let z = out_grid.directions[p].dot(&in_grid.directions[q]);
        let pl = legendre_all(w.len() - 1, Complex64::new(z, 0.0));
        w.iter().zip(&pl).map(|(a, b)| a * b).sum()
    });
    let mut m = FarFieldMatrix {
        out_grid: out_grid.clone(),
        in_grid: in_grid.clone(),
        values,
        surface_hash: StarSurface::sphere(a).content_hash(),
        config: ForwardConfig::default(),
        diagnostics: FarFieldDiagnostics::default(),
    };
    m.diagnostics.reciprocity_residual = m.reciprocity_residual().ok();
    Ok(m)
}

impl FarFieldMatrix {
    pub fn value(&self, p: usize, q: usize) -> Complex64 {
        self.values[(p, q)]
    }

    /// `max |A(α′,α) − A(−α,−α′)|` over grid pairs whose reversed pair is also on the grids.
    pub fn reciprocity_residual(&self) -> Result<f64> {
        let mut worst: Option<f64> = None;
        let in_map: Vec<Option<usize>> = self.out_grid.directions.iter().map(|d| self.in_grid.find(&-d)).collect();
        let out_map: Vec<Option<usize>> = self.in_grid.directions.iter().map(|d| self.out_grid.find(&-d)).collect();
        for p in 0..self.out_grid.len() {
            for q in 0..self.in_grid.len() {
                if let (Some(qq), Some(pp)) = (in_map[p], out_map[q]) {
                    let d = (self.values[(p, q)] - self.values[(pp, qq)]).norm();
                    worst = Some(worst.map_or(d, |w| w.max(d)));
                }
            }
        }
        worst.ok_or_else(|| LabError::GridMismatch("grids contain no reciprocal pairs".into()))
    }

    /// Metadata JSON on the first line, then `p,q,re,im` rows in shortest round-trip form.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = FarFieldHeader {
            format: FORMAT_TAG.into(),
            surface_hash: self.surface_hash.clone(),
            config: self.config,
            diagnostics: self.diagnostics,
            rows: self.values.nrows(),
            cols: self.values.ncols(),
            out_grid: self.out_grid.clone(),
            in_grid: self.in_grid.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        writeln!(w, "p,q,re,im")?;
        for p in 0..self.values.nrows() {
            for q in 0..self.values.ncols() {
                let v = self.values[(p, q)];
                writeln!(w, "{p},{q},{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| LabError::Validation("empty far-field file".into()))??;
        let header: FarFieldHeader = serde_json::from_str(&first)?;
        if header.format != FORMAT_TAG {
            return Err(LabError::Validation(format!("unknown far-field format '{}'", header.format)));
        }
        if header.rows != header.out_grid.len() || header.cols != header.in_grid.len() {
            return Err(LabError::GridMismatch("header dimensions disagree with grids".into()));
        }
        let columns = lines.next().ok_or_else(|| LabError::Validation("missing column header".into()))??;
        if columns.trim() != "p,q,re,im" {
            return Err(LabError::Validation(format!("unexpected column header '{columns}'")));
        }
        let mut values = DMatrix::from_element(header.rows, header.cols, Complex64::new(f64::NAN, f64::NAN));
        let mut seen = 0usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || LabError::Validation(format!("malformed far-field row '{line}'"));
            if parts.len() != 4 {
                return Err(bad());
            }
            let p: usize = parts[0].parse().map_err(|_| bad())?;
            let q: usize = parts[1].parse().map_err(|_| bad())?;
            let re: f64 = parts[2].parse().map_err(|_| bad())?;
            let im: f64 = parts[3].parse().map_err(|_| bad())?;
            if p >= header.rows || q >= header.cols {
                return Err(bad());
            }
            values[(p, q)] = Complex64::new(re, im);
            seen += 1;
        }
        if seen != header.rows * header.cols {
            return Err(LabError::Validation(format!(
                "far-field file has {seen} rows, expected {}",
                header.rows * header.cols
            )));
        }
        Ok(Self {
            out_grid: header.out_grid,
            in_grid: header.in_grid,
            values,
            surface_hash: header.surface_hash,
            config: header.config,
            diagnostics: header.diagnostics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_grid_is_closed_and_unit() {
        let g = DirectionGrid::cube26();
        assert_eq!(g.len(), 26);
        for d in &g.directions {
            assert!((d.norm() - 1.0).abs() < 1e-15);
            assert!(g.find(&-d).is_some());
        }
    }

    #[test]
    fn mie_matrix_reciprocity_and_roundtrip() {
        let cube = DirectionGrid::cube26();
        assert!(mie_far_field_matrix(1.0, &cube, &cube).unwrap().reciprocity_residual().unwrap() < 1e-13);
        let g = DirectionGrid::quadrature(7).unwrap();
        let m = mie_far_field_matrix(1.0, &g, &cube).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = FarFieldMatrix::read_from(&buf[..]).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let g = DirectionGrid::cube26();
        let m = mie_far_field_matrix(0.7, &g, &g).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(FarFieldMatrix::read_from(cut.as_bytes()).is_err());
    }

    #[test]
    fn no_reciprocal_pairs_is_a_grid_mismatch() {
        let g = DirectionGrid::from_directions("pole", vec![Vector3::z()]).unwrap();
        let m = mie_far_field_matrix(1.0, &g, &g).unwrap();
        assert!(matches!(m.reciprocity_residual(), Err(LabError::GridMismatch(_))));
    }
}
