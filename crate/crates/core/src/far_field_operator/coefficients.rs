use std::io::Write;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::forward_solver::trace::check_variety;
use crate::forward_solver::FarFieldMatrix;
use crate::special_functions::{harmonics_complex, harmonics_real, lm_index, num_harmonics};

pub const DEFAULT_L_TRUNC: usize = 30;

/// Degrees whose coefficient norm falls below this fraction of the largest are treated as noise.
pub const NOISE_FLOOR_REL: f64 = 1e-13;

/// `A_lm(α) = ∫ A(α′, α) conj(Y_lm(α′)) dα′` for `l ≤ l_trunc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldCoefficients {
    pub alpha: Vector3<f64>,
    pub l_trunc: usize,
    pub coefficients: Vec<Complex64>,
    /// `sqrt(Σ_m |A_lm|²)` per degree.
    pub degree_norms: Vec<f64>,
    /// Norm of the last two degrees.
    pub tail_bound: f64,
    /// Absolute level below which coefficients are indistinguishable from noise.
    pub noise_floor: f64,
    /// Last degree whose norm exceeds the noise floor; continuation sums up to here.
    pub effective_degree: usize,
    /// `Σ |A_lm|²` and the quadrature value of `∫ |A(·, α)|²`.
    pub coefficient_energy: f64,
    pub grid_energy: f64,
}

pub fn compute_coefficients(matrix: &FarFieldMatrix, alpha_index: usize, l_trunc: usize) -> Result<FarFieldCoefficients> {
    let grid = &matrix.out_grid;
    match grid.degree {
        Some(d) if d >= 2 * l_trunc => {}
        other => {
            return Err(LabError::Resolution(format!(
                "out-grid exactness {other:?} below 2·L_trunc = {}",
                2 * l_trunc
            )))
        }
    }
    if alpha_index >= matrix.in_grid.len() {
        return Err(LabError::Validation(format!("incident index {alpha_index} out of range")));
    }
    let nh = num_harmonics(l_trunc);
    let mut coefficients = vec![Complex64::new(0.0, 0.0); nh];
    let mut grid_energy = 0.0;
    for (p, (x, w)) in grid.directions.iter().zip(&grid.weights).enumerate() {
        let a = matrix.values[(p, alpha_index)];
        grid_energy += a.norm_sqr() * w;
        for (c, y) in coefficients.iter_mut().zip(harmonics_real(l_trunc, x)) {
            *c += a * y.conj() * *w;
        }
    }
    Ok(summarize(matrix.in_grid.directions[alpha_index], l_trunc, coefficients, grid_energy))
}

/// [`compute_coefficients`] for every incident direction, sharing the harmonic table.
pub fn compute_all_coefficients(matrix: &FarFieldMatrix, l_trunc: usize) -> Result<Vec<FarFieldCoefficients>> {
    let grid = &matrix.out_grid;
    match grid.degree {
        Some(d) if d >= 2 * l_trunc => {}
        other => {
            return Err(LabError::Resolution(format!(
                "out-grid exactness {other:?} below 2·L_trunc = {}",
                2 * l_trunc
            )))
        }
    }
    let nh = num_harmonics(l_trunc);
    let mut ywh = DMatrix::zeros(nh, grid.len());
    for (p, (x, w)) in grid.directions.iter().zip(&grid.weights).enumerate() {
        for (k, y) in harmonics_real(l_trunc, x).into_iter().enumerate() {
            ywh[(k, p)] = y.conj() * *w;
        }
    }
    let c = ywh * &matrix.values;
    Ok((0..matrix.in_grid.len())
        .map(|q| {
            let grid_energy = matrix.values.column(q).iter().zip(&grid.weights).map(|(a, w)| a.norm_sqr() * w).sum();
            summarize(matrix.in_grid.directions[q], l_trunc, c.column(q).iter().copied().collect(), grid_energy)
        })
        .collect())
}

fn summarize(alpha: Vector3<f64>, l_trunc: usize, coefficients: Vec<Complex64>, grid_energy: f64) -> FarFieldCoefficients {
    let degree_norms: Vec<f64> = (0..=l_trunc)
        .map(|l| {
            (-(l as i64)..=l as i64)
                .map(|m| coefficients[lm_index(l, m)].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let tail_bound = degree_norms[l_trunc.saturating_sub(1)..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let peak = degree_norms.iter().fold(0.0f64, |a, b| a.max(*b));
    let noise_floor = NOISE_FLOOR_REL * peak;
    let effective_degree = degree_norms.iter().rposition(|v| *v > noise_floor).unwrap_or(0);
    let coefficient_energy = coefficients.iter().map(|c| c.norm_sqr()).sum();
    FarFieldCoefficients {
        alpha,
        l_trunc,
        coefficients,
        degree_norms,
        tail_bound,
        noise_floor,
        effective_degree,
        coefficient_energy,
        grid_energy,
    }
}

impl FarFieldCoefficients {
    /// Coefficients given directly (e.g. from a series), for `l ≤ l_trunc`.
    pub fn from_coefficients(alpha: Vector3<f64>, l_trunc: usize, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != num_harmonics(l_trunc) {
            return Err(LabError::Validation(format!(
                "expected {} coefficients for degree {l_trunc}, got {}",
                num_harmonics(l_trunc),
                coefficients.len()
            )));
        }
        let energy = coefficients.iter().map(|c| c.norm_sqr()).sum();
        Ok(summarize(alpha, l_trunc, coefficients, energy))
    }

    pub fn coefficient(&self, l: usize, m: i64) -> Complex64 {
        self.coefficients[lm_index(l, m)]
    }

    /// Least-squares slope of `ln ‖A_l‖` over degrees up to the effective degree.
    pub fn decay_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.degree_norms[..=self.effective_degree]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(l, v)| (l as f64, v.ln()))
            .collect();
        let n = pts.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
        num / den
    }

    /// CSV `l,m,re,im` preceded by a `#`-prefixed JSON metadata line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::json!({
            "alpha": self.alpha,
            "l_trunc": self.l_trunc,
            "effective_degree": self.effective_degree,
            "tail_bound": self.tail_bound,
            "noise_floor": self.noise_floor,
        });
        writeln!(w, "# {meta}")?;
        writeln!(w, "l,m,re,im")?;
        for l in 0..=self.l_trunc {
            for m in -(l as i64)..=(l as i64) {
                let c = self.coefficient(l, m);
                writeln!(w, "{l},{m},{:e},{:e}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuedValue {
    pub value: Complex64,
    /// Last kept term `‖A_L‖·‖Y_L(θ′)‖` plus noise-floor amplification `floor·Σ_l ‖Y_l(θ′)‖`.
    pub bound: f64,
    /// Set when the bound exceeds the value (ill-conditioned continuation).
    pub warning: bool,
}

/// `Σ_{l ≤ L_eff} Σ_m A_lm Y_lm(θ′)` with its heuristic error bound.
pub fn continue_far_field(coeffs: &FarFieldCoefficients, theta_out: &Vector3<Complex64>) -> Result<ContinuedValue> {
    check_variety(theta_out)?;
    let l_eff = coeffs.effective_degree;
    let y = harmonics_complex(l_eff, theta_out);
    let mut value = Complex64::new(0.0, 0.0);
    let mut growth_sum = 0.0;
    let mut last_growth = 0.0;
    for l in 0..=l_eff {
        let mut g2 = 0.0;
        for m in -(l as i64)..=(l as i64) {
            let k = lm_index(l, m);
            value += coeffs.coefficients[k] * y[k];
            g2 += y[k].norm_sqr();
        }
        last_growth = g2.sqrt();
        growth_sum += last_growth;
    }
    let bound = coeffs.degree_norms[l_eff] * last_growth + coeffs.noise_floor * growth_sum;
    Ok(ContinuedValue { value, bound, warning: bound > value.norm() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMetric {
    pub value: f64,
    /// Where the maximum was attained (out index, in index).
    pub argmax: (usize, usize),
    pub caveat: String,
}

/// `max_{p,q} |A_1(α′_p, α_q) − A_2(α′_p, α_q)|` on identical grids.
pub fn delta_metric(m1: &FarFieldMatrix, m2: &FarFieldMatrix) -> Result<DeltaMetric> {
    if m1.out_grid.directions != m2.out_grid.directions || m1.in_grid.directions != m2.in_grid.directions {
        return Err(LabError::GridMismatch("far-field matrices are sampled on different grids".into()));
    }
    let mut value = 0.0;
    let mut argmax = (0, 0);
    for q in 0..m1.values.ncols() {
        for p in 0..m1.values.nrows() {
            let d = (m1.values[(p, q)] - m2.values[(p, q)]).norm();
            if d > value {
                value = d;
                argmax = (p, q);
            }
        }
    }
    let caveat = format!(
        "maximum over {}x{} sampled pairs ({} / {}); values between grid points are not sampled",
        m1.out_grid.len(),
        m1.in_grid.len(),
        m1.out_grid.label,
        m1.in_grid.label
    );
    Ok(DeltaMetric { value, argmax, caveat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::far_field_operator::make_direction_pair;
    use crate::forward_solver::mie::{mie_far_field_complex, mie_far_field_weights};
    use crate::forward_solver::{mie_far_field_matrix, DirectionGrid};
    use crate::special_functions::sph_harmonic;
    use crate::special_functions::HarmonicIndex;
    use std::f64::consts::PI;

    fn ball_coeffs(a: f64, alpha: &Vector3<f64>) -> FarFieldCoefficients {
        let out = DirectionGrid::quadrature(2 * DEFAULT_L_TRUNC).unwrap();
        let inc = DirectionGrid::from_directions("alpha", vec![*alpha]).unwrap();
        let m = mie_far_field_matrix(a, &out, &inc).unwrap();
        compute_coefficients(&m, 0, DEFAULT_L_TRUNC).unwrap()
    }

    #[test]
    fn ball_coefficients_follow_addition_theorem() {
        let alpha = Vector3::new(0.36, 0.48, 0.8);
        let c = ball_coeffs(1.0, &alpha);
        // A = Σ w_l P_l(α′·α) and P_l(α′·α) = 4π/(2l+1) Σ_m Y_lm(α′) conj(Y_lm(α))
        let w = mie_far_field_weights(1.0).unwrap();
        for l in 0..w.len().min(12) {
            for m in -(l as i64)..=(l as i64) {
                let y = sph_harmonic(HarmonicIndex::new(l, m).unwrap(), &alpha).unwrap();
                let expect = w[l] * 4.0 * PI / (2 * l + 1) as f64 * y.conj();
                assert!((c.coefficient(l, m) - expect).norm() < 1e-8, "l={l} m={m}");
            }
        }
        assert!(c.degree_norms[30] < 1e-10);
        assert!(c.decay_slope() < 0.0);
        assert!(c.coefficient_energy <= c.grid_energy * (1.0 + 1e-12) + 1e-14);
        assert!((c.coefficient_energy - c.grid_energy).abs() < 1e-10 * c.grid_energy);
    }

    #[test]
    fn constant_projects_to_root_four_pi() {
        let out = DirectionGrid::quadrature(8).unwrap();
        let inc = DirectionGrid::cube26();
        let mut m = mie_far_field_matrix(1.0, &out, &inc).unwrap();
        m.values.fill(Complex64::new(1.0, 0.0));
        let c = compute_coefficients(&m, 3, 4).unwrap();
        assert!((c.coefficient(0, 0) - (4.0 * PI).sqrt()).norm() < 1e-13);
        assert!(c.coefficients[1..].iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn batch_matches_single_column() {
        let out = DirectionGrid::quadrature(24).unwrap();
        let m = mie_far_field_matrix(0.8, &out, &DirectionGrid::cube26()).unwrap();
        let all = compute_all_coefficients(&m, 12).unwrap();
        for q in [0, 7, 25] {
            let one = compute_coefficients(&m, q, 12).unwrap();
            assert_eq!(all[q].effective_degree, one.effective_degree);
            for (a, b) in all[q].coefficients.iter().zip(&one.coefficients) {
                assert!((a - b).norm() < 1e-13);
            }
            assert!((all[q].grid_energy - one.grid_energy).abs() < 1e-13);
        }
        assert!(compute_all_coefficients(&m, 13).is_err());
    }

    #[test]
    fn insufficient_quadrature_is_rejected() {
        let out = DirectionGrid::quadrature(20).unwrap();
        let m = mie_far_field_matrix(1.0, &out, &DirectionGrid::cube26()).unwrap();
        assert!(matches!(compute_coefficients(&m, 0, 11), Err(LabError::Resolution(_))));
        let cube = mie_far_field_matrix(1.0, &DirectionGrid::cube26(), &DirectionGrid::cube26()).unwrap();
        assert!(compute_coefficients(&cube, 0, 2).is_err());
    }

    #[test]
    fn real_points_reproduce_grid_values() {
        let alpha = Vector3::z();
        let out = DirectionGrid::quadrature(60).unwrap();
        let inc = DirectionGrid::from_directions("z", vec![alpha]).unwrap();
        let m = mie_far_field_matrix(1.0, &out, &inc).unwrap();
        let c = compute_coefficients(&m, 0, 30).unwrap();
        for p in [0, 17, 400, 1500] {
            let th = out.directions[p].map(|v| Complex64::new(v, 0.0));
            let v = continue_far_field(&c, &th).unwrap();
            assert!((v.value - m.values[(p, 0)]).norm() < 1e-12);
            assert!(!v.warning);
        }
    }

    #[test]
    fn complex_continuation_matches_series() {
        let alpha = Vector3::new(0.0, 0.6, 0.8);
        let c = ball_coeffs(1.0, &alpha);
        for (lam, t) in [(Vector3::new(1.0, 0.5, 0.0), 0.5), (Vector3::new(0.0, 3.0, 0.0), 2.0)] {
            let pair = make_direction_pair(&lam, t).unwrap();
            let v = continue_far_field(&c, &pair.theta_prime).unwrap();
            let exact = mie_far_field_complex(1.0, &pair.theta_prime, &alpha).unwrap();
            assert!((v.value - exact).norm() <= 1e-6f64.max(v.bound), "{} vs {exact} bound {}", v.value, v.bound);
        }
    }

    #[test]
    fn bound_grows_with_imaginary_part() {
        let c = ball_coeffs(1.0, &Vector3::z());
        let lam = Vector3::new(0.0, 1.0, 1.0);
        let mut prev = 0.0;
        for t in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
            let pair = make_direction_pair(&lam, t).unwrap();
            let b = continue_far_field(&c, &pair.theta_prime).unwrap().bound;
            assert!(b > prev, "t={t}");
            prev = b;
        }
    }

    #[test]
    fn off_variety_is_rejected() {
        let c = ball_coeffs(1.0, &Vector3::z());
        let bad = Vector3::new(Complex64::new(1.0, 0.1), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        assert!(matches!(continue_far_field(&c, &bad), Err(LabError::OffVariety { .. })));
    }

    #[test]
    fn delta_metric_properties() {
        let g = DirectionGrid::cube26();
        let m1 = mie_far_field_matrix(1.0, &g, &g).unwrap();
        let m2 = mie_far_field_matrix(1.001, &g, &g).unwrap();
        let m3 = mie_far_field_matrix(1.0005, &g, &g).unwrap();
        assert_eq!(delta_metric(&m1, &m1).unwrap().value, 0.0);
        let d12 = delta_metric(&m1, &m2).unwrap().value;
        assert_eq!(d12, delta_metric(&m2, &m1).unwrap().value);
        let d13 = delta_metric(&m1, &m3).unwrap().value;
        let d32 = delta_metric(&m3, &m2).unwrap().value;
        assert!(d12 > 0.0 && d13 < d12);
        assert!(d12 <= d13 + d32 + 1e-15);
        let other = mie_far_field_matrix(1.0, &DirectionGrid::quadrature(3).unwrap(), &g).unwrap();
        assert!(matches!(delta_metric(&m1, &other), Err(LabError::GridMismatch(_))));
    }

    #[test]
    fn coefficient_csv_has_header_and_rows() {
        let c = ball_coeffs(0.5, &Vector3::x());
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# {"));
        assert_eq!(lines[1], "l,m,re,im");
        assert_eq!(lines.len(), 2 + num_harmonics(30));
    }
}
