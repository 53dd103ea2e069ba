use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::special_functions::{
    build_sphere_quadrature, gauss_legendre_interval, hankel_large_order_asymptotic, sph_harmonic, spherical_hankel_h1,
    HarmonicIndex,
};

/// Fixed interval expected to contain `‖v_ℓ‖_{L²(A)} · a₂^{ℓ+1}` for `ℓ ∈ {10, 20, 40}`, `a₂ = 1.5`, `b = 3`.
pub const SCALED_PRODUCT_INTERVAL: (f64, f64) = (0.1, 1.0);

const PANELS: usize = 32;
const NODES_PER_PANEL: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Row {
    pub ell: usize,
    /// `‖v_ℓ‖_{L²(S²)}` on the unit sphere.
    pub boundary_norm: f64,
    /// `‖v_ℓ‖_{L²(a₂ ≤ |x| ≤ b)}`.
    pub annulus_norm: f64,
    /// `annulus_norm · a₂^{ℓ+1}`.
    pub scaled_product: f64,
    /// `annulus_norm^{1/ℓ}`, which tends to `1/a₂`.
    pub root_rate: f64,
    /// `|asymptotic form / h_ℓ(1)|` at `r = 1`.
    pub asymptotic_ratio: f64,
}

/// `∫_{a₂}^{b} |h_ℓ(r)/h_ℓ(1)|² r² dr` by composite Gauss–Legendre.
pub fn annulus_norm(ell: usize, a2: f64, b: f64) -> Result<f64> {
    let h1 = spherical_hankel_h1(ell, 1.0)?;
    let width = (b - a2) / PANELS as f64;
    let mut acc = 0.0;
    for p in 0..PANELS {
        let lo = a2 + p as f64 * width;
        let (x, w) = gauss_legendre_interval(NODES_PER_PANEL, lo, lo + width);
        for (r, wr) in x.iter().zip(&w) {
            acc += (spherical_hankel_h1(ell, *r)? / h1).norm_sqr() * r * r * wr;
        }
    }
    Ok(acc.sqrt())
}

/// `‖(h_ℓ(r)/h_ℓ(1)) Y_ℓ0‖` on `|x| = 1`, with the harmonic norm computed by quadrature.
pub fn boundary_norm(ell: usize) -> Result<f64> {
    let q = build_sphere_quadrature(2 * ell + 2)?;
    let idx = HarmonicIndex::new(ell, 0)?;
    let mut acc = 0.0;
    for (x, w) in q.nodes.iter().zip(&q.weights) {
        acc += sph_harmonic(idx, x)?.norm_sqr() * w;
    }
    let h1 = spherical_hankel_h1(ell, 1.0)?;
    Ok((h1 / h1).norm() * acc.sqrt())
}

pub fn example1_demo(ells: &[usize], a2: f64, b: f64) -> Result<Vec<Example1Row>> {
    if !(a2 > 1.0 && b > a2 && b.is_finite()) {
        return Err(LabError::Validation(format!("need 1 < a2 < b, got a2 = {a2}, b = {b}")));
    }
    ells.iter()
        .map(|&ell| {
            if ell == 0 {
                return Err(LabError::Validation("ℓ must be positive".into()));
            }
            let annulus = annulus_norm(ell, a2, b)?;
            let exact = spherical_hankel_h1(ell, 1.0)?;
            Ok(Example1Row {
                ell,
                boundary_norm: boundary_norm(ell)?,
                annulus_norm: annulus,
                scaled_product: annulus * a2.powi(ell as i32 + 1),
                root_rate: annulus.powf(1.0 / ell as f64),
                asymptotic_ratio: (hankel_large_order_asymptotic(ell, 1.0)? / exact).norm(),
            })
        })
        .collect()
}

/// CSV `ell,boundary_norm,annulus_norm,scaled_product,root_rate,asymptotic_ratio`.
pub fn write_example1_csv<W: Write>(rows: &[Example1Row], mut w: W) -> Result<()> {
    writeln!(w, "ell,boundary_norm,annulus_norm,scaled_product,root_rate,asymptotic_ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.ell, r.boundary_norm, r.annulus_norm, r.scaled_product, r.root_rate, r.asymptotic_ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_norm_is_one() {
        for r in example1_demo(&[1, 10, 20, 40], 1.5, 3.0).unwrap() {
            assert!((r.boundary_norm - 1.0).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn annulus_norm_against_power_law() {
        // h_ℓ(r) ≈ h_ℓ(1) r^{−ℓ−1} for large ℓ, so the integral tends to (a₂^{1−2ℓ} − b^{1−2ℓ})/(2ℓ−1)
        for ell in [20usize, 40] {
            let n = annulus_norm(ell, 1.5, 3.0).unwrap();
            let k = 2.0 * ell as f64 - 1.0;
            let approx = ((1.5f64.powf(-k) - 3f64.powf(-k)) / k).sqrt();
            assert!((n / approx - 1.0).abs() < 0.1, "ℓ={ell}: {n} vs {approx}");
        }
        let n10 = annulus_norm(10, 1.5, 3.0).unwrap();
        assert!(n10 <= 1.5f64.powi(-11));
    }

    #[test]
    fn quadrature_is_converged() {
        // exact for ℓ = 1: |h₁(r)|² = (1 + r²)/r⁴, so ∫ |h₁(r)/h₁(1)|² r² dr = ∫ (1 + r²)/(2r²) dr
        let n = annulus_norm(1, 1.5, 3.0).unwrap();
        let exact = 0.5 * ((1.0 / 1.5 - 1.0 / 3.0) + 1.5);
        assert!((n * n - exact).abs() < 1e-13);
    }

    #[test]
    fn scaled_product_and_root_rate() {
        let rows = example1_demo(&[10, 20, 40], 1.5, 3.0).unwrap();
        let (lo, hi) = SCALED_PRODUCT_INTERVAL;
        assert!(rows.iter().all(|r| r.scaled_product > lo && r.scaled_product < hi));
        assert!((rows[2].root_rate * 1.5 - 1.0).abs() < 0.05);
        assert!((rows[2].asymptotic_ratio - 1.0).abs() < 0.02);
        let mut buf = Vec::new();
        write_example1_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn invalid_parameters() {
        assert!(example1_demo(&[10], 1.0, 3.0).is_err());
        assert!(example1_demo(&[10], 2.0, 1.5).is_err());
        assert!(example1_demo(&[0], 1.5, 3.0).is_err());
    }
}
