use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::experiment::StabilityRecord;
use crate::error::{LabError, Result};

/// Minimum number of usable records for a fit.
pub const MIN_FIT_RECORDS: usize = 5;

/// Upper end `e^{−e}` of the δ-domain where `ln|ln δ| > 1`.
pub fn delta_domain_limit() -> f64 {
    (-E).exp()
}

/// `N(δ) = |ln δ| / ln|ln δ|` for `0 < δ < e^{−e}`.
pub fn n_of_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < delta_domain_limit()) {
        return Err(LabError::Domain(format!("N(δ) needs 0 < δ < e^-e, got {delta}")));
    }
    let l = delta.ln().abs();
    Ok(l / l.ln())
}

/// `ln|ln δ| / |ln δ|`, the abscissa of the rate law.
pub fn rate_variable(delta: f64) -> Result<f64> {
    Ok(1.0 / n_of_delta(delta)?)
}

/// Least-squares fit of `ρ = c₁ (ln|ln δ|/|ln δ|)^{c₂}` in log–log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c1_hat: f64,
    pub c2_hat: f64,
    /// Root-mean-square residual of `ln ρ`.
    pub residual: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub decades: f64,
    /// Set when the δ-range spans fewer than two decades.
    pub low_confidence: bool,
    pub records_used: usize,
    pub notes: Vec<String>,
}

pub fn fit_rate(records: &[StabilityRecord]) -> Result<RateFit> {
    let mut notes = Vec::new();
    let mut pts = Vec::new();
    let mut deltas = Vec::new();
    for r in records {
        if !r.trustworthy {
            continue;
        }
        let (Some(delta), Some(rho)) = (r.delta, r.rho_one_sided) else { continue };
        match rate_variable(delta) {
            Ok(x) if rho > 0.0 => {
                pts.push((x.ln(), rho.ln()));
                deltas.push(delta);
            }
            Ok(_) => notes.push(format!("amplitude {}: ρ = {rho} excluded (not positive)", r.amplitude)),
            Err(_) => notes.push(format!("amplitude {}: δ = {delta:e} outside (0, e^-e), excluded", r.amplitude)),
        }
    }
    if pts.len() < MIN_FIT_RECORDS {
        return Err(LabError::InsufficientRecords { found: pts.len(), needed: MIN_FIT_RECORDS });
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    if sxx == 0.0 {
        return Err(LabError::Numerical("all usable records share one δ".into()));
    }
    let c2 = sxy / sxx;
    let ln_c1 = my - c2 * mx;
    let residual = (pts.iter().map(|(x, y)| (y - ln_c1 - c2 * x).powi(2)).sum::<f64>() / n).sqrt();
    let delta_min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let delta_max = deltas.iter().copied().fold(0.0, f64::max);
    let decades = (delta_max / delta_min).log10();
    if decades < 2.0 {
        notes.push(format!("δ-range spans {decades:.2} decades (< 2): low confidence"));
    }
    Ok(RateFit {
        c1_hat: ln_c1.exp(),
        c2_hat: c2,
        residual,
        delta_min,
        delta_max,
        decades,
        low_confidence: decades < 2.0,
        records_used: pts.len(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c1: f64, c2: f64, deltas: &[f64]) -> Vec<StabilityRecord> {
        deltas
            .iter()
            .map(|&d| {
                let rho = c1 * rate_variable(d).unwrap().powf(c2);
                StabilityRecord::synthetic(d, d, rho)
            })
            .collect()
    }

    #[test]
    fn closed_form_values() {
        let d = (-E * E).exp();
        assert!((n_of_delta(d).unwrap() - E * E / 2.0).abs() < 1e-12);
        let v = n_of_delta(1e-8).unwrap();
        let l = 8.0 * 10f64.ln();
        assert!((v - l / l.ln()).abs() < 1e-12);
        assert!((v - 6.3225).abs() < 1e-4);
        assert!(n_of_delta(1e-10).unwrap() > n_of_delta(1e-6).unwrap());
    }

    #[test]
    fn domain_is_enforced() {
        for d in [0.0, -1.0, 0.1, delta_domain_limit(), f64::NAN] {
            assert!(matches!(n_of_delta(d), Err(LabError::Domain(_))), "{d}");
        }
        assert!(n_of_delta(delta_domain_limit() * 0.999).is_ok());
    }

    #[test]
    fn synthetic_law_is_recovered() {
        let deltas: Vec<f64> = (2..=12).map(|k| 10f64.powi(-k)).collect();
        let fit = fit_rate(&synthetic(2.0, 3.0, &deltas)).unwrap();
        assert!((fit.c2_hat - 3.0).abs() < 1e-6 && (fit.c1_hat - 2.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual < 1e-10 && !fit.low_confidence && fit.records_used == 11);
    }

    #[test]
    fn disjoint_ranges_agree() {
        let a: Vec<f64> = (3..=8).map(|k| 10f64.powi(-k)).collect();
        let b: Vec<f64> = (20..=30).map(|k| 10f64.powi(-k)).collect();
        let fa = fit_rate(&synthetic(0.7, 1.5, &a)).unwrap();
        let fb = fit_rate(&synthetic(0.7, 1.5, &b)).unwrap();
        assert!((fa.c2_hat - fb.c2_hat).abs() < 1e-6);
    }

    #[test]
    fn exclusions_and_errors() {
        let mut recs = synthetic(1.0, 2.0, &[1e-3, 1e-4, 1e-5, 1e-6]);
        assert!(matches!(fit_rate(&recs), Err(LabError::InsufficientRecords { found: 4, needed: 5 })));
        recs.push(StabilityRecord::synthetic(0.5, 0.5, 0.1));
        let e = fit_rate(&recs).unwrap_err();
        assert!(matches!(e, LabError::InsufficientRecords { found: 4, .. }));
        recs.push(StabilityRecord::synthetic(1e-7, 1e-7, 1.0 * rate_variable(1e-7).unwrap().powi(2)));
        let fit = fit_rate(&recs).unwrap();
        assert_eq!(fit.records_used, 5);
        assert!(fit.notes.iter().any(|n| n.contains("outside")));
        let narrow = synthetic(1.0, 2.0, &[1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2]);
        assert!(fit_rate(&narrow).unwrap().low_confidence);
    }
}
