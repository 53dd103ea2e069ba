//! Spherical Bessel and Hankel functions of real positive argument.

use std::f64::consts::E;

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Largest order accepted by the Bessel routines.
pub const MAX_BESSEL_ORDER: usize = 200;

fn check(lmax: usize, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(LabError::Domain(format!("spherical Bessel argument x = {x} must be > 0")));
    }
    if lmax > MAX_BESSEL_ORDER {
        return Err(LabError::UnsupportedDegree { degree: lmax, max: MAX_BESSEL_ORDER });
    }
    Ok(())
}

/// `j_0 .. j_lmax` at `x` by Miller's downward recurrence, normalized with
/// `Σ (2n+1) j_n(x)² = 1`.
pub fn spherical_bessel_j_all(lmax: usize, x: f64) -> Result<Vec<f64>> {
    check(lmax, x)?;
    let start = lmax.max(x.ceil() as usize) + 40 + (4.0 * x.sqrt()) as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-30;
    for n in (1..=start).rev() {
        let v = (2 * n + 1) as f64 / x * vals[n] - vals[n + 1];
        vals[n - 1] = v;
        if v.abs() > 1e200 {
            for w in vals[n - 1..].iter_mut() {
                *w *= 1e-200;
            }
        }
    }
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm: f64 = peak
        * vals
            .iter()
            .enumerate()
            .map(|(n, v)| (2 * n + 1) as f64 * (v / peak) * (v / peak))
            .sum::<f64>()
            .sqrt();
    // sign fixed by j_0 = sin(x)/x when it is not tiny, else by j_1
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let sign = if j0.abs() > j1.abs() {
        (j0 * vals[0]).signum()
    } else {
        (j1 * vals[1]).signum()
    };
    vals.truncate(lmax + 1);
    Ok(vals.into_iter().map(|v| sign * v / norm).collect())
}

/// `y_0 .. y_lmax` at `x` by upward recurrence.
pub fn spherical_bessel_y_all(lmax: usize, x: f64) -> Result<Vec<f64>> {
    check(lmax, x)?;
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(-x.cos() / x);
    if lmax >= 1 {
        out.push(-x.cos() / (x * x) - x.sin() / x);
    }
    for n in 1..lmax {
        let v = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        out.push(v);
    }
    Ok(out)
}

pub fn spherical_bessel_j(l: usize, x: f64) -> Result<f64> {
    Ok(spherical_bessel_j_all(l, x)?[l])
}

pub fn spherical_bessel_y(l: usize, x: f64) -> Result<f64> {
    Ok(spherical_bessel_y_all(l, x)?[l])
}

/// `h_l^(1) = j_l + i y_l` for `l = 0 .. lmax`.
pub fn spherical_hankel_h1_all(lmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let j = spherical_bessel_j_all(lmax, x)?;
    let y = spherical_bessel_y_all(lmax, x)?;
    Ok(j.into_iter().zip(y).map(|(a, b)| Complex64::new(a, b)).collect())
}

pub fn spherical_hankel_h1(l: usize, x: f64) -> Result<Complex64> {
    Ok(spherical_hankel_h1_all(l, x)?[l])
}

/// Derivatives from `f_l' = f_{l-1} - (l+1)/x f_l`, `f_0' = -f_1`.
///
/// `values` must hold orders `0 ..= lmax + 1`; the result has `lmax + 1` entries.
pub fn derivatives<T>(values: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    let lmax = values.len() - 2;
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(-values[1]);
    for l in 1..=lmax {
        out.push(values[l - 1] - values[l] * ((l + 1) as f64 / x));
    }
    out
}

/// Large-order form `i ((l+½) r)^{-1/2} ((2l+1)/(e r))^{(2l+1)/2}` of `h_l^(1)(r)`.
///
/// It reproduces the modulus of `h_l^(1)`; the true leading phase is `-i`.
pub fn hankel_large_order_asymptotic(l: usize, r: f64) -> Result<Complex64> {
    if l < 1 {
        return Err(LabError::Domain("asymptotic form needs l >= 1".into()));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(LabError::Domain(format!("asymptotic form needs r >= 1, got {r}")));
    }
    let lf = l as f64;
    let half = lf + 0.5;
    // evaluate in log space, the power overflows for moderate l
    let log_mag = -0.5 * (half * r).ln() + half * ((2.0 * lf + 1.0) / (E * r)).ln();
    Ok(Complex64::new(0.0, log_mag.exp()))
}
