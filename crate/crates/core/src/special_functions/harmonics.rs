//! Orthonormal spherical harmonics on S² and their continuation to complex arguments.
//!
//! Every harmonic is evaluated through its homogeneous harmonic polynomial
//! (solid harmonic) `p_l^m(x) = |x|^l Y_l^m(x/|x|)`. For `m >= 0`
//!
//! ```text
//! p_l^m(x) = (-1)^m (x1 + i x2)^m Q_l^m(x3, x·x)
//! p_l^-m(x) = (x1 - i x2)^m Q_l^m(x3, x·x)
//! ```
//!
//! where `Q_l^m` is a polynomial in `x3` and `s = x·x` built by the normalized
//! associated-Legendre recurrence. The Condon–Shortley phase is included, so
//! `Y_l^{-m} = (-1)^m conj(Y_l^m)` on the real sphere. Since the polynomial
//! only ever sees `x·x` through the bilinear product, the same code continues
//! `Y_l^m` to the complex quadric `θ·θ = 1`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Default maximum degree accepted by the single-harmonic evaluators.
pub const DEFAULT_L_MAX: usize = 40;

/// Tolerance on `|x| - 1` (real) or `|θ·θ - 1|` (complex) accepted as "on the sphere".
pub const UNIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarmonicIndex {
    degree: usize,
    order: i64,
}

impl HarmonicIndex {
    pub fn new(degree: usize, order: i64) -> Result<Self> {
        if order.unsigned_abs() as usize > degree {
            return Err(LabError::InvalidIndex { degree, order });
        }
        Ok(Self { degree, order })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    /// Position in the `(l, m)` ordering `0,0 | 1,-1 | 1,0 | 1,1 | 2,-2 ...`.
    pub fn linear(&self) -> usize {
        lm_index(self.degree, self.order)
    }

    pub fn from_linear(k: usize) -> Self {
        let l = (k as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= k { l + 1 } else { l };
        let l = if l * l > k { l - 1 } else { l };
        let m = k as i64 - (l * l + l) as i64;
        Self { degree: l, order: m }
    }
}

#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

#[inline]
pub fn num_harmonics(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Arithmetic needed by the solid-harmonic recurrence.
pub trait HarmonicScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn scale(self, f: f64) -> Self;
    fn mul_i(self) -> Self;
}

impl HarmonicScalar for Complex64 {
    #[inline]
    fn constant(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    #[inline]
    fn scale(self, f: f64) -> Self {
        self * f
    }
    #[inline]
    fn mul_i(self) -> Self {
        Complex64::new(-self.im, self.re)
    }
}

/// Complex value together with its gradient with respect to the three
/// Cartesian inputs (forward-mode differentiation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradDual {
    pub value: Complex64,
    pub grad: [Complex64; 3],
}

impl GradDual {
    pub fn variable(v: f64, axis: usize) -> Self {
        let mut grad = [Complex64::new(0.0, 0.0); 3];
        grad[axis] = Complex64::new(1.0, 0.0);
        Self { value: Complex64::new(v, 0.0), grad }
    }
}

impl Add for GradDual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1], self.grad[2] + o.grad[2]],
        }
    }
}

impl Sub for GradDual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self {
            value: self.value - o.value,
            grad: [self.grad[0] - o.grad[0], self.grad[1] - o.grad[1], self.grad[2] - o.grad[2]],
        }
    }
}

impl Mul for GradDual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.value, o.value);
        Self {
            value: a * b,
            grad: [
                self.grad[0] * b + a * o.grad[0],
                self.grad[1] * b + a * o.grad[1],
                self.grad[2] * b + a * o.grad[2],
            ],
        }
    }
}

impl Neg for GradDual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { value: -self.value, grad: [-self.grad[0], -self.grad[1], -self.grad[2]] }
    }
}

impl HarmonicScalar for GradDual {
    fn constant(v: f64) -> Self {
        Self { value: Complex64::new(v, 0.0), grad: [Complex64::new(0.0, 0.0); 3] }
    }
    fn scale(self, f: f64) -> Self {
        Self { value: self.value * f, grad: [self.grad[0] * f, self.grad[1] * f, self.grad[2] * f] }
    }
    fn mul_i(self) -> Self {
        Self {
            value: self.value.mul_i(),
            grad: [self.grad[0].mul_i(), self.grad[1].mul_i(), self.grad[2].mul_i()],
        }
    }
}

/// Diagonal start `Q_m^m` and the recurrence coefficients, shared by all evaluators.
fn diagonal_start(lmax: usize) -> Vec<f64> {
    let mut q = Vec::with_capacity(lmax + 1);
    q.push(1.0 / (4.0 * PI).sqrt());
    for m in 1..=lmax {
        let prev = q[m - 1];
        q.push(prev * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt());
    }
    q
}

#[inline]
fn recurrence_ab(l: usize, m: usize) -> (f64, f64) {
    let (lf, mf) = (l as f64, m as f64);
    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
    let b = ((2.0 * lf + 1.0) * ((lf - 1.0) * (lf - 1.0) - mf * mf)
        / ((2.0 * lf - 3.0) * (lf * lf - mf * mf)))
        .sqrt();
    (a, b)
}

/// Solid harmonics `p_l^m(x)` for all `l <= lmax`, indexed by [`lm_index`].
pub fn solid_harmonics<T: HarmonicScalar>(lmax: usize, x: [T; 3]) -> Vec<T> {
    let n = num_harmonics(lmax);
    let zero = T::constant(0.0);
    let mut out = vec![zero; n];
    let s = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let z = x[2];
    let plus = x[0] + x[1].mul_i();
    let minus = x[0] - x[1].mul_i();
    let diag = diagonal_start(lmax);

    let mut pow_plus = T::constant(1.0);
    let mut pow_minus = T::constant(1.0);
    for m in 0..=lmax {
        if m > 0 {
            pow_plus = pow_plus * plus;
            pow_minus = pow_minus * minus;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut q2 = T::constant(diag[m]);
        let mut q1 = zero;
        for l in m..=lmax {
            let q = if l == m {
                q2
            } else if l == m + 1 {
                q1 = z.scale(((2 * m + 3) as f64).sqrt() * diag[m]);
                q1
            } else {
                let (a, b) = recurrence_ab(l, m);
                let q = (z * q1).scale(a) - (s * q2).scale(b);
                q2 = q1;
                q1 = q;
                q
            };
            out[lm_index(l, m as i64)] = (pow_plus * q).scale(sign);
            if m > 0 {
                out[lm_index(l, -(m as i64))] = pow_minus * q;
            }
        }
    }
    out
}

/// All `Y_l^m(x)` for `l <= lmax` at a real point of the unit sphere.
///
/// No normalization of `x` is performed; callers pass unit vectors.
pub fn harmonics_real_into(lmax: usize, x: &Vector3<f64>, out: &mut [Complex64]) {
    debug_assert!(out.len() >= num_harmonics(lmax));
    let s = x.norm_squared();
    let z = x[2];
    let plus = Complex64::new(x[0], x[1]);
    let mut pow = Complex64::new(1.0, 0.0);
    let mut diag = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pow *= plus;
            diag *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut q2 = diag;
        let mut q1 = 0.0;
        for l in m..=lmax {
            let q = if l == m {
                q2
            } else if l == m + 1 {
                q1 = ((2 * m + 3) as f64).sqrt() * z * diag;
                q1
            } else {
                let (a, b) = recurrence_ab(l, m);
                let q = a * z * q1 - b * s * q2;
                q2 = q1;
                q1 = q;
                q
            };
            let ylm = pow * (sign * q);
            out[lm_index(l, m as i64)] = ylm;
            if m > 0 {
                out[lm_index(l, -(m as i64))] = pow.conj() * q;
            }
        }
    }
}

pub fn harmonics_real(lmax: usize, x: &Vector3<f64>) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); num_harmonics(lmax)];
    harmonics_real_into(lmax, x, &mut out);
    out
}

/// All continued harmonics `p_l^m(θ)` for `l <= lmax` at a complex point.
///
/// On the variety `θ·θ = 1` these are the analytic continuations of `Y_l^m`.
pub fn harmonics_complex(lmax: usize, theta: &Vector3<Complex64>) -> Vec<Complex64> {
    solid_harmonics(lmax, [theta[0], theta[1], theta[2]])
}

/// Bilinear (non-Hermitian) product `a·b`.
#[inline]
pub fn bilinear_dot(a: &Vector3<Complex64>, b: &Vector3<Complex64>) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn check_degree(idx: HarmonicIndex) -> Result<()> {
    if idx.degree() > DEFAULT_L_MAX {
        return Err(LabError::UnsupportedDegree { degree: idx.degree(), max: DEFAULT_L_MAX });
    }
    Ok(())
}

/// Orthonormal `Y_l^m(x)` at a unit vector.
pub fn sph_harmonic(idx: HarmonicIndex, x: &Vector3<f64>) -> Result<Complex64> {
    check_degree(idx)?;
    let r = x.norm();
    if (r - 1.0).abs() > UNIT_TOLERANCE {
        return Err(LabError::Domain(format!("|x| = {r} is not 1")));
    }
    let all = harmonics_real(idx.degree(), x);
    Ok(all[idx.linear()])
}

/// `Y_l^m` continued to a point of `M = {θ ∈ ℂ³ : θ·θ = 1}`.
pub fn sph_harmonic_complex(idx: HarmonicIndex, theta: &Vector3<Complex64>) -> Result<Complex64> {
    check_degree(idx)?;
    let residual = (bilinear_dot(theta, theta) - 1.0).norm();
    if residual > UNIT_TOLERANCE {
        return Err(LabError::OffVariety { residual });
    }
    let all = harmonics_complex(idx.degree(), theta);
    Ok(all[idx.linear()])
}

/// Real orthonormal harmonics: `Y_l0`, `√2 (-1)^m Re Y_lm` (m > 0), `√2 (-1)^m Im Y_l|m|` (m < 0).
pub fn real_harmonics(lmax: usize, x: &Vector3<f64>) -> Vec<f64> {
    let c = harmonics_real(lmax, x);
    complex_to_real_basis(lmax, &c, |z| z).into_iter().map(|z| z.re).collect()
}

fn complex_to_real_basis<T: Copy, R>(lmax: usize, c: &[T], f: impl Fn(T) -> R) -> Vec<R>
where
    R: RealPart,
{
    let mut out = Vec::with_capacity(num_harmonics(lmax));
    for l in 0..=lmax {
        for m in -(l as i64)..=(l as i64) {
            let mm = m.unsigned_abs() as i64;
            let y = f(c[lm_index(l, mm)]);
            let sign = if mm % 2 == 0 { 1.0 } else { -1.0 };
            out.push(match m.cmp(&0) {
                std::cmp::Ordering::Equal => y.re_part(1.0),
                std::cmp::Ordering::Greater => y.re_part(std::f64::consts::SQRT_2 * sign),
                std::cmp::Ordering::Less => y.im_part(std::f64::consts::SQRT_2 * sign),
            });
        }
    }
    out
}

trait RealPart: Sized {
    fn re_part(self, f: f64) -> Self;
    fn im_part(self, f: f64) -> Self;
}

impl RealPart for Complex64 {
    fn re_part(self, f: f64) -> Self {
        Complex64::new(self.re * f, 0.0)
    }
    fn im_part(self, f: f64) -> Self {
        Complex64::new(self.im * f, 0.0)
    }
}

impl RealPart for GradDual {
    fn re_part(self, f: f64) -> Self {
        let g = |z: Complex64| Complex64::new(z.re * f, 0.0);
        Self { value: g(self.value), grad: [g(self.grad[0]), g(self.grad[1]), g(self.grad[2])] }
    }
    fn im_part(self, f: f64) -> Self {
        let g = |z: Complex64| Complex64::new(z.im * f, 0.0);
        Self { value: g(self.value), grad: [g(self.grad[0]), g(self.grad[1]), g(self.grad[2])] }
    }
}

/// Real harmonics and their surface gradients at a unit vector.
///
/// The surface gradient of `S_lm` is `∇p - l p x` (Euler's identity for the
/// degree-`l` homogeneous solid harmonic `p`).
pub fn real_harmonics_with_gradient(lmax: usize, x: &Vector3<f64>) -> (Vec<f64>, Vec<Vector3<f64>>) {
    let duals = [GradDual::variable(x[0], 0), GradDual::variable(x[1], 1), GradDual::variable(x[2], 2)];
    let solid = solid_harmonics(lmax, duals);
    let real = complex_to_real_basis(lmax, &solid, |z| z);
    let mut values = Vec::with_capacity(real.len());
    let mut grads = Vec::with_capacity(real.len());
    for l in 0..=lmax {
        for m in -(l as i64)..=(l as i64) {
            let d = real[lm_index(l, m)];
            let p = d.value.re;
            let g = Vector3::new(d.grad[0].re, d.grad[1].re, d.grad[2].re);
            values.push(p);
            grads.push(g - x * (l as f64 * p));
        }
    }
    (values, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::quadrature::build_sphere_quadrature;

    fn c3(a: Complex64, b: Complex64, c: Complex64) -> Vector3<Complex64> {
        Vector3::new(a, b, c)
    }

    #[test]
    fn constant_harmonic() {
        let idx = HarmonicIndex::new(0, 0).unwrap();
        let x = Vector3::new(0.3, -0.4, 0.5).normalize();
        let y = sph_harmonic(idx, &x).unwrap();
        assert!((y - Complex64::new(1.0 / (4.0 * PI).sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn axis_value_of_z_harmonic() {
        let idx = HarmonicIndex::new(1, 0).unwrap();
        let y = sph_harmonic(idx, &Vector3::z()).unwrap();
        assert!((y.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(y.im.abs() < 1e-15);
    }

    #[test]
    fn known_closed_forms() {
        // Y_1^1 = -sqrt(3/8π) sinθ e^{iφ}, Y_2^0 = sqrt(5/16π)(3cos²θ - 1)
        let (th, ph) = (0.7_f64, 1.9_f64);
        let x = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let y11 = sph_harmonic(HarmonicIndex::new(1, 1).unwrap(), &x).unwrap();
        let expect = -(3.0 / (8.0 * PI)).sqrt() * th.sin() * Complex64::from_polar(1.0, ph);
        assert!((y11 - expect).norm() < 1e-14);
        let y20 = sph_harmonic(HarmonicIndex::new(2, 0).unwrap(), &x).unwrap();
        let expect = (5.0 / (16.0 * PI)).sqrt() * (3.0 * th.cos().powi(2) - 1.0);
        assert!((y20.re - expect).abs() < 1e-14);
        let y3m2 = sph_harmonic(HarmonicIndex::new(3, -2).unwrap(), &x).unwrap();
        let expect = 0.25 * (105.0 / (2.0 * PI)).sqrt()
            * th.sin().powi(2)
            * th.cos()
            * Complex64::from_polar(1.0, -2.0 * ph);
        assert!((y3m2 - expect).norm() < 1e-14);
    }

    #[test]
    fn conjugate_symmetry() {
        let x = Vector3::new(-0.2, 0.7, 0.1).normalize();
        let all = harmonics_real(12, &x);
        for l in 0..=12usize {
            for m in 1..=(l as i64) {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let lhs = all[lm_index(l, -m)];
                let rhs = all[lm_index(l, m)].conj() * sign;
                assert!((lhs - rhs).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let lmax = 10;
        let q = build_sphere_quadrature(2 * lmax).unwrap();
        let n = num_harmonics(lmax);
        let mut gram = vec![Complex64::new(0.0, 0.0); n * n];
        for (x, w) in q.nodes.iter().zip(&q.weights) {
            let y = harmonics_real(lmax, x);
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += y[a] * y[b].conj() * *w;
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * n + b] - expect).norm() < 1e-10, "({a},{b})");
            }
        }
    }

    #[test]
    fn y21_orthonormality_by_quadrature() {
        let q = build_sphere_quadrature(8).unwrap();
        let idx = HarmonicIndex::new(2, 1).unwrap();
        let s: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(x, w)| sph_harmonic(idx, x).unwrap().norm_sqr() * w)
            .sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn complex_restriction_matches_real() {
        let x = Vector3::new(0.1, -0.9, 0.3).normalize();
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let a = harmonics_real(DEFAULT_L_MAX, &x);
        let b = harmonics_complex(DEFAULT_L_MAX, &xc);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
        let zc = Vector3::z().map(|v: f64| Complex64::new(v, 0.0));
        for l in 0..=DEFAULT_L_MAX {
            for m in -(l as i64)..=(l as i64) {
                let idx = HarmonicIndex::new(l, m).unwrap();
                let u = sph_harmonic(idx, &Vector3::z()).unwrap();
                let v = sph_harmonic_complex(idx, &zc).unwrap();
                assert!((u - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_one_continuation() {
        let t: f64 = 0.5;
        let theta = c3(
            Complex64::new(0.0, t),
            Complex64::new(0.0, 0.0),
            Complex64::new((1.0 + t * t).sqrt(), 0.0),
        );
        let y = sph_harmonic_complex(HarmonicIndex::new(1, 0).unwrap(), &theta).unwrap();
        let expect = (3.0 / (4.0 * PI)).sqrt() * 1.25_f64.sqrt();
        assert!((y - expect).norm() < 1e-14);
        let y0 = sph_harmonic_complex(HarmonicIndex::new(0, 0).unwrap(), &theta).unwrap();
        assert!((y0 - 1.0 / (4.0 * PI).sqrt()).norm() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(HarmonicIndex::new(2, 3).is_err());
        let idx = HarmonicIndex::new(DEFAULT_L_MAX + 1, 0).unwrap();
        assert!(matches!(sph_harmonic(idx, &Vector3::z()), Err(LabError::UnsupportedDegree { .. })));
        let off = c3(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.5, 0.0));
        let idx = HarmonicIndex::new(1, 0).unwrap();
        assert!(matches!(sph_harmonic_complex(idx, &off), Err(LabError::OffVariety { .. })));
        assert!(sph_harmonic(idx, &Vector3::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn linear_index_roundtrip() {
        for k in 0..500 {
            assert_eq!(HarmonicIndex::from_linear(k).linear(), k);
        }
    }

    #[test]
    fn surface_gradient_matches_finite_difference() {
        let x = Vector3::new(0.3, 0.5, -0.8).normalize();
        let (v, g) = real_harmonics_with_gradient(5, &x);
        let direct = real_harmonics(5, &x);
        for (a, b) in v.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-13);
        }
        // tangent direction
        let t = x.cross(&Vector3::new(1.0, 0.0, 0.0)).normalize();
        let h = 1e-6;
        let xp = (x + t * h).normalize();
        let xm = (x - t * h).normalize();
        let (fp, fm) = (real_harmonics(5, &xp), real_harmonics(5, &xm));
        for k in 0..v.len() {
            let fd = (fp[k] - fm[k]) / (2.0 * h);
            assert!((fd - g[k].dot(&t)).abs() < 1e-7, "k = {k}");
            assert!(g[k].dot(&x).abs() < 1e-12);
        }
    }
}
