//! Spherical harmonics, spherical Bessel/Hankel functions and quadrature on the sphere.

pub mod bessel;
pub mod harmonics;
pub mod quadrature;

pub use bessel::{
    hankel_large_order_asymptotic, spherical_bessel_j, spherical_bessel_j_all, spherical_bessel_y,
    spherical_bessel_y_all, spherical_hankel_h1, spherical_hankel_h1_all,
};
pub use harmonics::{
    bilinear_dot, harmonics_complex, harmonics_real, harmonics_real_into, lm_index, num_harmonics,
    real_harmonics, real_harmonics_with_gradient, sph_harmonic, sph_harmonic_complex, HarmonicIndex,
    DEFAULT_L_MAX,
};
pub use quadrature::{build_sphere_quadrature, gauss_legendre, gauss_legendre_interval, SphereQuadrature};
