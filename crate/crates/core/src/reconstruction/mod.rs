//! Oracle-mode recovery of the Fourier transform of the obstacle indicator from Herglotz
//! densities, the exact surface/volume identity behind it, λ-grid scans and inversion.

mod density;
mod estimate;
mod identity;
mod inversion;
mod spectrum;

pub use density::{DensityOperator, HerglotzDensity, BETA_MAX_REL, BETA_MIN_REL, BISECTION_STEPS};
pub use estimate::{DataPath, SpectralEstimate, OracleSetup, ReconstructionConfig};
pub use identity::{
    ball_transform, volume_identity_check, identity_with, target_trace, IdentityQuadrature, IdentityReport,
    VolumeQuadrature,
};
pub use inversion::{
    inverse_transform, invert_to_indicator, symmetry_check, InversionConfig, InversionReport, Reconstruction,
    SymmetryReport, VoxelIndicator,
};
pub use spectrum::{spectrum_scan, ScanConfig, SpectrumGrid, SpectrumPoint};
