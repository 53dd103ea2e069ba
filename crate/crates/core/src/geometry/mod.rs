//! Star-shaped obstacles: radial representation, surface quadrature,
//! admissibility and Hausdorff distances.

pub mod hausdorff;
pub mod surface;

pub use hausdorff::{hausdorff_distance, tangent_frame, HausdorffConfig, HausdorffEstimate};
pub use surface::{
    AdmissibilityReport, StarSurface, SurfaceFile, SurfacePoint, SurfaceQuadrature, DEFAULT_L_GEOM,
};
