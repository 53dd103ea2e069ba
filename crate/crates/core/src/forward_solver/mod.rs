//! Exterior Dirichlet problem at `k = 1`: Mie series for balls, a combined-field
//! boundary integral solver for star-shaped obstacles, far-field matrices.

pub mod bie;
pub mod far_field;
pub mod mie;
pub mod trace;

pub use bie::{bie_solve, BieSolver, ForwardConfig};
pub use far_field::{
    assemble_far_field_matrix, assemble_with_solver, mie_far_field_matrix, DirectionGrid, FarFieldDiagnostics, FarFieldMatrix,
};
pub use mie::{mie_far_field, mie_far_field_complex, mie_un_trace};
pub use trace::{far_field_from_trace, far_field_real, optical_theorem_residual, ScatteringSolutionTrace};
