//! Dirichlet eigenpairs of the p-Laplacian on planar domains.
//!
//! P1 finite elements on structured triangulations, an augmented Lagrangian
//! inverse of `−Δ_p`, constrained descent for the first eigenpair and a
//! constrained mountain pass for the second one, plus a weighted 1D method for
//! radial problems on the disk, closed-form asymptotic limits and symmetry
//! analysis.

pub mod analysis;
pub mod cdm;
pub mod cmpa;
pub mod descent;
pub mod error;
pub mod fem;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod plap_inverse;
pub mod radial;
pub mod reference;
pub mod solve;

pub use error::{Error, Result};
pub use fem::{DualVector, FeFunction, FeSpace, VariationalSpace};
pub use mesh::{BoundaryTag, CutAxis, CutCondition, DomainSpec, Mesh};
