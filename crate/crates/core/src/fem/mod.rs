//! Taylor-Hood P2-P1 discretization of the Dirichlet Stokes problem.

mod assembly;
pub mod dofs;
mod export;
mod kkt;
pub mod ldl;
mod norms;
pub mod p2;
mod post;
pub mod quadrature;
mod solve;
pub mod sparse;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::mesh::{BoundaryTag, MeshError};

pub use assembly::{assemble, coord_key_of, FESystem};
pub use dofs::{BoundaryLoop, DofMap};
pub use export::{write_nodal_table, write_traction_table};
pub use norms::{h32_parts, h32_parts_of, H32Parts};
pub use post::{
    boundary_residual, cauchy_force_field, gradient_energy_on_region, residual_vector, strain_energy,
    strain_energy_of,
    velocity_gradient, velocity_in, BoundaryFunctional, Traction, REGION_SEGMENTS,
};
pub use solve::{outer_flux, solve_dirichlet, solve_with_trace, StokesField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("triangle {0} has nonpositive area")]
    InvertedTriangle(usize),
    #[error("viscosity must be positive, got {0}")]
    BadViscosity(f64),
    #[error("datum is incompatible: boundary flux {flux:e}")]
    IncompatibleDatum { flux: f64 },
    #[error("datum has no value at boundary node {0}")]
    DatumMismatch(usize),
    #[error("cavity boundary present but no-slip condition not requested")]
    MissingCavityCondition,
    #[error("boundary tag `{}` absent from mesh", .0.as_str())]
    TagAbsent(BoundaryTag),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("solver did not converge: relative residual {residual:e}")]
    NotConverged { residual: f64 },
    #[error("region lies outside the mesh")]
    ShapeOutside,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("internal: {0}")]
    Internal(String),
}
