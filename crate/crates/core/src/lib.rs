//! Stokes flow cavity-size estimation in two dimensions.
//!
//! The crate meshes the unit square (optionally with an immersed cavity),
//! solves the Dirichlet Stokes problem with Taylor-Hood P2-P1 elements, extracts
//! the boundary Cauchy forces variationally, and turns the energy gap between
//! the problems with and without the cavity into lower and upper bounds on the
//! cavity area.

pub mod bdata;
pub mod estimator;
pub mod fem;
pub mod geometry;
pub mod mesh;
mod scalar;

pub use scalar::Real;

pub type Point64 = geometry::Point<f64>;
pub type Domain64 = geometry::DomainSpec<f64>;
pub type Cavity64 = geometry::CavityShape<f64>;
pub type Mesh64 = mesh::Mesh<f64>;
pub type FESystem64 = fem::FESystem<f64>;
pub type StokesField64 = fem::StokesField<f64>;
pub type BoundaryDatum64 = bdata::BoundaryDatum<f64>;
pub type Measurement64 = estimator::Measurement<f64>;
pub type SizeEstimate64 = estimator::SizeEstimate<f64>;
