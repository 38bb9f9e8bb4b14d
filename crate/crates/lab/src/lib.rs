//! Experiment harness: configuration, grid and sweep runners, convergence
//! studies, CSV records and SVG scatter plots.

pub mod config;
pub mod experiment;
pub mod records;
pub mod svg;

use cavlab_core::bdata::DatumError;
use cavlab_core::estimator::EstimatorError;
use cavlab_core::fem::FemError;
use cavlab_core::geometry::GeometryError;
use cavlab_core::mesh::MeshError;
use thiserror::Error;

pub use config::Config;
pub use experiment::{convergence_study, run_grid, run_measure, run_sweep, ConvergenceRow, ExperimentRecord};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io(_) => 2,
            LabError::Geometry(_) => 3,
            LabError::Solver(_) => 4,
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<GeometryError> for LabError {
    fn from(e: GeometryError) -> Self {
        LabError::Geometry(e.to_string())
    }
}

impl From<MeshError> for LabError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::AngleTooLarge(_) | MeshError::BadSize(_) => LabError::Config(e.to_string()),
            MeshError::Io(_) => LabError::Io(e.to_string()),
            MeshError::Contract(_) => LabError::Solver(e.to_string()),
            _ => LabError::Geometry(e.to_string()),
        }
    }
}

impl From<FemError> for LabError {
    fn from(e: FemError) -> Self {
        match e {
            FemError::Geometry(g) => g.into(),
            FemError::Mesh(m) => m.into(),
            FemError::BadViscosity(_) => LabError::Config(e.to_string()),
            _ => LabError::Solver(e.to_string()),
        }
    }
}

impl From<DatumError> for LabError {
    fn from(e: DatumError) -> Self {
        match e {
            DatumError::Mesh(m) => m.into(),
            DatumError::Fem(f) => f.into(),
            _ => LabError::Config(e.to_string()),
        }
    }
}

impl From<EstimatorError> for LabError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Geometry(g) => g.into(),
            EstimatorError::Mesh(m) => m.into(),
            EstimatorError::Fem(f) => f.into(),
            EstimatorError::Datum(d) => d.into(),
            EstimatorError::ZeroEnergy | EstimatorError::BadConstant(_) => LabError::Config(e.to_string()),
            EstimatorError::NoValidRecords { .. } => LabError::Solver(e.to_string()),
        }
    }
}
