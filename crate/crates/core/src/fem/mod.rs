//! Finite-element machinery: elements, spaces, operators and solvers.

pub mod assembly;
pub mod element;
pub mod infsup;
pub mod krylov;
pub mod projection;
pub mod quadrature;
pub mod saddle;
pub mod space;
pub mod sparse;

pub use assembly::{
    assemble_convection, assemble_divergence, assemble_mass, assemble_stiffness, ConvectionAssembler,
    ConvectionForm,
};
pub use infsup::infsup_constant;
pub use projection::{
    project_pressure, project_velocity, pressure_error, velocity_error, PressureProjector, VelocityErrors,
    VelocityProjector, VelocitySource,
};
pub use saddle::{pressure_weights, solve_saddle, SaddleSolution, SaddleSystem};
pub use space::{ElementPair, FeField, FeSpace, FieldKind};
pub use sparse::SparseOperator;
