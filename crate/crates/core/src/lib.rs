//! Finite-element discretization of the stochastic Navier-Stokes equations
//! on the periodic square, with Monte Carlo convergence experiments.

pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod noise;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
