//! Simulation and analysis of strong Mpemba relaxation in a driven-dissipative
//! qutrit.

pub mod compiler;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod mpemba;
pub mod spectral;
pub mod tomography;

pub use error::{Error, Result};
