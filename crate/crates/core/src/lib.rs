//! Transfer-matrix simulation of one-dimensional continuum Anderson models
//! with Bernoulli-type couplings.

pub mod acceptance;
pub mod cli;
pub mod error;
pub mod floquet;
pub mod lyapunov;
pub mod model;
pub mod rng;
pub mod scattering;
pub mod spectra;
pub mod transfer;

pub use error::{Error, Result};
