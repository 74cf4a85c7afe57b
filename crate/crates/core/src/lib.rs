//! Ultra-slow (Hadamard-Caputo) fractional diffusion: simulation, regional
//! gradient controllability analysis and minimum-energy control synthesis.

pub mod controllability;
pub mod error;
pub mod hadamard;
pub mod hum;
pub mod mittag_leffler;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use hadamard::LogTimeWindow;
