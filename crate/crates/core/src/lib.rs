//! Asymptotic-preserving solver for multi-size Vlasov-Fokker-Planck particles
//! coupled to incompressible Navier-Stokes on the unit square.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod fokker_planck;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod krylov;
pub mod limit;
pub mod moments;
pub mod output;
pub mod presets;
pub mod transport;

pub use error::{Error, Result};
