pub mod basis;
pub mod bohmian;
pub mod cli;
pub mod config;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod marginals;
pub mod observables;
pub mod oracles;
pub mod pipeline;
pub mod plot;
pub mod quadrature;
pub mod wavefield;

pub use error::{Error, Result};
