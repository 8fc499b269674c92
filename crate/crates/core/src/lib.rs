//! Krotov optimal control of a controlled phasegate between two trapped atoms.
//!
//! The interatomic coordinate lives on a Fourier grid ([`grid`]), the
//! electronic channel structure and Hamiltonian are in [`model`], time
//! evolution uses a Chebychev expansion ([`propagator`]), pulses are shaped
//! by [`krotov`], and the gate is characterized by [`analysis`]. The
//! [`config`] and [`cli`] modules wire everything to TOML experiment files.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod grid;
pub mod krotov;
pub mod model;
pub mod propagator;
pub mod units;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Propagation(#[from] propagator::PropagationError),
    #[error(transparent)]
    Krotov(#[from] krotov::KrotovError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Grid(grid::GridError::InvalidSpec(_)) | Error::Model(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
