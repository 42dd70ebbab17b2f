//! Config-driven experiment runner for the `omarray` simulator: physics
//! checks, single transfer runs, parameter sweeps, and bidirectional
//! transfers, with CSV + JSON-metadata outputs.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] omarray::Error),

    #[error("io error: {0}")]
    Io(String),

    #[error("physics check failed")]
    PhysicsCheckFailed,

    #[error("truncation not converged: |dF| = {last_delta:e} >= {tol:e}")]
    NotConverged { last_delta: f64, tol: f64 },
}

impl CliError {
    /// Exit codes: 0 ok, 1 physics-check failure, 2 config error,
    /// 3 convergence failure. Runtime faults map to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged { .. } => 3,
            CliError::PhysicsCheckFailed => 1,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
