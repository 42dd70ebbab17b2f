//! Crate-wide error and warning types.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode list must not be empty")]
    EmptyModeList,

    #[error("mode dimension {dim} at mode {mode} is below the minimum of 2")]
    ModeDimTooSmall { mode: usize, dim: usize },

    #[error("mode index {mode} out of range for a space with {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("duplicate mode index {mode} in keep list")]
    DuplicateMode { mode: usize },

    #[error("cell index {cell} out of range for an array of {n_cells} cells")]
    CellOutOfRange { cell: usize, n_cells: usize },

    #[error("operator/state dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{what}: dimension {dim} exceeds the guard limit {limit} (pass force to override)")]
    DimensionGuard {
        what: &'static str,
        dim: usize,
        limit: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(
        "dynamically unstable parameters{}: {detail}",
        cell.map(|c| format!(" at cell {c}")).unwrap_or_default()
    )]
    Instability { cell: Option<usize>, detail: String },

    #[error(
        "non-normalizable Bogoliubov mode{}: 1/N^2 = {norm_sq} <= 0",
        cell.map(|c| format!(" at cell {c}")).unwrap_or_default()
    )]
    NonNormalizable { cell: Option<usize>, norm_sq: f64 },

    #[error("operator is not Hermitian: max |H - H^dag| element = {dev:e}")]
    NotHermitian { dev: f64 },

    #[error("model does not conserve total excitation number; {0}")]
    NotNumberConserving(String),

    #[error("integrator failed: {0}")]
    IntegratorFailure(String),

    #[error("convergence study needs at least 2 caps, got {0}")]
    TooFewCaps(usize),
}

/// Non-fatal conditions attached to otherwise successful constructions.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Excitation cap 0 leaves only the vacuum state (dim = 1).
    CapZeroVacuumOnly,
    /// A scale-separation margin (e.g. lambda << J) was violated.
    MarginViolated { what: String, value: f64, limit: f64 },
    /// Builder invoked for a model kind other than the configured one.
    ModelKindMismatch { configured: String, requested: String },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::CapZeroVacuumOnly => {
                write!(f, "excitation cap 0: space contains only the vacuum state")
            }
            Warning::MarginViolated { what, value, limit } => {
                write!(f, "margin violated: {what} = {value:e} exceeds {limit:e}")
            }
            Warning::ModelKindMismatch {
                configured,
                requested,
            } => write!(
                f,
                "builder for {requested} model invoked on a config declaring {configured}"
            ),
        }
    }
}
