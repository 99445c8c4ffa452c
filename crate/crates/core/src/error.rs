use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("CFL violation: dt * v_max = {dt_vmax} exceeds dx = {dx}")]
    CflViolation { dt_vmax: f64, dx: f64 },

    /// A per-cell velocity solve failed to reach its tolerance.
    #[error(
        "Fokker-Planck CG did not converge: species {species}, cell ({cell_x}, {cell_y}), \
         relative residual {residual:e} after {iterations} iterations"
    )]
    FokkerPlanckDivergence {
        species: usize,
        cell_x: usize,
        cell_y: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("Maxwellian ratio overflow at species {species}, cell ({cell_x}, {cell_y})")]
    MaxwellianOverflow { species: usize, cell_x: usize, cell_y: usize },

    #[error("{solver} CG did not converge: relative residual {residual:e} after {iterations} iterations")]
    FluidSolverDivergence {
        solver: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("nonpositive Helmholtz reaction coefficient {value} at cell ({cell_x}, {cell_y})")]
    NegativeCoefficient { value: f64, cell_x: usize, cell_y: usize },

    #[error("incompatible Neumann right-hand side: mean {mean:e}")]
    IncompatibleRhs { mean: f64 },

    #[error("second-order step requires two time levels")]
    MissingHistory,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown preset '{0}'")]
    InvalidPreset(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable tag for CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid-grid",
            Error::InvalidParams(_) => "invalid-params",
            Error::CflViolation { .. } => "cfl-violation",
            Error::FokkerPlanckDivergence { .. } => "cg-divergence",
            Error::MaxwellianOverflow { .. } => "maxwellian-overflow",
            Error::FluidSolverDivergence { .. } => "pcg-divergence",
            Error::NegativeCoefficient { .. } => "negative-coefficient",
            Error::IncompatibleRhs { .. } => "incompatible-rhs",
            Error::MissingHistory => "missing-history",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::InvalidPreset(_) => "invalid-preset",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
