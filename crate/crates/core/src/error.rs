use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the simulator can report.
///
/// Numerical failures (CFL, positivity, root solves) are distinguished from
/// configuration failures so that the command-line front end can map them to
/// different exit codes; see [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("CFL violation in pipe {pipe}: dt = {dt} s exceeds the stable bound {dt_max} s")]
    CflViolation { pipe: String, dt: f64, dt_max: f64 },

    #[error("positivity loss in pipe {pipe}, cell {cell}, step {step}: density {value}")]
    PositivityLoss {
        pipe: String,
        cell: usize,
        step: u64,
        value: f64,
    },

    #[error("unstable run in pipe {pipe}, face {face}, step {step}: non-finite flux")]
    Unstable { pipe: String, face: usize, step: u64 },

    #[error("infeasible node {node}: {detail}")]
    InfeasibleNode { node: String, detail: String },

    #[error("compressors at both ends of pipe {pipe} are active at t = {t} s")]
    CompressorConflict { pipe: String, t: f64 },

    #[error(
        "steady state did not converge in {iterations} iterations \
         (worst residual {residual} kg/s at node {node})"
    )]
    SteadyNonConvergence {
        iterations: usize,
        residual: f64,
        node: String,
    },

    #[error("infeasible steady state: {0}")]
    InfeasibleSteadyState(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("profile error: {0}")]
    Profile(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("configuration is invalid:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag, used on the CLI diagnostic line.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain_error",
            Error::CflViolation { .. } => "cfl_violation",
            Error::PositivityLoss { .. } => "positivity_loss",
            Error::Unstable { .. } => "unstable",
            Error::InfeasibleNode { .. } => "infeasible_node",
            Error::CompressorConflict { .. } => "compressor_conflict",
            Error::SteadyNonConvergence { .. } => "steady_nonconvergence",
            Error::InfeasibleSteadyState(_) => "infeasible_steady_state",
            Error::InvalidNetwork(_) => "invalid_network",
            Error::Profile(_) => "profile_error",
            Error::IncompatibleGrids(_) => "incompatible_grids",
            Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse_error",
            Error::Io { .. } => "io_error",
        }
    }

    /// True for failures raised while integrating (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CflViolation { .. }
                | Error::PositivityLoss { .. }
                | Error::Unstable { .. }
                | Error::InfeasibleNode { .. }
                | Error::CompressorConflict { .. }
                | Error::SteadyNonConvergence { .. }
                | Error::InfeasibleSteadyState(_)
        )
    }

    pub(crate) fn with_pipe(self, label: &str) -> Self {
        match self {
            Error::CflViolation { dt, dt_max, .. } => Error::CflViolation {
                pipe: label.to_string(),
                dt,
                dt_max,
            },
            Error::PositivityLoss { cell, step, value, .. } => Error::PositivityLoss {
                pipe: label.to_string(),
                cell,
                step,
                value,
            },
            Error::Unstable { face, step, .. } => Error::Unstable {
                pipe: label.to_string(),
                face,
                step,
            },
            other => other,
        }
    }
}
