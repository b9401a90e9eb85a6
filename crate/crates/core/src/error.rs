use thiserror::Error;

use crate::vi_solver::VsolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Domain(String),

    #[error("linear solver failed: {msg} (last relative residual {:.3e})", .residuals.last().copied().unwrap_or(f64::NAN))]
    LinearSolver { msg: String, residuals: Vec<f64> },

    #[error(
        "Uzawa iteration did not converge in {} iterations (multiplier increment {:.3e}, primal increment {:.3e}); try halving rho",
        .0.iterations, .0.multiplier_increment, .0.primal_increment
    )]
    NonConvergence(Box<VsolveReport>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn linear(msg: impl Into<String>, residuals: Vec<f64>) -> Self {
        Error::LinearSolver {
            msg: msg.into(),
            residuals,
        }
    }
}
