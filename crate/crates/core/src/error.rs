use thiserror::Error;

/// Errors produced by the discretization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range for {len} points")]
    InvalidIndex { index: usize, len: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("point {0} is not covered by any set")]
    Uncovered(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(
        "U_Phi is not certified contractive (sharp bound {bound:.6} >= 1); refine the covering or use direct inversion"
    )]
    NotContractive { bound: f64 },
    #[error("Neumann series did not reach tolerance after {terms} terms (last term norm {last:.3e})")]
    NotConverged { terms: usize, last: f64 },
    #[error("refinement exhausted after {rounds} rounds (last osc norm {last_osc_norm:.6})")]
    RefineExhausted {
        rounds: usize,
        last_osc_norm: f64,
        report: Box<crate::oscillation::OscReport>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
