//! File formats, the classification pipeline and the generator registry behind the `sppt` binary.

pub mod commands;
pub mod format;
pub mod registry;
pub mod report;

use thiserror::Error;

/// Failures with a dedicated exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("not a valid density matrix: {0}")]
    InvalidState(String),
    #[error("could not parse input: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("not SSPPT: {witness} (residual {residual:.3e})")]
    NotSsppt { witness: String, residual: f64 },
    #[error("{0}")]
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::InvalidState(_) => 2,
            Failure::Parse(_) => 3,
            Failure::Dimension(_) => 4,
            Failure::NotSsppt { .. } => 5,
            Failure::Other(_) => 1,
        }
    }

    pub fn from_core(e: sppt::Error) -> Self {
        match e {
            sppt::Error::NotHermitian { .. } | sppt::Error::NotPsd { .. } => {
                Failure::InvalidState(e.to_string())
            }
            sppt::Error::Shape(m) => Failure::Dimension(m),
            sppt::Error::NotSsppt { witness, residual } => {
                // Multipartite labels name the pair of S products whose commutator is largest.
                let witness = if witness.starts_with("alpha") {
                    format!("commutator [P_β, P_β'†] does not vanish, P_β = S¹_(α,j₁)⋯S^d_(α,j_d), at {witness}")
                } else {
                    witness
                };
                Failure::NotSsppt { witness, residual }
            }
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}
