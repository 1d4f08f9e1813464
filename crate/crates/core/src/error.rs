use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error(
        "matrices {first} and {second} do not commute as normal matrices (residual {residual:.3e})"
    )]
    NotCommuting {
        first: usize,
        second: usize,
        residual: f64,
    },

    #[error("state is not SSPPT under the supplied factor: {witness} (residual {residual:.3e})")]
    NotSsppt { witness: String, residual: f64 },

    #[error("internal consistency failure: {0}")]
    Consistency(String),
}
