use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{qubits} qubits exceeds the dense-matrix limit of {limit}")]
    Capacity { qubits: usize, limit: usize },

    #[error("operator string contains ladder factors; expand it before multiplying: {0}")]
    LadderFactor(String),

    #[error("invalid Pauli label {0:?}")]
    Parse(String),

    #[error("mode {mode} out of range for {modes} modes")]
    ModeRange { mode: usize, modes: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid gate: {0}")]
    Gate(String),

    #[error("cannot compile term {term}: {reason}")]
    Compile { term: String, reason: String },

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid probability vector: {0}")]
    Probability(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("reconstruction did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unitary is not a Clifford: {0}")]
    NotClifford(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Parse(_)
                | Error::Model(_)
                | Error::Schedule(_)
                | Error::ModeRange { .. }
                | Error::Gate(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
