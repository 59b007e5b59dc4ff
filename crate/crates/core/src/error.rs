use thiserror::Error;

/// Errors raised by the quantum probability toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("geometric mean did not converge (last step changed by {step:e})")]
    MeanDidNotConverge {
        step: f64,
        previous: Box<nalgebra::DMatrix<num_complex::Complex64>>,
        last: Box<nalgebra::DMatrix<num_complex::Complex64>>,
    },

    #[error("invalid sample space: {0}")]
    InvalidSpace(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),

    #[error("effect at point `{label}` is not a quantum effect: {reason}")]
    NotAnEffect { label: String, reason: String },

    #[error("total mass of the POVM is zero")]
    ZeroMeasure,

    #[error("sample spaces or dimensions do not match: {0}")]
    SpaceMismatch(String),

    #[error("not absolutely continuous: atom `{label}` is null for the reference measure but not for the other")]
    NotAbsolutelyContinuous { label: String },

    #[error("POVM is not a quantum probability measure (|nu(X) - 1|_max = {deviation:e})")]
    NotProbabilityMeasure { deviation: f64 },

    #[error("invalid probe state set: {0}")]
    InvalidProbes(String),

    #[error("sequence did not converge: worst window residual {residual:e} at probe {probe}, atom `{atom}`")]
    NotConverged {
        residual: f64,
        probe: usize,
        atom: String,
    },

    #[error("partial sums diverge: {0}")]
    PartialSumsDiverge(String),

    #[error("effect at `{label}` is not strictly positive (min eigenvalue {min_eigenvalue:e} < {required:e})")]
    NotStrictlyPositiveEffect {
        label: String,
        min_eigenvalue: f64,
        required: f64,
    },

    #[error("quantum expectation of the conditioned variable is zero")]
    ZeroExpectation,

    #[error("sigma-algebras are not nested: {0}")]
    NotNested(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
