//! Crate-wide error type.

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },

    #[error("register of {qubits} qubits exceeds the {cap}-qubit cap of the {backend} backend")]
    CapExceeded { qubits: usize, cap: usize, backend: &'static str },

    #[error("X generator {r} and Z generator {s} anticommute (odd overlap)")]
    NonCommutingGenerators { r: usize, s: usize },

    #[error("unknown builtin code `{0}`")]
    UnknownCode(String),

    #[error("gamma too small: Gamma*gap + 1 = {value} must exceed 5n = {bound}")]
    GammaTooSmall { value: f64, bound: f64 },

    #[error("gamma coupling {gamma} exceeds the polynomial cap {cap}")]
    GammaCapExceeded { gamma: f64, cap: f64 },

    #[error("restricted chain operator is numerically singular ({kernel_dim} near-zero modes); Gamma is too small")]
    SingularRestriction { kernel_dim: usize },

    #[error("invalid gamma {gamma}: {why}")]
    InvalidGamma { gamma: f64, why: String },

    #[error("degenerate region split: {0}")]
    DegenerateSplit(String),

    #[error("ancilla Hamiltonian ground space is degenerate (gap {gap:.3e} below tolerance)")]
    DegenerateGroundSpace { gap: f64 },

    #[error("iterative eigensolver failed to converge after {iters} iterations")]
    ConvergenceFailure { iters: usize },

    #[error("gadget factors overlap on qubit {qubit}")]
    OverlappingSupports { qubit: usize },

    #[error("ancilla {qubit} appears in more than one parallel gadget")]
    AncillaCollision { qubit: usize },

    #[error("transitivity precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("state is not low energy: tr(rho H_s) = {energy} exceeds eps' = {eps_prime}")]
    NotLowEnergy { energy: f64, eps_prime: f64 },

    #[error("invalid measurement operator: {0}")]
    InvalidMeasurement(String),

    #[error("fewer than {expected} simulator eigenvalues below Delta = {delta} (found {found})")]
    SpectrumMismatch { expected: usize, found: usize, delta: f64 },

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("layout failure: {0}")]
    Layout(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
