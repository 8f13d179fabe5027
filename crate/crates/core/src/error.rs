use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error(
        "stationary state is not unique: eigenvalue 0 has multiplicity {multiplicity} \
         (mode indices {indices:?})"
    )]
    DegenerateStationary { multiplicity: usize, indices: Vec<usize> },

    #[error(
        "spectral decomposition is near-defective (condition {condition:.3e}); \
         use hermitian_recombination or evaluate at an offset from the exceptional point"
    )]
    Defective { condition: f64 },

    #[error("slowest decaying mode is complex (lambda_1 = {re:.6e}{im:+.6e}i); only one of the two \
             slow functionals can be cancelled, see hermitian_recombination")]
    ComplexSlowMode { re: f64, im: f64 },

    #[error("left slow mode has no sign change in its spectrum ({0:?}); cannot cancel its overlap")]
    NoSignChange([f64; 3]),

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("integrator step size underflow at t = {t:.6e} (h = {h:.3e}, error ratio {err:.3e})")]
    StepSizeUnderflow { t: f64, h: f64, err: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("fit window: {0}")]
    FitWindow(String),

    #[error("populations are not a probability vector: {0:?}")]
    InvalidSimplex([f64; 3]),

    #[error("effective decay requires gamma > 2 omega_p (got gamma = {gamma}, omega_p = {omega_p})")]
    Underdamped { gamma: f64, omega_p: f64 },

    #[error("invalid tomography basis index {0} (expected 0..9)")]
    InvalidBasisIndex(usize),

    #[error("incomplete tomography record: {0}")]
    IncompleteRecord(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
