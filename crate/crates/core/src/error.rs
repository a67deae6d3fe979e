use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("boundary conditions are rank deficient (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },
    #[error("unsupported boundary class: det N vanishes but det M does not")]
    UnsupportedBoundary,
    #[error("{0}")]
    NotApplicable(&'static str),
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("non-finite coefficient or state at x = {x}")]
    NonFinite { x: f64 },
    #[error("integration tolerance not met within {steps} steps")]
    ToleranceNotMet { steps: usize },
    #[error("operator has a zero mode (|det| = {det_abs:e} below guard {guard:e})")]
    ZeroModeDetected { det_abs: f64, guard: f64 },
    #[error("zero mode of multiplicity {multiplicity}; only a single extracted zero mode is supported")]
    DegenerateZeroMode { multiplicity: usize },
    #[error("operator has no zero mode")]
    NoZeroMode,
    #[error("reference operator has a zero mode")]
    ReferenceZeroMode,
    #[error("no invertible data split among the columns of [M|N]")]
    NoInvertibleSplit,
    #[error("degenerate boundary data: {0}")]
    DegenerateData(&'static str),
    #[error("formula regimes disagree: {0}")]
    RegimeMismatch(String),
    #[error("boundary conditions are not self-adjoint")]
    NotSelfAdjoint,
    #[error("secular function is not real after phase normalization (relative imaginary part {ratio:e})")]
    ImaginaryResidue { ratio: f64 },
    #[error("found {found} of {requested} eigenvalues below {lambda_max}")]
    CountNotReached {
        found: usize,
        requested: usize,
        lambda_max: f64,
    },
    #[error("fit degenerate: {0}")]
    FitDegenerate(&'static str),
}
