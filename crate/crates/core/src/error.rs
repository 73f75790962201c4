use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    InvalidArgument(&'static str),
    /// A named parameter is outside its legal range.
    OutOfRange { name: &'static str, value: f64, min: f64, max: f64 },
    Shape { expected: usize, got: usize, what: &'static str },
    InvalidSparsity { ncrl: usize, n: usize },
    NonFiniteState { step: usize },
    EmptyInput(&'static str),
    IllConditioned { pivot: usize },
    Untrained,
    NoConvergence { what: &'static str, iterations: usize },
    LassoNoConvergence { sweeps: usize, gap: f64 },
    Divergent { a: f64, b: f64, step: usize },
    BitOutOfRange { bit: u32, q: u32 },
    NotANonzero { row: usize, col: usize },
    /// Broken invariant inside the crate; never expected for valid input.
    Internal(String),
    WidthViolation { node: usize, value: i64, width: u32 },
    DegenerateNetlist,
    TaskMismatch(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::OutOfRange { name, value, min, max } => {
                write!(f, "{name} = {value} is outside [{min}, {max}]")
            }
            Error::Shape { expected, got, what } => {
                write!(f, "shape mismatch in {what}: expected {expected}, got {got}")
            }
            Error::InvalidSparsity { ncrl, n } => {
                write!(f, "invalid sparsity: ncrl = {ncrl} exceeds n² = {}", n * n)
            }
            Error::NonFiniteState { step } => write!(f, "non-finite reservoir state at step {step}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::IllConditioned { pivot } => write!(
                f,
                "ill-conditioned readout system (pivot {pivot}); use a ridge coefficient λ > 0"
            ),
            Error::Untrained => write!(f, "model has no trained readout"),
            Error::NoConvergence { what, iterations } => {
                write!(f, "{what} did not converge after {iterations} iterations")
            }
            Error::LassoNoConvergence { sweeps, gap } => {
                write!(f, "lasso did not converge after {sweeps} sweeps (duality gap {gap:e})")
            }
            Error::Divergent { a, b, step } => {
                write!(f, "henon orbit diverged at step {step} for a = {a}, b = {b}")
            }
            Error::BitOutOfRange { bit, q } => write!(f, "bit {bit} outside [1, {q}]"),
            Error::NotANonzero { row, col } => {
                write!(f, "({row}, {col}) is not a stored reservoir connection")
            }
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
            Error::WidthViolation { node, value, width } => {
                write!(f, "node n{node}: value {value} does not fit in {width} bits")
            }
            Error::DegenerateNetlist => write!(f, "model has no surviving weights to lower"),
            Error::TaskMismatch(msg) => write!(f, "task mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
