use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Module that raised a validation failure. Carried in diagnostics so the
/// CLI can name the owning component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    Lattice,
    Combinatorics,
    Hamiltonian,
    States,
    Spectrum,
    Bounds,
    Experiment,
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Module::Lattice => "lattice",
            Module::Combinatorics => "combinatorics",
            Module::Hamiltonian => "hamiltonian",
            Module::States => "states",
            Module::Spectrum => "spectrum",
            Module::Bounds => "bounds",
            Module::Experiment => "experiment",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("[{module}] invalid `{field}`: {message}")]
    Validation {
        module: Module,
        field: String,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hilbert space dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: u128, cap: usize },

    #[error("brute-force enumeration of {space} tuples exceeds the cap {cap}; use the closed-form bound instead")]
    Infeasible { space: u128, cap: u128 },

    #[error("order r = {0} must be even")]
    OddOrder(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("eigendecomposition failed to converge")]
    Eigensolver,

    #[error("{count} bound verdict(s) violated; first: {first}")]
    TheoremViolation { count: usize, first: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(module: Module, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            module,
            field: field.into(),
            message: message.into(),
        }
    }
}
