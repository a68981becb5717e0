use thiserror::Error;

/// Failures raised by the geometry, solver and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("backend mismatch: expected {expected}, got {found}")]
    BackendMismatch { expected: String, found: String },

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("under-resolved field: {0}")]
    Resolution(String),

    #[error("shape mismatch: expected {expected} samples, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("time step {dt:.3e} exceeds stability bound {limit:.3e} (need at least {min_steps} steps)")]
    Cfl { dt: f64, limit: f64, min_steps: usize },

    #[error("flow diverged at step {step} (t = {t}): {reason}")]
    Divergence { step: usize, t: f64, reason: String },

    #[error("sphere extinction: r^2({t}) = {r2} fell below {floor}")]
    Extinction { t: f64, r2: f64, floor: f64 },

    #[error("positivity lost at t = {t}, point {point}: value {value:e}")]
    Positivity { t: f64, point: usize, value: f64 },

    #[error("hypothesis not established: {0}")]
    Hypothesis(String),

    #[error("eigensolver did not converge: {0}")]
    Eigen(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
