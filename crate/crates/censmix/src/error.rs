//! Crate-wide error type.

/// Errors produced by the censmix library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A distribution or model parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A censoring interval has probability below the 1e-300 floor.
    #[error("degenerate censoring interval: probability below 1e-300")]
    DegenerateInterval,

    /// An observation has zero likelihood under every mixture component.
    #[error("observation {index} has no numerical support under any component")]
    NumericalSupport { index: usize },

    /// The weighted Gram matrix of one component cannot be inverted.
    #[error("singular weighted design matrix for component {component}")]
    SingularDesign { component: usize },

    /// A component's responsibility mass fell below the allowed minimum.
    #[error("component {component} collapsed: mass {mass:.3e} below threshold {threshold:.3e}")]
    EmptyComponent {
        component: usize,
        mass: f64,
        threshold: f64,
    },

    /// The gating Gram matrix cannot be inverted.
    #[error("singular gating design matrix")]
    SingularGating,

    /// Starting values could not be constructed.
    #[error("initialization failed: {0}")]
    InitializationFailure(String),

    /// The ECME loop failed after exhausting its recovery attempts.
    #[error("fit failed: {0}")]
    FitFailure(String),

    /// A dataset file is malformed; `line` is 1-based and counts the header.
    #[error("dataset error at line {line}: {message}")]
    Dataset { line: usize, message: String },

    /// A study configuration file is malformed.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
