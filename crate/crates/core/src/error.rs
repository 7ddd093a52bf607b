use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid constellation order {order} for {kind}")]
    InvalidOrder { kind: &'static str, order: usize },

    #[error("symbol {0} is not a constellation point")]
    NotAConstellationPoint(num_complex::Complex64),

    #[error("zero symbol has no rotation")]
    ZeroSymbol,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("oracle not certified after {iterations} iterations (KKT residual {residual:.3e})")]
    NotCertified {
        iterations: usize,
        residual: f64,
        x: Vec<f64>,
        lambda: Vec<f64>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error below any added context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Malformed input, as opposed to a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidOrder { .. }
                | Error::NotAConstellationPoint(_)
                | Error::Dimension(_)
                | Error::InvalidParameter(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}
