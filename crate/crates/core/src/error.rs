//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by matrix construction, decomposition solves, file I/O
/// and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (bad dimensions, empty
    /// input, out-of-range parameter, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The SVD iteration did not converge within its sweep cap.
    #[error(
        "svd did not converge for a {rows}x{cols} matrix with Frobenius norm {frobenius:.6e} \
         (iteration cap {max_iters})"
    )]
    SvdNonConvergence {
        rows: usize,
        cols: usize,
        frobenius: f64,
        max_iters: usize,
    },

    /// A computation produced NaN or infinite entries.
    #[error("numerical failure in {context}: non-finite entries")]
    NonFinite { context: String },

    /// A matrix or frame file could not be parsed.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Wraps an error with where-it-happened context (sweep row, trial, ...).
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid<S: Into<String>>(message: S) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub fn with_context<S: Into<String>>(self, context: S) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for caller mistakes (as opposed to numerical or I/O failures).
    pub fn is_usage(&self) -> bool {
        match self {
            Error::InvalidArgument(_) | Error::Parse { .. } => true,
            Error::Context { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
