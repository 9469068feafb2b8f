use thiserror::Error;

/// Errors raised while building or querying measures, generators and copulas.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The serialized measure does not follow the schema.
    #[error("invalid measure spec: {0}")]
    Spec(String),

    /// A structural invariant of a measure (or derived object) failed.
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    /// A numerical routine could not reach the requested accuracy.
    #[error("{what}: requested tolerance {requested:e}, achieved {achieved:e}")]
    Tolerance {
        what: &'static str,
        requested: f64,
        achieved: f64,
    },

    /// An argument lies outside the domain of the operation.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// A monotone root could not be bracketed.
    #[error("root not bracketable: {0}")]
    Bracket(String),
}

impl Error {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(detail: impl Into<String>) -> Self {
        Error::Domain(detail.into())
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Spec(_) => "spec",
            Error::Invariant { .. } => "invariant",
            Error::Tolerance { .. } => "tolerance",
            Error::Domain(_) => "domain",
            Error::Bracket(_) => "bracket",
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Tolerance { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
