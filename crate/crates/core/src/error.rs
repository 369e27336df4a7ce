use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which denominator of a bound constant vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    /// `q = delta d`, affects `M` and every `1/|delta d - q|` factor.
    DeltaDEqualsQ,
    /// `q = beta eps`, affects `N`.
    BetaEpsEqualsQ,
    /// `beta eps = delta d`.
    BetaEpsEqualsDeltaD,
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Degeneracy::DeltaDEqualsQ => "|delta*d - q| = 0",
            Degeneracy::BetaEpsEqualsQ => "|beta*eps - q| = 0",
            Degeneracy::BetaEpsEqualsDeltaD => "|beta*eps - delta*d| = 0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid {name}: {reason}")]
    Validation { name: &'static str, reason: String },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e}{context}")]
    Accuracy {
        estimate: f64,
        error: f64,
        context: String,
    },
    #[error("degenerate bound constant: {0}")]
    DegenerateBoundConstant(Degeneracy),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("truncation tail {tail:e} exceeds tolerance; enlarge x_max")]
    Truncation { tail: f64 },
    #[error("fixed-point iteration did not converge in {} iterations (last update {:e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence { history: Vec<f64> },
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("configuration error: {0}")]
    Configuration(String),
}

impl Error {
    /// Attach a location to an accuracy error.
    pub fn at(self, context: impl FnOnce() -> String) -> Self {
        match self {
            Error::Accuracy {
                estimate, error, ..
            } => Error::Accuracy {
                estimate,
                error,
                context: format!(" at {}", context()),
            },
            other => other,
        }
    }
}
