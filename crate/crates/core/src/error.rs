use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("{name} out of range {range}: got {value}")]
    Domain {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    /// Structurally invalid configuration (empty window, bad plan, unknown name, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its documented preconditions.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Covariance factorization failed even after the maximal jitter.
    #[error(
        "covariance factorization failed after jitter {jitter:e}; smallest eigenvalue estimate {min_eigenvalue:e}"
    )]
    Factorization { jitter: f64, min_eigenvalue: f64 },

    /// Linear system too ill-conditioned to trust.
    #[error("ill-conditioned system: condition number {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    /// The simulated path hit a state where the observation process cannot be formed.
    #[error("numerical degeneracy at node {node}: {reason}")]
    Degenerate { node: usize, reason: String },

    /// A replication failed inside a Monte Carlo experiment.
    #[error("replication failed (epsilon index {eps_index}, replication {rep}, seed {seed}): {source}")]
    Replication {
        eps_index: usize,
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("csv schema error: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, range: &'static str, value: f64) -> Self {
        Error::Domain { name, range, value }
    }

    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Domain { .. }
            | Error::Config(_)
            | Error::Precondition(_)
            | Error::Schema(_) => true,
            Error::Replication { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
