use std::io;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Variants follow the failure classes
/// used throughout the crate so callers (and the CLI exit codes) can tell a bad
/// parameter from a statistical or numerical problem.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation needs something the model does not provide
    /// (a derivative, a spectral density, a differentiable coordinate).
    #[error("capability error: {0}")]
    Capability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("degenerate conditioning: {0}")]
    DegenerateConditioning(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("aliasing: step {step} has angle increment {increment} (grid too coarse near the origin)")]
    Aliasing { step: usize, increment: f64 },

    #[error("hypothesis error: {0}")]
    Hypothesis(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("replication {replication}: {source}")]
    Replication {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_replication(self, replication: u64) -> Self {
        Error::Replication {
            replication,
            source: Box::new(self),
        }
    }

    /// True for errors caused by inputs (configuration, model, parameters) as
    /// opposed to runtime numerical failures.
    pub fn is_configuration(&self) -> bool {
        match self {
            Error::Parameter(_)
            | Error::Capability(_)
            | Error::Domain(_)
            | Error::Model(_)
            | Error::Hypothesis(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Io(_) => true,
            Error::Replication { source, .. } => source.is_configuration(),
            _ => false,
        }
    }
}
