use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The commanded tip motion would leave the peeled part slack.
    #[error("strap would go slack (dr = {dr})")]
    Slack { dr: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Every particle received zero likelihood.
    #[error("particle filter diverged during {0}")]
    FilterDivergence(&'static str),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
