use thiserror::Error;

/// Errors raised by the model, the clearing engine and the simulation loop.
#[derive(Debug, Error)]
pub enum MarketError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("clearing failed at step {step}: {reason} (residuals: {residuals:?})")]
    Clearing {
        step: usize,
        reason: String,
        prices: Vec<f64>,
        residuals: Vec<f64>,
    },

    #[error("invalid configuration: `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
}

impl MarketError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = MarketError> = std::result::Result<T, E>;
