use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the quantity is defined.
    #[error("parameter domain violation: {0}")]
    Domain(String),

    /// The simulated population outgrew the configured cap.
    #[error("population exceeded cap of {cap} particles at t = {time}{}", replica_suffix(*.replica))]
    Capacity {
        cap: u64,
        time: f64,
        replica: Option<u64>,
    },

    /// Root bracketing failed; indicates a numerical fault rather than bad input.
    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("insufficient data for slope fit: {reason} (offending t values: {t_values:?})")]
    InsufficientData { reason: String, t_values: Vec<f64> },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn replica_suffix(replica: Option<u64>) -> String {
    match replica {
        Some(r) => format!(" (replica {r})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attach a replica index to a capacity error; other variants pass through.
    pub fn with_replica(self, index: u64) -> Self {
        match self {
            Error::Capacity { cap, time, .. } => Error::Capacity {
                cap,
                time,
                replica: Some(index),
            },
            other => other,
        }
    }
}
