use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("could not parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error(transparent)]
    Estimation(#[from] fsanm::Error),

    #[error("{failed} of {attempted} estimates failed, above the {limit:.0}% limit")]
    TooManyFailures { failed: usize, attempted: usize, limit: f64 },

    #[error("realization checksum changed while running {method} (trial {trial}, {snr_db} dB)")]
    RealizationMismatch { method: String, trial: usize, snr_db: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;
