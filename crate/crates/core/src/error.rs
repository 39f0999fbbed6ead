use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular least-squares system: {0}")]
    SingularSystem(String),

    #[error("channel estimation is singular: {0}")]
    EstimationSingular(String),

    #[error("equalizer design is singular: {0}")]
    DesignSingular(String),

    #[error("frame sync failed: peak correlation {peak:.4} below threshold {threshold:.4}")]
    SyncFailure { peak: f64, threshold: f64 },

    #[error("unusable capture: {0}")]
    UnusableCapture(String),

    #[error("invalid PGM image: {0}")]
    Pgm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
