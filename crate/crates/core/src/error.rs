use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Variants map one-to-one onto the
/// failure classes the CLI distinguishes (config errors exit with 2).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("kernel singularity stronger than declared: {0}")]
    Singularity(String),
    #[error("marching failed: {0}")]
    Marching(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("series did not converge: {0}")]
    Divergence(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("gluing residual too large: {0}")]
    GluingResidual(String),
    #[error("bound violated: {0}")]
    BoundViolation(String),
    #[error("iteration budget exhausted: {0}")]
    IterationBudget(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("manufactured solution cannot be built: {0}")]
    Construction(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Geometry(_) | Error::Json(_))
    }
}
