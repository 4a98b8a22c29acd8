use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    /// A segment passes through, or subtends at least pi at, the lifting center.
    #[error("angle lifting needs refinement: segment {segment} subtends {angle:.6} rad at the center")]
    RefinementRequired { segment: usize, angle: f64 },

    #[error("Biot-Savart kernel evaluated at its singularity")]
    SingularKernel,

    #[error("marker coincides with the winding center")]
    SingularMarker,

    #[error("curve degenerated to {0} nodes")]
    DegenerateCurve(usize),

    #[error("infeasible generation: {reason} (achieved {achieved:.6e}, allowed {allowed:.6e})")]
    Infeasible {
        reason: String,
        achieved: f64,
        allowed: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need {need} samples, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
