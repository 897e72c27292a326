use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },

    #[error("grid is not uniform (relative spacing deviation {deviation:.3e})")]
    NonUniformGrid { deviation: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("angular frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("wavelength {wavelength_um:.4} um outside the validity window [{min_um}, {max_um}] um of `{material}`")]
    OutsideValidityWindow {
        material: String,
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("M1 and M1' disagree by {max_diff:.3e} (tolerance {tolerance:.1e})")]
    SymmetryViolation { max_diff: f64, tolerance: f64 },

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("normal equations are singular even with damping")]
    Singular,

    #[error("interferogram kind `{found}` does not match scheme `{expected}`")]
    SchemeMismatch { expected: String, found: String },

    #[error("scan span [{start:.4e}, {end:.4e}] s is not covered by the rate grid [{grid_start:.4e}, {grid_end:.4e}] s")]
    SpanMismatch {
        start: f64,
        end: f64,
        grid_start: f64,
        grid_end: f64,
    },

    #[error("separation {d:.4} is below four feature widths ({sigma:.4}); features are unresolvable")]
    Unresolvable { d: f64, sigma: f64 },

    #[error("no features found in trace")]
    NoFeatures,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
