use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model at `{path}`: {message}")]
    InvalidModel { path: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coupling distribution has fewer than two distinct atoms; the model is deterministic")]
    SingleAtomDistribution,

    #[error("model is not normalized (coupling support must span [0, 1])")]
    NotNormalized,

    #[error("scan step too coarse near lambda = {lambda}: edge classification is ambiguous")]
    ScanTooCoarse { lambda: f64 },

    #[error("energy {lambda} lies within {tolerance} of band edge {edge}")]
    TooCloseToEdge { lambda: f64, edge: f64, tolerance: f64 },

    #[error("energy {lambda} is outside the scanned range [{min}, {max}]")]
    OutOfScanRange { lambda: f64, min: f64, max: f64 },

    #[error("Dirichlet resonance of the background cell at lambda = {lambda}")]
    DirichletResonance { lambda: f64 },

    #[error("Floquet basis is ill-conditioned at lambda = {lambda} (condition number {condition:e})")]
    SingularBasis { lambda: f64, condition: f64 },

    #[error("single-site reflection vanishes on {fraction} of band samples; site looks identically zero")]
    DegenerateSite { fraction: f64 },

    #[error("density-of-states grid does not cover the fit window: {0}")]
    InsufficientRange(String),

    #[error("fit window contains no Lyapunov samples")]
    EmptyFitWindow,

    #[error("energy {lambda} is within {distance:e} of a box eigenvalue")]
    EigenvalueProximity { lambda: f64, distance: f64 },

    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Stable identifier printed by the CLI on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidModel { .. } => "InvalidModel",
            Error::InvalidInput(_) => "InvalidInput",
            Error::SingleAtomDistribution => "SingleAtomDistribution",
            Error::NotNormalized => "NotNormalized",
            Error::ScanTooCoarse { .. } => "ScanTooCoarse",
            Error::TooCloseToEdge { .. } => "TooCloseToEdge",
            Error::OutOfScanRange { .. } => "OutOfScanRange",
            Error::DirichletResonance { .. } => "DirichletResonance",
            Error::SingularBasis { .. } => "SingularBasis",
            Error::DegenerateSite { .. } => "DegenerateSite",
            Error::InsufficientRange(_) => "InsufficientRange",
            Error::EmptyFitWindow => "EmptyFitWindow",
            Error::EigenvalueProximity { .. } => "EigenvalueProximity",
            Error::Io { .. } => "Io",
        }
    }

    /// True for errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel { .. }
                | Error::InvalidInput(_)
                | Error::SingleAtomDistribution
                | Error::NotNormalized
                | Error::Io { .. }
                | Error::EmptyFitWindow
        )
    }
}
