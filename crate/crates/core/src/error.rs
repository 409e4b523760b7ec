use thiserror::Error;

/// Failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Spectral,
    Integration,
    PostProcessing,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("non-positive depth {depth} at r = ({x}, {y})")]
    NonPositiveDepth { depth: f64, x: f64, y: f64 },
    #[error("negative depth coordinate z = {0}")]
    NegativeDepthCoordinate(f64),
    #[error("mode {l} is not trapped: w = {w} admits {count} mode(s)")]
    ModeBelowCutoff { l: usize, w: f64, count: usize },
    #[error("dispersion function has no sign change on [{lo}, {hi}] for mode {l}")]
    RootBracketFailure { l: usize, lo: f64, hi: f64 },
    #[error("degenerate ray clock: dH/dp_tau = {0}")]
    DegenerateClock(f64),
    #[error("invalid source manifold at mu = ({mu1}, {mu2}): {reason}")]
    InvalidSource { mu1: f64, mu2: f64, reason: String },
    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),
    #[error("ray Jacobian is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("caustic crossing: Jacobian determinant ratio {0} is not positive")]
    CausticCrossing(f64),
    #[error("no sample at tau_nat = {0}")]
    MissingCheckpoint(f64),
    #[error("propagation tensor was not integrated for this ray")]
    MissingTensor,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidMedium(_) | Error::InvalidSettings(_) => ErrorClass::Config,
            Error::NonPositiveDepth { .. }
            | Error::NegativeDepthCoordinate(_)
            | Error::ModeBelowCutoff { .. }
            | Error::RootBracketFailure { .. } => ErrorClass::Spectral,
            Error::DegenerateClock(_) | Error::InvalidSource { .. } => ErrorClass::Integration,
            Error::RankDeficient(_)
            | Error::CausticCrossing(_)
            | Error::MissingCheckpoint(_)
            | Error::MissingTensor => ErrorClass::PostProcessing,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
