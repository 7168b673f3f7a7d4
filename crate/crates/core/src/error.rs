use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trajectory diverged; last finite state at t={t}")]
    Divergence { t: f64 },

    /// determinant argument jumped too far in one step
    #[error("branch tracking lost at t={t} (argument jump {jump:.3} rad); reduce dt")]
    StepSize { t: f64, jump: f64 },

    #[error("caustic at t={t}: |det A| = {det:e}; use det(A - iB) forms instead")]
    Caustic { t: f64, det: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("quadrature box too small: tail mass {tail:e}; suggested box {suggested:?}")]
    TailMass { tail: f64, suggested: Vec<f64> },

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("stationary solve failed: {0}")]
    Stationary(String),

    #[error("degenerate phase: {0}")]
    DegeneratePhase(String),

    #[error("stale cache: {0}")]
    Stale(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("outside tubular neighborhood: {0}")]
    OutsideTube(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("chart error: {0}")]
    Chart(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_) | Error::Config(_) | Error::Unsupported(_) | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
