use thiserror::Error;

/// Error type shared by all simulation and analysis operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violates a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A denominator or correction factor reached an unphysical value.
    #[error("singularity: {0}")]
    Singularity(String),

    /// The integrated state stopped being finite.
    #[error("divergence at t = {t} s: state is no longer finite")]
    Divergence { t: f64 },

    /// A filter width cannot be resolved on the sampling grid.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Two series that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A signal vanished where a normalization needs it to be positive.
    #[error("degenerate signal at t = {t} s: total power is zero")]
    DegenerateSignal { t: f64 },

    /// An averaging window contains no samples.
    #[error("empty window: [{lo}, {hi}] s holds no samples")]
    EmptyWindow { lo: f64, hi: f64 },

    /// The drive never reaches the avoided crossing (A < |eps0|).
    #[error("no crossing: amplitude {amplitude} < |mean coupling| {eps0_abs} (rad/s)")]
    NoCrossing { amplitude: f64, eps0_abs: f64 },

    /// A series is too short for the requested analysis.
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::Singularity(msg.into())
    }
}
