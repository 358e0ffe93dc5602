use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped by the module that raises them; the CLI maps
/// them to exit codes via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    // market data
    #[error("column `{0}` not found in CSV header")]
    MissingColumn(String),
    #[error("series is empty or has fewer than two usable points")]
    EmptySeries,
    #[error("duplicate timestamp {0} after sorting")]
    NonMonotonicAfterSort(String),
    #[error("load weights sum to zero at index {0}")]
    WeightSumZero(usize),
    #[error("zones do not share a common timestamp grid")]
    MisalignedZones,
    #[error("target resolution {target}h is finer than native resolution {native}h")]
    UpsamplingRequested { native: f64, target: f64 },
    #[error("{gaps} of {buckets} buckets are gaps (limit 5%)")]
    TooManyGaps { gaps: usize, buckets: usize },
    #[error("rolling window of {window} points needs more than {len} observations")]
    WindowTooLarge { window: usize, len: usize },

    // models
    #[error("jump probability per step {0:.4} exceeds 0.1; use a finer dt")]
    StepTooCoarse(f64),
    #[error("AR(1) coefficient {0} outside (0, 1)")]
    PhiOutOfRange(f64),
    #[error("power iteration did not converge after {0} iterations (reducible chain?)")]
    NotConverged(usize),

    // calibration
    #[error("fitted AR(1) coefficient {0} implies a non-stationary series")]
    NonStationarySeries(f64),
    #[error("residual variance is not positive")]
    DegenerateVariance,
    #[error("optimizer diverged: {0}")]
    OptimizerDiverged(String),
    #[error("GARCH persistence alpha1 + beta1 = {0} is not below 1")]
    StationarityViolated(f64),
    #[error("need at least {needed} feature rows, have {have}")]
    TooFewPoints { needed: usize, have: usize },
    #[error("all regime likelihoods underflow at t = {0}")]
    ZeroLikelihood(usize),
    #[error("regime {regime} has expected occupancy {occupancy:.4} below 1%")]
    LabelDegeneracy { regime: usize, occupancy: f64 },
    #[error("regime {regime} has only {points} assigned points (need 200)")]
    RegimeTooSmall { regime: usize, points: usize },

    // pricing / economics
    #[error("an initial regime is required for regime-switching models")]
    RegimeRequired,
    #[error("no break-even up to tau_max = {tau_max} years (terminal gap {gap:.2})")]
    NoBreakEven { tau_max: u32, gap: f64 },
    #[error("CONE {cone:.2} disagrees with annuitized CapEx + O&M {implied:.2} by more than 1%")]
    InconsistentCostInputs { cone: f64, implied: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // I/O and configuration
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for I/O and configuration problems, 1 for computation errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Config(_)
            | Error::MissingColumn(_) => 2,
            _ => 1,
        }
    }
}
