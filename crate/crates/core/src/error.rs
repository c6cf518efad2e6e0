use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),

    #[error("invalid observer gains: {0}")]
    InvalidGains(String),

    #[error("no common Lyapunov certificate: {0}")]
    NoCertificate(String),

    #[error("threshold band collapses: epsilon = {epsilon} must be below d/c = {ratio}")]
    DegenerateBand { epsilon: f64, ratio: f64 },

    #[error("gain placement failed: {0}")]
    PlacementFailed(String),

    #[error("state left the domain at t = {t}: z2 = {z2} <= -d/c = {floor}")]
    StateOutOfDomain { t: f64, z2: f64, floor: f64 },

    #[error("illegal jump: {0}")]
    IllegalJump(String),

    #[error("initial condition outside the declared ball: {0}")]
    BadInitialBall(String),

    #[error("integrator step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("Zeno behaviour suspected at t = {t}: {jumps} jumps within a window of {window}")]
    ZenoSuspected { t: f64, jumps: usize, window: f64 },

    #[error("no excitation interval found")]
    NoExcitation,

    #[error("cycle {0} was not completed in the trajectory")]
    CycleNotFound(u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidGains(_) => "InvalidGains",
            Error::NoCertificate(_) => "NoCertificate",
            Error::DegenerateBand { .. } => "DegenerateBand",
            Error::PlacementFailed(_) => "PlacementFailed",
            Error::StateOutOfDomain { .. } => "StateOutOfDomain",
            Error::IllegalJump(_) => "IllegalJump",
            Error::BadInitialBall(_) => "BadInitialBall",
            Error::StepFailure { .. } => "StepFailure",
            Error::ZenoSuspected { .. } => "ZenoSuspected",
            Error::NoExcitation => "NoExcitation",
            Error::CycleNotFound(_) => "CycleNotFound",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
