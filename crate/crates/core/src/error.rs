use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("domain too small for uloc norm")]
    DomainTooSmall,
    #[error("kernel singularity")]
    KernelSingularity,
    #[error("periodic wrap would corrupt result")]
    PeriodicWrap,
    #[error("far field under-resolved: truncation radius {rho_max} < 8R = {min}")]
    FarFieldUnderResolved { rho_max: f64, min: f64 },
    #[error("parasitic data must vanish at t=0")]
    ParasiticNonzeroStart,
    #[error("test function support escapes grid domain")]
    SupportEscapes,
    #[error("test function support not inside ball B_R(x0)")]
    SupportOutsideBall,
    #[error("evaluation point within inner radius of domain boundary")]
    NearBoundary,
    #[error("non-decaying grid input cannot be evolved spectrally")]
    NonDecayingInput,
    #[error("time {0} outside time axis")]
    TimeOutsideAxis(f64),
    #[error("time axis required")]
    MissingTimeAxis,
    #[error("mollifier under-resolved: eps = {eps} needs eps >= 2h and eps >= 2dt")]
    MollifierUnderResolved { eps: f64 },
    #[error("trajectory too short: need t up to {needed}, have {have}")]
    TrajectoryTooShort { needed: f64, have: f64 },
    #[error("test function must be nonnegative")]
    NegativeTestFunction,
    #[error("smallness gate failed: sup|e^(t lap) u0| * sqrt(T) = {value:.3e} > {limit}")]
    DataTooLarge { value: f64, limit: f64 },
    #[error("picard iteration did not converge in {iterations} iterations; residual history {history:?}")]
    NoConvergence { iterations: usize, history: Vec<f64> },
    #[error("insufficient extension radius: need {needed}, source valid to {have}")]
    ExtensionRadius { needed: f64, have: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("rank mismatch: expected {expected}, found {found}")]
    Rank { expected: &'static str, found: &'static str },
    #[error("config error: {0}")]
    Config(String),
    #[error("field format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
