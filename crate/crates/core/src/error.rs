use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("field kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("radius {radius} exceeds the domain half-width {limit}")]
    RadiusExceedsDomain { radius: f64, limit: f64 },
    #[error("numerical abort at step {step} (t = {time}): non-finite value at node {node}")]
    NumericalAbort { step: usize, time: f64, node: usize },
    #[error("no solitary wave at omega = {omega}: {reason}")]
    NoSolitaryWave { omega: f64, reason: String },
    #[error("multi-bump effective potential at omega = {omega}")]
    MultiBump { omega: f64 },
    #[error("profile residual {residual:e} above bound {bound:e}")]
    ProfileResidual { residual: f64, bound: f64 },
    #[error("profile grid too narrow: needs |xi| up to {needed}, profile covers {covered}")]
    ProfileTooNarrow { needed: f64, covered: f64 },
    #[error("fit rejected: {0}")]
    FitRejected(String),
    #[error("momentum {value} left the tabulated range [{lo}, {hi}] at t = {time}")]
    OutOfTable { value: f64, lo: f64, hi: f64, time: f64 },
    #[error("integration blew up at t = {time}")]
    BlowUp { time: f64 },
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
