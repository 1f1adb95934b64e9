use thiserror::Error;

use crate::ode::OdeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown pulse shape `{0}` (expected bipolar-derivative, unipolar-gaussian or custom-sampled)")]
    InvalidShape(String),
    #[error("run starts inside the pulse: at t = {t}, E~ = {e_tilde:e}, M - M0 = {dm:e}")]
    PulseActive { t: f64, e_tilde: f64, dm: f64 },
    #[error("target time {target} precedes ensemble time {now}")]
    BackwardTarget { now: f64, target: f64 },
    #[error("Wronskian drift {drift:e} in mode ({ix}, {iy}) at t = {t} exceeds the abort threshold {limit:e}")]
    WronskianDrift { ix: i32, iy: i32, t: f64, drift: f64, limit: f64 },
    #[error("integrator failure: {0}")]
    Ode(#[from] OdeError),
    #[error("time grid is not strictly increasing at index {0}")]
    NonMonotoneTime(usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error at line {line}, column {column}: {msg}")]
    Config { line: usize, column: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
