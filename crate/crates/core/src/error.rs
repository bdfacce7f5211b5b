use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the dynamics, control, allocation and simulation layers.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("Euler-rate mapping is singular (|det| = {det:.3e})")]
    SingularMapping { det: f64 },
    #[error("attitude guard violated: phi = {phi:.4} rad, theta = {theta:.4} rad (limit {limit:.4} rad)")]
    AngleGuard { phi: f64, theta: f64, limit: f64 },
    #[error("degenerate thrust: |u_z| = {0:.3e} is too small to extract a desired attitude")]
    DegenerateThrust(f64),
    #[error("allocation normal matrix is singular")]
    SingularAllocation,
    #[error("quadrotor mixer is singular")]
    SingularMixer,
    #[error("negative rotor thrust {0} passed to speed conversion")]
    NegativeThrust(f64),
    #[error("asymmetric geometry: d1 = {d1:?}, d2 = {d2:?} (expected d1 = -d2)")]
    AsymmetricGeometry { d1: [f64; 3], d2: [f64; 3] },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("config error at `{path}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        path: String,
        /// 1-based line in the source file, when known.
        line: Option<usize>,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("log schema mismatch at column {index}: expected `{expected}`, found `{found}`")]
    SchemaMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("malformed log row {row}: {message}")]
    MalformedLog { row: usize, message: String },
}

impl SimError {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
