use std::io;

use thiserror::Error;

/// Errors raised anywhere in the detector model, synthesis, or analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("output {volts:.4} V reaches the {rail:.3} V rail")]
    Saturation { volts: f64, rail: f64 },

    #[error("band [{lo:.6e}, {hi:.6e}] Hz outside support [{min:.6e}, {max:.6e}] Hz")]
    BandOutOfRange { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("total efficiency {eta_total:.4} exceeds quantum efficiency {eta_qe:.4}")]
    InconsistentEfficiencies { eta_total: f64, eta_qe: f64 },

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("response never falls to half power")]
    NoCrossing,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
