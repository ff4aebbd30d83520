use thiserror::Error;

#[derive(Debug, Error)]
pub enum KdvError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular banded system at row {row}")]
    Singular { row: usize },
    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("nonlinear step failed after {halvings} step halvings at t = {t}")]
    Picard { halvings: usize, t: f64 },
    #[error("Sobolev norm not converged: {coarse} vs {fine}")]
    SobolevConvergence { coarse: f64, fine: f64 },
    #[error("frequency {z} is within {guard} of a resonance at {zero}")]
    Resonance { z: f64, zero: f64, guard: f64 },
    #[error("no admissible gamma: {0}")]
    NoGamma(String),
    #[error("trajectory did not decay: final norm {final_norm:e}, peak {peak:e}")]
    NotDecayed { final_norm: f64, peak: f64 },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, KdvError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(KdvError::Domain(msg.into()))
}
