use thiserror::Error;

/// Errors shared by the simulation and readout modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unphysical covariance matrix: min symplectic eigenvalue {min_nu} < 1/2")]
    Unphysical { min_nu: f64 },

    #[error("integration diverged at t = {t}: non-finite state")]
    Divergence { t: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("trace drift {drift:e} exceeds {limit:e} during Lindblad evolution")]
    TraceDrift { drift: f64, limit: f64 },

    #[error("QN with {q} qubits exceeds the capacity cap of {cap} (joint dimension 2^{dim})", dim = q + 2)]
    Capacity { q: usize, cap: usize },

    #[error("Fock cutoff {cutoff} insufficient: truncation leakage {leakage:e} > {limit:e}; increase the cutoff")]
    CutoffInsufficient { cutoff: usize, leakage: f64, limit: f64 },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
