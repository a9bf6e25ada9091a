use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("no decoupling solution for theta/pi = {theta_over_pi} and k = {k}")]
    NoSolution { theta_over_pi: f64, k: u32 },

    #[error("theta'/pi = {theta_prime_over_pi} is not reachable with k = {k}")]
    OutOfRange { theta_prime_over_pi: f64, k: u32 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("band gap closes inside the quasi-energy window: {0}")]
    GapClosing(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
