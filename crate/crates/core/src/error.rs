use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a parameter outside its contract.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Evaluation was requested at or beyond a tilting-domain boundary.
    #[error("tilting domain violation: {0}")]
    Domain(String),

    /// No pilot sample produced a positive payoff, so the conjugate-measure
    /// expectations are 0/0. Increase the pilot size or relax the threshold.
    #[error(
        "degenerate pilot: no sample had a positive payoff \
         (increase the pilot size B1, or the loss threshold is too extreme)"
    )]
    DegeneratePilot,

    /// A numerical invariant failed at runtime (non-finite likelihood ratio,
    /// inverse-transform residual above tolerance, singular system, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Unknown preset name.
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
