//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a mathematical precondition (range, sign, shape).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration document is malformed or internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A tag file failed to parse. `location` names the offending line or
    /// record/byte offset.
    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    /// A raw singles rate times its dead time reached one; the linear
    /// dead-time correction is meaningless there.
    #[error("dead-time saturation on channel {channel}: R_Z*T_dt = {occupancy}")]
    DeadTimeSaturation { channel: usize, occupancy: f64 },

    /// The transfer matrix cannot be inverted for rate estimation.
    #[error("non-invertible channel: det = {det}")]
    NonInvertibleChannel { det: f64 },

    /// Bayes' rule conditioned on an event of probability zero.
    #[error("posterior undefined: coincidence probability is zero")]
    UndefinedPosterior,

    /// A derived quantity violated an identity it must satisfy; indicates a
    /// bug or inconsistent inputs rather than a user error.
    #[error("internal consistency: {0}")]
    Inconsistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
