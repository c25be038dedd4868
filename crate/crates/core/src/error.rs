use thiserror::Error;

/// Errors raised by estimation, inference and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Kaplan–Meier curve of a group stops before the end of the window.
    #[error(
        "group {group}: Kaplan-Meier curve is only estimable up to t = {estimable_to} \
         (largest observation is censored) but tau = {tau}; choose tau <= {estimable_to}"
    )]
    NotEstimable {
        group: usize,
        estimable_to: f64,
        tau: f64,
    },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("dataset generation failed: {0}")]
    Pathological(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
