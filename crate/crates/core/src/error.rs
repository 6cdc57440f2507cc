use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("no post-selected events")]
    NoPostSelectedEvents,

    #[error("no mode beating; coupler never splits")]
    NoModeBeating,

    #[error("no interference feature detected")]
    NoInterferenceFeature,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("expected counts {mean:e} at stage position {position_um} um exceed the simulation limit")]
    MeanOverflow { position_um: f64, mean: f64 },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the physics of the inputs rather than by
    /// malformed values.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::NoPostSelectedEvents | Error::NoModeBeating | Error::NoInterferenceFeature
        )
    }
}
