use thiserror::Error;

use crate::session::{SessionAction, SessionPhase};

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topic title: {0:?}")]
    InvalidTitle(String),

    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("query time {now} precedes creation time {created_at}")]
    TimeInversion { created_at: f64, now: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("illegal transition: cannot {action} while {phase}")]
    IllegalTransition {
        phase: SessionPhase,
        action: SessionAction,
    },

    #[error("recording is empty")]
    EmptyRecording,

    #[error("unknown balloon {0:?}")]
    UnknownBalloon(String),

    #[error("unknown topic {0:?}")]
    UnknownTopic(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("persistence error at `{path}`: {message}")]
    Persistence { path: String, message: String },

    #[error("provider error: {0}")]
    Provider(#[from] ProviderError),

    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Variant name, used by scripts that expect a particular failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidTitle(_) => "InvalidTitle",
            Error::InvalidSegment(_) => "InvalidSegment",
            Error::TimeInversion { .. } => "TimeInversion",
            Error::Config(_) => "Config",
            Error::IllegalTransition { .. } => "IllegalTransition",
            Error::EmptyRecording => "EmptyRecording",
            Error::UnknownBalloon(_) => "UnknownBalloon",
            Error::UnknownTopic(_) => "UnknownTopic",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Persistence { .. } => "Persistence",
            Error::Provider(_) => "Provider",
            Error::Bind { .. } => "Bind",
            Error::Io(_) => "Io",
        }
    }
}

/// Failures of a language-model provider.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("no scripted response for {0}")]
    NoScript(String),

    #[error("missing credentials: {0}")]
    MissingCredentials(String),

    #[error("transport: {0}")]
    Transport(String),

    #[error("{0}")]
    Other(String),
}

/// A provider response that does not follow the line format.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed response at line {line}: {reason}")]
pub struct ParseFailure {
    pub line: usize,
    pub reason: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
