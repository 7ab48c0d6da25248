//! Turns spoken brainstorming into topic balloons floating in a room.
//!
//! Speech is cut into utterances by [`segmenter`], sorted into topics by
//! [`extractor`] (or handled directly by [`commands`]), and each topic gets a
//! balloon whose size follows its word count and whose height follows its age
//! ([`layout`]). A [`session::Session`] ties it together with an event log,
//! recording and playback, and save/load. [`api`] serves sessions over HTTP
//! and WebSocket.

pub mod api;
pub mod cli;
pub mod commands;
pub mod error;
pub mod event;
pub mod extractor;
pub mod layout;
pub mod model;
pub mod provider;
pub mod scene;
pub mod segmenter;
pub mod session;
pub mod sim;

pub use error::{Error, ProviderError, Result};
pub use event::{EventKind, SessionEvent, WarningCode};
pub use model::{Balloon, GazeState, RoomConfig, Topic, TranscriptSegment, Vec3};
pub use provider::{Provider, ProviderMode, RuleProvider, ScriptedProvider};
pub use scene::Scene;
pub use session::{BalloonButton, Session, SessionConfig, SessionMode, SessionPhase};
