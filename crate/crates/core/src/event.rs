//! The append-only session log.

use serde::{Deserialize, Serialize};

use crate::model::{Balloon, Sentence, Topic, TranscriptSegment, Vec3, Wall};
use crate::session::SessionMode;

/// One entry of the session log. `seq` starts at 1 and `t` is session time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    SessionStarted {
        mode: SessionMode,
    },
    TimerStarted {
        started_at: f64,
    },
    /// A segment entered the live pipeline.
    SegmentReceived {
        segment: TranscriptSegment,
    },
    /// A segment was captured for later playback.
    SegmentRecorded {
        segment: TranscriptSegment,
    },
    RecordingStopped {
        segments: usize,
    },
    TranscriptAppended {
        topic_key: String,
        sentences: Vec<Sentence>,
        word_count: usize,
    },
    BalloonCreated {
        topic: Topic,
        balloon: Balloon,
    },
    BalloonGrown {
        topic_key: String,
        radius: f64,
        word_count: usize,
    },
    BalloonMoved {
        topic_key: String,
        center: Vec3,
        pinned: bool,
    },
    BalloonDeleted {
        topic_key: String,
    },
    TopicRenamed {
        from_key: String,
        to_key: String,
        title: String,
    },
    TopicsMerged {
        from_key: String,
        into_key: String,
        word_count: usize,
        radius: f64,
    },
    SuggestionAdded {
        parent_key: String,
        topic_key: String,
    },
    OrganizeApplied {
        walls: Vec<Wall>,
    },
    PlaybackStarted {
        segments: usize,
        rate: f64,
    },
    PlaybackFinished,
    Warning {
        code: WarningCode,
        message: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStarted { .. } => "SessionStarted",
            EventKind::TimerStarted { .. } => "TimerStarted",
            EventKind::SegmentReceived { .. } => "SegmentReceived",
            EventKind::SegmentRecorded { .. } => "SegmentRecorded",
            EventKind::RecordingStopped { .. } => "RecordingStopped",
            EventKind::TranscriptAppended { .. } => "TranscriptAppended",
            EventKind::BalloonCreated { .. } => "BalloonCreated",
            EventKind::BalloonGrown { .. } => "BalloonGrown",
            EventKind::BalloonMoved { .. } => "BalloonMoved",
            EventKind::BalloonDeleted { .. } => "BalloonDeleted",
            EventKind::TopicRenamed { .. } => "TopicRenamed",
            EventKind::TopicsMerged { .. } => "TopicsMerged",
            EventKind::SuggestionAdded { .. } => "SuggestionAdded",
            EventKind::OrganizeApplied { .. } => "OrganizeApplied",
            EventKind::PlaybackStarted { .. } => "PlaybackStarted",
            EventKind::PlaybackFinished => "PlaybackFinished",
            EventKind::Warning { .. } => "Warning",
        }
    }

    pub fn warning(code: WarningCode, message: impl Into<String>) -> Self {
        EventKind::Warning {
            code,
            message: message.into(),
        }
    }

    pub fn is_warning(&self) -> bool {
        matches!(self, EventKind::Warning { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningCode {
    AlreadyCreated,
    UnknownTopic,
    TargetExists,
    ProviderFailure,
    MalformedResponse,
    SpawnFallback,
    SettleIncomplete,
    RoomSaturated,
}
