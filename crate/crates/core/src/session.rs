//! Session state machine, event log, narrative modes and persistence.
//!
//! ```text
//!  Idle ──start_session──▶ Live
//!  Idle ──start_recording──▶ Recording ──stop_recording──▶ Recorded ──play──▶ Playing ──▶ Done
//! ```
//!
//! Every change to the scene is appended to the log as a [`SessionEvent`];
//! replaying the log with [`Scene::replay`] rebuilds the same topics and
//! balloons. Time is whatever the caller passes in, so a test clock and a
//! wall clock drive the session the same way.

use std::fmt;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::commands::{self, parse_command};
use crate::error::{Error, Result};
use crate::event::{EventKind, SessionEvent};
use crate::extractor::{self, ExtractOutcome, DEFAULT_N_EXPAND};
use crate::layout::{self, BalloonSnapshot};
use crate::model::{
    Balloon, GazeState, RoomConfig, SegmentSource, Sentence, TranscriptSegment, Vec3, Wall,
    DEFAULT_ALPHA,
};
use crate::provider::{CachingProvider, Provider, ProviderCache};
use crate::scene::{Scene, TopicStore};
use crate::segmenter::{Segmenter, SttEvent, DEFAULT_WORDS_PER_SECOND};

pub const FORMAT_VERSION: u32 = 1;
pub const SESSION_FILE_SUFFIX: &str = ".balloons.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    Interactive,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionPhase {
    Idle,
    Live,
    Recording,
    Recorded,
    Playing,
    Done,
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Operations gated by the phase machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionAction {
    StartSession,
    StartRecording,
    StopRecording,
    Play,
    Ingest,
}

impl fmt::Display for SessionAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SessionAction::StartSession => "start the session",
            SessionAction::StartRecording => "start recording",
            SessionAction::StopRecording => "stop recording",
            SessionAction::Play => "play",
            SessionAction::Ingest => "ingest speech",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub room: RoomConfig,
    pub n_expand: usize,
    pub playback_rate: f64,
    pub words_per_second: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            room: RoomConfig::default(),
            n_expand: DEFAULT_N_EXPAND,
            playback_rate: 1.0,
            words_per_second: DEFAULT_WORDS_PER_SECOND,
        }
    }
}

impl SessionConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            room: RoomConfig::with_seed(seed),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        if !(self.playback_rate.is_finite() && self.playback_rate > 0.0) {
            return Err(Error::Config("playback_rate must be positive".into()));
        }
        if !(self.words_per_second.is_finite() && self.words_per_second > 0.0) {
            return Err(Error::Config("words_per_second must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub started_at: f64,
    pub segments: Vec<TranscriptSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playback {
    pub started_at: f64,
    pub rate: f64,
    pub next: usize,
}

/// Balloon buttons offered on click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BalloonButton {
    View,
    Delete,
    Add,
    Finish,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClickOutcome {
    pub events: Vec<SessionEvent>,
    /// Sentences of the topic, for `View`.
    pub view: Option<Vec<Sentence>>,
}

/// Mutable bookkeeping that is not part of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeState {
    pub phase: SessionPhase,
    pub mode: SessionMode,
    pub now: f64,
    pub recording: Recording,
    pub playback: Option<Playback>,
    /// Topic receiving speech after an `Add` click.
    pub add_target: Option<String>,
    pub segmenter: Segmenter,
    pub user_pose: GazeState,
    pub organized_wall: Option<Wall>,
    pub last_step: f64,
    pub upstream_calls: u64,
}

/// Read-only view for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub phase: SessionPhase,
    pub mode: SessionMode,
    pub now: f64,
    pub last_seq: u64,
    pub add_target: Option<String>,
    pub topics: TopicStore,
    pub layout: Vec<BalloonSnapshot>,
}

/// On-disk session document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionFile {
    pub format_version: u32,
    pub config: SessionConfig,
    pub events: Vec<SessionEvent>,
    pub topics: TopicStore,
    pub layout: Vec<BalloonSnapshot>,
    pub provider_cache: ProviderCache,
    pub rng_state: ChaCha8Rng,
    pub state: RuntimeState,
}

pub struct Session {
    config: SessionConfig,
    scene: Scene,
    log: Vec<SessionEvent>,
    cache: ProviderCache,
    provider: Box<dyn Provider>,
    phase: SessionPhase,
    mode: SessionMode,
    now: f64,
    recording: Recording,
    playback: Option<Playback>,
    add_target: Option<String>,
    segmenter: Segmenter,
    upstream_calls: u64,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("phase", &self.phase)
            .field("now", &self.now)
            .field("events", &self.log.len())
            .field("topics", &self.scene.topics.len())
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(config: SessionConfig, provider: Box<dyn Provider>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            scene: Scene::new(config.room.clone()),
            config,
            log: Vec::new(),
            cache: ProviderCache::default(),
            provider,
            phase: SessionPhase::Idle,
            mode: SessionMode::Interactive,
            now: 0.0,
            recording: Recording::default(),
            playback: None,
            add_target: None,
            segmenter: Segmenter::new(SegmentSource::Live),
            upstream_calls: 0,
        })
    }

    /// Seeds the provider cache, e.g. from an earlier run of the same recording.
    pub fn with_cache(mut self, cache: ProviderCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn mode(&self) -> SessionMode {
        self.mode
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.log
    }

    /// Events with `seq > since`, in order.
    pub fn events_since(&self, since: u64) -> &[SessionEvent] {
        let start = (since as usize).min(self.log.len());
        &self.log[start..]
    }

    pub fn last_seq(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn cache(&self) -> &ProviderCache {
        &self.cache
    }

    /// Requests that missed the cache and reached the provider.
    pub fn upstream_calls(&self) -> u64 {
        self.upstream_calls
    }

    pub fn recording(&self) -> &Recording {
        &self.recording
    }

    pub fn add_target(&self) -> Option<&str> {
        self.add_target.as_deref()
    }

    pub fn gaze(&self) -> GazeState {
        self.scene.layout.user_pose
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            phase: self.phase,
            mode: self.mode,
            now: self.now,
            last_seq: self.last_seq(),
            add_target: self.add_target.clone(),
            topics: self.scene.topics.clone(),
            layout: self.scene.layout.snapshot(),
        }
    }

    fn emit(&mut self, kinds: impl IntoIterator<Item = EventKind>) -> Vec<SessionEvent> {
        let start = self.log.len();
        for kind in kinds {
            let ev = SessionEvent {
                seq: self.log.len() as u64 + 1,
                t: self.now,
                kind,
            };
            self.log.push(ev);
        }
        self.log[start..].to_vec()
    }

    fn require(&self, action: SessionAction, allowed: &[SessionPhase]) -> Result<()> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(Error::IllegalTransition {
                phase: self.phase,
                action,
            })
        }
    }

    fn set_clock(&mut self, t: f64) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Enters interactive mode and starts the timer.
    pub fn start_session(&mut self) -> Result<Vec<SessionEvent>> {
        self.require(SessionAction::StartSession, &[SessionPhase::Idle])?;
        self.phase = SessionPhase::Live;
        self.mode = SessionMode::Interactive;
        self.segmenter = Segmenter::starting_at(SegmentSource::Live, self.segmenter.next_id());
        let now = self.now;
        Ok(self.emit([
            EventKind::SessionStarted {
                mode: SessionMode::Interactive,
            },
            EventKind::TimerStarted { started_at: now },
        ]))
    }

    /// Enters linear mode: speech is captured now and processed on `play`.
    pub fn start_recording(&mut self) -> Result<Vec<SessionEvent>> {
        self.require(SessionAction::StartRecording, &[SessionPhase::Idle])?;
        self.phase = SessionPhase::Recording;
        self.mode = SessionMode::Linear;
        self.recording = Recording {
            started_at: self.now,
            segments: Vec::new(),
        };
        self.segmenter = Segmenter::starting_at(SegmentSource::Recording, self.segmenter.next_id());
        let now = self.now;
        Ok(self.emit([
            EventKind::SessionStarted {
                mode: SessionMode::Linear,
            },
            EventKind::TimerStarted { started_at: now },
        ]))
    }

    pub fn stop_recording(&mut self) -> Result<Vec<SessionEvent>> {
        self.require(SessionAction::StopRecording, &[SessionPhase::Recording])?;
        let mut out = Vec::new();
        if let Some(seg) = self.segmenter.flush() {
            out.extend(self.record_segment(seg));
        }
        self.phase = SessionPhase::Recorded;
        let n = self.recording.segments.len();
        out.extend(self.emit([EventKind::RecordingStopped { segments: n }]));
        Ok(out)
    }

    /// Starts replaying the recording. Segments are re-emitted at their
    /// original offsets divided by `rate` as the clock advances.
    pub fn play(&mut self, rate: Option<f64>) -> Result<Vec<SessionEvent>> {
        self.require(SessionAction::Play, &[SessionPhase::Recorded])?;
        if self.recording.segments.is_empty() {
            return Err(Error::EmptyRecording);
        }
        let rate = rate.unwrap_or(self.config.playback_rate);
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidInput("playback rate must be positive".into()));
        }
        self.phase = SessionPhase::Playing;
        self.playback = Some(Playback {
            started_at: self.now,
            rate,
            next: 0,
        });
        let n = self.recording.segments.len();
        let mut out = self.emit([EventKind::PlaybackStarted { segments: n, rate }]);
        out.extend(self.advance_to(self.now)?);
        Ok(out)
    }

    /// Session time at which recorded segment `idx` plays.
    pub fn playback_time(&self, idx: usize) -> Option<f64> {
        let pb = self.playback.as_ref()?;
        let seg = self.recording.segments.get(idx)?;
        Some(pb.started_at + (seg.t_start - self.recording.started_at) / pb.rate)
    }

    /// Feeds a recognizer fragment through the silence segmenter.
    pub fn ingest_stt(&mut self, ev: &SttEvent) -> Result<Vec<SessionEvent>> {
        self.require(
            SessionAction::Ingest,
            &[SessionPhase::Live, SessionPhase::Recording],
        )?;
        let mut out = Vec::new();
        for seg in self.segmenter.ingest(ev) {
            out.extend(self.ingest_segment(seg)?);
        }
        Ok(out)
    }

    /// A complete utterance at time `t`.
    pub fn ingest_text(&mut self, text: &str, t: f64) -> Result<Vec<SessionEvent>> {
        self.ingest_stt(&SttEvent::final_(text, t.max(self.now)))
    }

    /// Routes a segment by phase: processed when live, captured when recording.
    pub fn ingest_segment(&mut self, seg: TranscriptSegment) -> Result<Vec<SessionEvent>> {
        match self.phase {
            SessionPhase::Live => self.handle_segment(seg),
            SessionPhase::Recording => {
                seg.validate()?;
                Ok(self.record_segment(seg))
            }
            phase => Err(Error::IllegalTransition {
                phase,
                action: SessionAction::Ingest,
            }),
        }
    }

    fn record_segment(&mut self, mut seg: TranscriptSegment) -> Vec<SessionEvent> {
        self.set_clock(seg.t_end);
        seg.source = SegmentSource::Recording;
        self.recording.segments.push(seg.clone());
        self.emit([EventKind::SegmentRecorded { segment: seg }])
    }

    /// Runs one segment through commands, add mode or topic extraction.
    pub fn handle_segment(&mut self, seg: TranscriptSegment) -> Result<Vec<SessionEvent>> {
        self.require(
            SessionAction::Ingest,
            &[SessionPhase::Live, SessionPhase::Playing],
        )?;
        seg.validate()?;
        self.set_clock(seg.t_end);
        let now = self.now;

        let mut kinds = layout::step_drift(&mut self.scene.layout, now, &self.config.room)?;
        kinds.push(EventKind::SegmentReceived {
            segment: seg.clone(),
        });

        if let Some(target) = &self.add_target {
            if !self.scene.topics.contains(target) {
                self.add_target = None;
            }
        }

        let command = parse_command(&seg.text);
        let mut provider = CachingProvider {
            inner: &mut *self.provider,
            cache: &mut self.cache,
            upstream_calls: &mut self.upstream_calls,
        };
        if command.is_command() {
            kinds.extend(commands::execute_command(
                &command,
                &mut self.scene,
                &mut provider,
                now,
                self.config.n_expand,
            ));
        } else if let Some(target) = self.add_target.clone() {
            let sentence = Sentence::new(Some(seg.id), seg.text.trim());
            kinds.extend(self.scene.append_sentences(&target, vec![sentence])?);
        } else {
            match extractor::request_extraction(&seg, &self.scene, &mut provider) {
                ExtractOutcome::Parsed(ex) => kinds.extend(extractor::apply_extraction(
                    &ex,
                    &mut self.scene,
                    now,
                    Some(seg.id),
                )),
                ExtractOutcome::Failed(warning) => kinds.push(warning),
            }
        }
        kinds.extend(self.scene.settle());
        Ok(self.emit(kinds))
    }

    /// Moves the clock to `t`: closes timed-out utterances, plays due
    /// recorded segments and lets balloons drift.
    pub fn advance_to(&mut self, t: f64) -> Result<Vec<SessionEvent>> {
        if t < self.now {
            return Err(Error::TimeInversion {
                created_at: self.now,
                now: t,
            });
        }
        let mut out = Vec::new();

        if matches!(self.phase, SessionPhase::Live | SessionPhase::Recording) {
            if let Some(seg) = self.segmenter.poll(t) {
                out.extend(self.ingest_segment(seg)?);
            }
        }

        while self.phase == SessionPhase::Playing {
            let pb = self.playback.as_ref().expect("playing without playback");
            let idx = pb.next;
            if idx >= self.recording.segments.len() {
                self.phase = SessionPhase::Done;
                out.extend(self.emit([EventKind::PlaybackFinished]));
                break;
            }
            let due = self.playback_time(idx).expect("index checked");
            if due > t {
                break;
            }
            let rate = pb.rate;
            let original = &self.recording.segments[idx];
            let replayed = TranscriptSegment {
                t_start: due,
                t_end: due + (original.t_end - original.t_start) / rate,
                ..original.clone()
            };
            self.playback.as_mut().expect("checked").next += 1;
            out.extend(self.handle_segment(replayed)?);
        }

        self.set_clock(t);
        let now = self.now;
        let drift = layout::step_drift(&mut self.scene.layout, now, &self.config.room)?;
        out.extend(self.emit(drift));
        Ok(out)
    }

    /// When the next recorded segment plays, if any remain.
    pub fn next_playback_time(&self) -> Option<f64> {
        let pb = self.playback.as_ref()?;
        self.playback_time(pb.next)
    }

    /// Runs playback to completion, stepping the clock segment by segment.
    pub fn play_to_end(&mut self) -> Result<Vec<SessionEvent>> {
        let mut out = Vec::new();
        while self.phase == SessionPhase::Playing {
            let next = self.next_playback_time().unwrap_or(self.now);
            out.extend(self.advance_to(next.max(self.now))?);
        }
        Ok(out)
    }

    pub fn update_gaze(&mut self, origin: Vec3, direction: Vec3) -> Result<GazeState> {
        let gaze = GazeState::new(origin, direction)?;
        self.scene.layout.user_pose = gaze;
        Ok(gaze)
    }

    pub fn grab_move(&mut self, key: &str, target: Vec3) -> Result<Vec<SessionEvent>> {
        let kinds = layout::grab_move(&mut self.scene.layout, key, target, &self.config.room)?;
        Ok(self.emit(kinds))
    }

    pub fn organize(&mut self) -> Result<Vec<SessionEvent>> {
        let gaze = self.scene.layout.user_pose;
        let kinds = layout::organize(&mut self.scene.layout, &gaze, &self.config.room);
        Ok(self.emit(kinds))
    }

    pub fn click(&mut self, key: &str, button: BalloonButton) -> Result<ClickOutcome> {
        let key = crate::model::normalize_topic_key(key)
            .map_err(|_| Error::UnknownBalloon(key.to_string()))?;
        let topic = self
            .scene
            .topics
            .get(&key)
            .ok_or_else(|| Error::UnknownBalloon(key.clone()))?;
        match button {
            BalloonButton::View => Ok(ClickOutcome {
                events: Vec::new(),
                view: Some(topic.sentences.clone()),
            }),
            BalloonButton::Delete => {
                if self.add_target.as_deref() == Some(key.as_str()) {
                    self.add_target = None;
                }
                let kinds = self.scene.delete_topic(&key)?;
                Ok(ClickOutcome {
                    events: self.emit(kinds),
                    view: None,
                })
            }
            BalloonButton::Add => {
                self.add_target = Some(key);
                Ok(ClickOutcome::default())
            }
            BalloonButton::Finish => {
                self.add_target = None;
                Ok(ClickOutcome::default())
            }
        }
    }

    pub fn to_file(&self) -> SessionFile {
        SessionFile {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            events: self.log.clone(),
            topics: self.scene.topics.clone(),
            layout: self.scene.layout.snapshot(),
            provider_cache: self.cache.clone(),
            rng_state: self.scene.layout.rng.clone(),
            state: RuntimeState {
                phase: self.phase,
                mode: self.mode,
                now: self.now,
                recording: self.recording.clone(),
                playback: self.playback.clone(),
                add_target: self.add_target.clone(),
                segmenter: self.segmenter.clone(),
                user_pose: self.scene.layout.user_pose,
                organized_wall: self.scene.layout.organized_wall,
                last_step: self.scene.layout.last_step,
                upstream_calls: self.upstream_calls,
            },
        }
    }

    pub fn from_file(file: SessionFile, provider: Box<dyn Provider>) -> Result<Self> {
        let persist = |path: &str, message: String| Error::Persistence {
            path: path.to_string(),
            message,
        };
        if file.format_version != FORMAT_VERSION {
            return Err(persist(
                "format_version",
                format!("unsupported version {}", file.format_version),
            ));
        }
        file.config
            .validate()
            .map_err(|e| persist("config", e.to_string()))?;

        let mut scene = Scene::new(file.config.room.clone());
        scene.topics = file.topics;
        for (i, b) in file.layout.iter().enumerate() {
            let topic = scene.topics.get(&b.topic_key).ok_or_else(|| {
                persist(&format!("layout[{i}].topic_key"), format!("no topic {:?}", b.topic_key))
            })?;
            scene.layout.balloons.push(Balloon {
                topic_key: b.topic_key.clone(),
                center: b.center.into(),
                radius: b.radius,
                created_at: topic.created_at,
                pinned: b.pinned,
                alpha: DEFAULT_ALPHA,
            });
        }
        if scene.layout.len() != scene.topics.len() {
            return Err(persist("layout", "balloon and topic counts differ".into()));
        }
        for (i, ev) in file.events.iter().enumerate() {
            if ev.seq != i as u64 + 1 {
                return Err(persist(&format!("events[{i}].seq"), "sequence gap".into()));
            }
        }
        let rebuilt = Scene::replay(file.config.room.clone(), &file.events);
        if !rebuilt.same_content(&scene) {
            return Err(persist("events", "log does not reproduce topics and layout".into()));
        }
        scene.layout.rng = file.rng_state;
        scene.layout.user_pose = file.state.user_pose;
        scene.layout.organized_wall = file.state.organized_wall;
        scene.layout.last_step = file.state.last_step;

        Ok(Self {
            config: file.config,
            scene,
            log: file.events,
            cache: file.provider_cache,
            provider,
            phase: file.state.phase,
            mode: file.state.mode,
            now: file.state.now,
            recording: file.state.recording,
            playback: file.state.playback,
            add_target: file.state.add_target,
            segmenter: file.state.segmenter,
            upstream_calls: file.state.upstream_calls,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::Persistence {
            path: String::new(),
            message: e.to_string(),
        })?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, provider: Box<dyn Provider>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, provider)
    }

    pub fn from_json(text: &str, provider: Box<dyn Provider>) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Persistence {
                path: String::from("$"),
                message: e.to_string(),
            })?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Persistence {
                    path: "format_version".into(),
                    message: format!("unsupported version {v}"),
                })
            }
            None => {
                return Err(Error::Persistence {
                    path: "format_version".into(),
                    message: "missing or not an integer".into(),
                })
            }
        }
        let file: SessionFile =
            serde_path_to_error::deserialize(value).map_err(|e| Error::Persistence {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Self::from_file(file, provider)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ProviderError;
    use crate::provider::{ProviderRequest, ScriptedProvider};

    fn scripted() -> ScriptedProvider {
        let mut p = ScriptedProvider::new();
        p.on_segment("We fly to Rome in June", "TOPIC: Rome\nSENT: We fly to Rome in June")
            .on_segment(
                "The hotel budget is tight",
                "TOPIC: Budget\nSENT: The hotel budget is tight",
            )
            .on_segment(
                "Rome has great food and a tight budget",
                "TOPIC: Rome\nSENT: Rome has great food\nTOPIC: Budget\nSENT: a tight budget",
            );
        p
    }

    fn live_session() -> Session {
        let mut s = Session::new(SessionConfig::with_seed(5), Box::new(scripted())).unwrap();
        s.start_session().unwrap();
        s
    }

    struct Offline;
    impl Provider for Offline {
        fn complete(&mut self, _: &ProviderRequest) -> Result<String, ProviderError> {
            Err(ProviderError::Transport("offline".into()))
        }
    }

    #[test]
    fn start_emits_timer() {
        let mut s = Session::new(SessionConfig::default(), Box::new(Offline)).unwrap();
        let ev = s.start_session().unwrap();
        let names: Vec<_> = ev.iter().map(|e| e.kind.name()).collect();
        assert_eq!(names, ["SessionStarted", "TimerStarted"]);
        assert_eq!((ev[0].seq, ev[1].seq), (1, 2));
        assert!(matches!(s.start_session(), Err(Error::IllegalTransition { .. })));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = SessionConfig::default();
        cfg.room.r_min = 2.0;
        assert!(matches!(Session::new(cfg, Box::new(Offline)), Err(Error::Config(_))));
    }

    #[test]
    fn segments_create_and_grow() {
        let mut s = live_session();
        s.ingest_text("We fly to Rome in June", 1.0).unwrap();
        s.ingest_text("The hotel budget is tight", 4.0).unwrap();
        let ev = s.ingest_text("Rome has great food and a tight budget", 8.0).unwrap();
        let names: Vec<_> = ev.iter().map(|e| e.kind.name()).collect();
        assert!(names.contains(&"TranscriptAppended"));
        assert_eq!(names.iter().filter(|n| **n == "BalloonGrown").count(), 2);
        let rome = s.scene().topics.get("rome").unwrap();
        assert_eq!(rome.word_count, 10);
        assert_eq!(rome.sentences[1].segment_id, Some(3));
        let rebuilt = Scene::replay(s.config().room.clone(), s.events());
        assert!(rebuilt.same_content(s.scene()));
    }

    #[test]
    fn delete_command_bypasses_provider() {
        let mut s = live_session();
        s.ingest_text("We fly to Rome in June", 1.0).unwrap();
        let calls = s.upstream_calls();
        let ev = s.ingest_text("Delete Rome", 2.0).unwrap();
        assert!(ev.iter().any(|e| e.kind.name() == "BalloonDeleted"));
        assert_eq!(s.upstream_calls(), calls);
        assert!(s.scene().topics.is_empty());
    }

    #[test]
    fn provider_failure_becomes_warning() {
        let mut s = Session::new(SessionConfig::default(), Box::new(Offline)).unwrap();
        s.start_session().unwrap();
        let ev = s.ingest_text("anything at all", 1.0).unwrap();
        assert!(ev.last().unwrap().kind.is_warning());
        assert!(s.scene().topics.is_empty());
    }

    #[test]
    fn ingest_in_wrong_phase() {
        let mut s = Session::new(SessionConfig::default(), Box::new(Offline)).unwrap();
        assert!(matches!(s.ingest_text("x", 0.0), Err(Error::IllegalTransition { .. })));
        s.start_recording().unwrap();
        s.ingest_text("x", 1.0).unwrap();
        s.stop_recording().unwrap();
        let seg = TranscriptSegment::new(9, "x", 2.0, 2.0, SegmentSource::Live).unwrap();
        assert!(matches!(s.ingest_segment(seg), Err(Error::IllegalTransition { .. })));
    }

    #[test]
    fn add_mode_appends_without_extraction() {
        let mut s = live_session();
        s.ingest_text("We fly to Rome in June", 1.0).unwrap();
        s.click("Rome", BalloonButton::Add).unwrap();
        let calls = s.upstream_calls();
        let ev = s.ingest_text("unscripted words about the city", 2.0).unwrap();
        let names: Vec<_> = ev.iter().map(|e| e.kind.name()).collect();
        assert!(names.contains(&"TranscriptAppended") && names.contains(&"BalloonGrown"));
        assert_eq!(s.upstream_calls(), calls);
        assert_eq!(s.scene().topics.get("rome").unwrap().word_count, 11);
        s.click("rome", BalloonButton::Finish).unwrap();
        assert_eq!(s.add_target(), None);
    }

    #[test]
    fn view_does_not_log() {
        let mut s = live_session();
        s.ingest_text("We fly to Rome in June", 1.0).unwrap();
        let n = s.events().len();
        let out = s.click("ROME", BalloonButton::View).unwrap();
        assert_eq!(out.view.unwrap()[0].text, "We fly to Rome in June");
        assert_eq!(s.events().len(), n);
        assert!(matches!(s.click("ghost", BalloonButton::View), Err(Error::UnknownBalloon(_))));
    }

    #[test]
    fn playback_schedule_and_rate() {
        for (rate, expected) in [(1.0, [1.0, 5.0, 9.0]), (2.0, [0.5, 2.5, 4.5])] {
            let mut s = Session::new(SessionConfig::default(), Box::new(scripted())).unwrap();
            s.start_recording().unwrap();
            for (text, t) in [
                ("We fly to Rome in June", 1.0),
                ("The hotel budget is tight", 5.0),
                ("Rome has great food and a tight budget", 9.0),
            ] {
                let seg = TranscriptSegment::new(0, text, t, t, SegmentSource::Live).unwrap();
                s.ingest_segment(seg).unwrap();
            }
            s.stop_recording().unwrap();
            s.advance_to(20.0).unwrap();
            s.play(Some(rate)).unwrap();
            s.play_to_end().unwrap();
            assert_eq!(s.phase(), SessionPhase::Done);
            let times: Vec<f64> = s
                .events()
                .iter()
                .filter(|e| e.kind.name() == "SegmentReceived")
                .map(|e| e.t - 20.0)
                .collect();
            assert_eq!(times, expected);
            assert_eq!(s.events().last().unwrap().kind, EventKind::PlaybackFinished);
        }
    }

    #[test]
    fn empty_recording_cannot_play() {
        let mut s = Session::new(SessionConfig::default(), Box::new(Offline)).unwrap();
        s.start_recording().unwrap();
        s.stop_recording().unwrap();
        assert!(matches!(s.play(None), Err(Error::EmptyRecording)));
    }

    #[test]
    fn silence_timeout_via_clock() {
        let mut s = live_session();
        s.ingest_stt(&SttEvent::partial("We fly to Rome", 1.0)).unwrap();
        assert!(s.advance_to(1.2).unwrap().is_empty());
        s.ingest_stt(&SttEvent::partial("in June", 1.25)).unwrap();
        let ev = s.advance_to(1.6).unwrap();
        assert!(ev.iter().any(|e| e.kind.name() == "BalloonCreated"));
    }

    #[test]
    fn save_load_round_trip() {
        let mut s = live_session();
        s.ingest_text("We fly to Rome in June", 1.0).unwrap();
        s.ingest_text("The hotel budget is tight", 4.0).unwrap();
        s.click("rome", BalloonButton::Add).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.balloons.json");
        s.save(&path).unwrap();
        let loaded = Session::load(&path, Box::new(Offline)).unwrap();
        assert_eq!(loaded.scene(), s.scene());
        assert_eq!(loaded.events(), s.events());
        assert_eq!(loaded.cache(), s.cache());
        assert_eq!(loaded.config(), s.config());
        assert_eq!(loaded.add_target(), Some("rome"));
        assert_eq!(loaded.to_file().state, s.to_file().state);
    }

    #[test]
    fn corrupt_files_report_paths() {
        let s = live_session();
        let json = serde_json::to_string(&s.to_file()).unwrap();
        let truncated = &json[..json.len() / 2];
        assert!(matches!(
            Session::from_json(truncated, Box::new(Offline)),
            Err(Error::Persistence { .. })
        ));

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["format_version"] = 2.into();
        match Session::from_json(&v.to_string(), Box::new(Offline)) {
            Err(Error::Persistence { path, .. }) => assert_eq!(path, "format_version"),
            other => panic!("{other:?}"),
        }

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["config"]["room"]["width"] = "wide".into();
        match Session::from_json(&v.to_string(), Box::new(Offline)) {
            Err(Error::Persistence { path, .. }) => assert_eq!(path, "config.room.width"),
            other => panic!("{other:?}"),
        }
    }
}
