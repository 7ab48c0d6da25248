//! Scripted simulations: timed inputs, expected errors and assertions.
//!
//! ```json
//! {
//!   "name": "merge keeps words",
//!   "seed": 7,
//!   "responses": { "extract": { "Red is warm.": "TOPIC: Colors\nSENT: Red is warm." } },
//!   "steps": [
//!     { "at": 0, "do": { "kind": "StartSession" } },
//!     { "at": 1, "do": { "kind": "IngestText", "payload": { "text": "Red is warm." } } },
//!     { "assert": [ { "balloon_count": 1 } ] },
//!     { "do": { "kind": "Play" }, "expect_error": "IllegalTransition" },
//!     { "new_run": true }
//!   ]
//! }
//! ```
//!
//! `new_run` replaces the session with a fresh one (same config and
//! provider answers), which is how one script covers both modes.

use serde::{Deserialize, Serialize};

use crate::api::{dispatch, ClientInput};
use crate::error::{Error, Result};
use crate::event::SessionEvent;
use crate::layout::max_overlap;
use crate::model::{normalize_topic_key, Vec3};
use crate::provider::{provider_for, ProviderMode, ProviderScript};
use crate::session::{Session, SessionConfig, SessionPhase};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScript {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Option<SessionConfig>,
    /// Inline provider answers; selects the scripted provider.
    #[serde(default)]
    pub responses: Option<ProviderScript>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    /// Session time to advance to before the action.
    #[serde(default)]
    pub at: Option<f64>,
    #[serde(default, rename = "do")]
    pub action: Option<ClientInput>,
    /// Error code the action must fail with, e.g. `IllegalTransition`.
    #[serde(default)]
    pub expect_error: Option<String>,
    /// Run playback to completion after the action.
    #[serde(default)]
    pub play_to_end: bool,
    #[serde(default, rename = "assert")]
    pub asserts: Vec<Assertion>,
    #[serde(default)]
    pub new_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    BalloonCount(usize),
    MinBalloons(usize),
    Phase(SessionPhase),
    TopicsExist(Vec<String>),
    TopicsAbsent(Vec<String>),
    WordCount { topic: String, equals: usize },
    TotalWords(usize),
    Position { topic: String, center: Vec3, tol: f64 },
    NoOverlap,
    AllPinned,
    EventCount {
        kind: String,
        #[serde(default)]
        min: Option<usize>,
        #[serde(default)]
        max: Option<usize>,
    },
    MaxUpstreamCalls(u64),
}

impl Assertion {
    fn check(&self, s: &Session) -> std::result::Result<String, String> {
        let scene = s.scene();
        let topic = |t: &str| {
            normalize_topic_key(t)
                .ok()
                .and_then(|k| scene.topics.get(&k))
                .ok_or_else(|| format!("no topic {t:?}"))
        };
        match self {
            Assertion::BalloonCount(n) => {
                expect(scene.layout.len() == *n, format!("balloon_count == {n}"), scene.layout.len())
            }
            Assertion::MinBalloons(n) => {
                expect(scene.layout.len() >= *n, format!("balloon_count >= {n}"), scene.layout.len())
            }
            Assertion::Phase(p) => expect(s.phase() == *p, format!("phase == {p}"), s.phase()),
            Assertion::TopicsExist(ts) => {
                for t in ts {
                    topic(t)?;
                }
                Ok(format!("topics exist {ts:?}"))
            }
            Assertion::TopicsAbsent(ts) => {
                for t in ts {
                    if topic(t).is_ok() {
                        return Err(format!("topic {t:?} still exists"));
                    }
                }
                Ok(format!("topics absent {ts:?}"))
            }
            Assertion::WordCount { topic: t, equals } => {
                let wc = topic(t)?.word_count;
                expect(wc == *equals, format!("word_count({t}) == {equals}"), wc)
            }
            Assertion::TotalWords(n) => {
                let total = scene.topics.total_words();
                expect(total == *n, format!("total_words == {n}"), total)
            }
            Assertion::Position { topic: t, center, tol } => {
                let key = topic(t)?.key.clone();
                let at = scene.layout.get(&key).expect("topic has balloon").center;
                let d = at.distance(*center);
                expect(d <= *tol, format!("position({t}) within {tol} of {center:?}"), format!("{at:?}"))
            }
            Assertion::NoOverlap => {
                let o = max_overlap(&scene.layout.balloons);
                expect(o < crate::layout::OVERLAP_EPSILON, "no overlap".into(), o)
            }
            Assertion::AllPinned => {
                let loose = scene.layout.balloons.iter().filter(|b| !b.pinned).count();
                expect(loose == 0, "all pinned".into(), format!("{loose} unpinned"))
            }
            Assertion::EventCount { kind, min, max } => {
                let n = s.events().iter().filter(|e| e.kind.name() == kind).count();
                let ok = min.is_none_or(|m| n >= m) && max.is_none_or(|m| n <= m);
                expect(ok, format!("count({kind}) in [{min:?}, {max:?}]"), n)
            }
            Assertion::MaxUpstreamCalls(n) => expect(
                s.upstream_calls() <= *n,
                format!("upstream_calls <= {n}"),
                s.upstream_calls(),
            ),
        }
    }
}

fn expect(ok: bool, what: String, found: impl std::fmt::Debug) -> std::result::Result<String, String> {
    if ok {
        Ok(what)
    } else {
        Err(format!("{what}, found {found:?}"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimReport {
    pub name: String,
    pub lines: Vec<String>,
    pub assertions: usize,
    pub runs: usize,
    pub failure: Option<String>,
    /// Event log of each run, in order.
    pub logs: Vec<Vec<SessionEvent>>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn render(&self) -> String {
        let mut out = format!("simulate {}\n", self.name);
        for line in &self.lines {
            out.push_str("  ");
            out.push_str(line);
            out.push('\n');
        }
        match &self.failure {
            None => out.push_str(&format!(
                "PASS {} assertions, {} run(s)\n",
                self.assertions, self.runs
            )),
            Some(f) => out.push_str(&format!("FAIL {f}\n")),
        }
        out
    }
}

/// Options the command line can override.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub provider: Option<ProviderMode>,
    pub responses: Option<ProviderScript>,
    pub seed: Option<u64>,
    pub speed: Option<f64>,
}

fn kind_name(input: &ClientInput) -> &'static str {
    match input {
        ClientInput::IngestText { .. } => "IngestText",
        ClientInput::UpdateGaze { .. } => "UpdateGaze",
        ClientInput::GrabMove { .. } => "GrabMove",
        ClientInput::ClickButton { .. } => "ClickButton",
        ClientInput::Organize => "Organize",
        ClientInput::StartRecording => "StartRecording",
        ClientInput::StopRecording => "StopRecording",
        ClientInput::Play(_) => "Play",
        ClientInput::StartSession => "StartSession",
    }
}

/// Runs a script. Setup problems are errors; failed steps are reported.
pub fn run_script(script: &SimScript, opts: &SimOptions) -> Result<SimReport> {
    let mut config = script.config.clone().unwrap_or_default();
    if let Some(seed) = opts.seed.or(script.seed) {
        config.room.rng_seed = seed;
    }
    if let Some(speed) = opts.speed {
        config.playback_rate = speed;
    }
    config.validate()?;
    let responses = opts.responses.clone().or_else(|| script.responses.clone());
    let mode = opts.provider.unwrap_or(if responses.is_some() {
        ProviderMode::Scripted
    } else {
        ProviderMode::Rule
    });
    let new_session = || -> Result<Session> {
        Session::new(config.clone(), provider_for(mode, responses.as_ref())?)
    };

    let mut report = SimReport {
        name: script.name.clone().unwrap_or_else(|| "script".into()),
        runs: 1,
        ..SimReport::default()
    };
    let mut session = new_session()?;

    for (i, step) in script.steps.iter().enumerate() {
        let n = i + 1;
        if step.new_run {
            report.logs.push(session.events().to_vec());
            session = new_session()?;
            report.runs += 1;
            report.lines.push(format!("step {n}: new run"));
        }
        if let Some(at) = step.at {
            if let Err(e) = session.advance_to(at) {
                report.failure = Some(format!("step {n}: {} ({e})", e.code()));
                break;
            }
        }
        if let Some(action) = &step.action {
            let name = kind_name(action);
            let t = session.now();
            let result = dispatch(&mut session, action.clone(), t);
            match (&step.expect_error, result) {
                (None, Ok(_)) => report.lines.push(format!("step {n} @{t:.3}: {name} ok")),
                (None, Err(e)) => {
                    report.failure = Some(format!("step {n}: {name} failed with {} ({e})", e.code()));
                    break;
                }
                (Some(code), Err(e)) if e.code() == code => {
                    report.lines.push(format!("step {n} @{t:.3}: {name} rejected with {code} as expected"));
                }
                (Some(code), Err(e)) => {
                    report.failure = Some(format!("step {n}: {name} expected {code}, got {} ({e})", e.code()));
                    break;
                }
                (Some(code), Ok(_)) => {
                    report.failure = Some(format!("step {n}: {name} expected {code}, but it succeeded"));
                    break;
                }
            }
        }
        if step.play_to_end {
            if let Err(e) = session.play_to_end() {
                report.failure = Some(format!("step {n}: playback failed with {} ({e})", e.code()));
                break;
            }
            report.lines.push(format!("step {n} @{:.3}: playback finished", session.now()));
        }
        for a in &step.asserts {
            match a.check(&session) {
                Ok(what) => {
                    report.assertions += 1;
                    report.lines.push(format!("step {n}: assert {what} ok"));
                }
                Err(why) => {
                    report.failure = Some(format!("step {n}: assert {why}"));
                    break;
                }
            }
        }
        if report.failure.is_some() {
            break;
        }
    }
    report.logs.push(session.events().to_vec());
    Ok(report)
}

pub fn parse_script(text: &str) -> Result<SimScript> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Persistence {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
