//! Voice commands, recognized before any text reaches the provider.
//!
//! | Utterance              | Command  |
//! |------------------------|----------|
//! | `create <A>`           | Create   |
//! | `change <A> into <B>`  | Change   |
//! | `expand <A>`           | Expand   |
//! | `delete <A>`           | Delete   |
//! | `merge <A> into <B>`   | Merge    |
//!
//! Keywords match case-insensitively and only at the start of the
//! utterance. Trailing punctuation is ignored.

use crate::event::{EventKind, WarningCode};
use crate::extractor;
use crate::model::{normalize_topic_key, Sentence, Topic, TopicOrigin};
use crate::provider::Provider;
use crate::scene::Scene;

/// Note stored in topics created by voice.
pub const CREATED_BY_VOICE_NOTE: &str = "You created this balloon by voice command.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoiceCommand {
    Create(String),
    Change { from: String, to: String },
    Expand(String),
    Delete(String),
    Merge { from: String, into: String },
    NotACommand(String),
}

impl VoiceCommand {
    pub fn is_command(&self) -> bool {
        !matches!(self, VoiceCommand::NotACommand(_))
    }
}

pub fn parse_command(text: &str) -> VoiceCommand {
    let not = || VoiceCommand::NotACommand(text.to_string());
    let body = text
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());

    let Some((keyword, rest)) = split_keyword(body) else {
        return not();
    };
    let rest = rest.trim();
    if rest.is_empty() {
        return not();
    }
    match keyword.to_ascii_lowercase().as_str() {
        "create" => VoiceCommand::Create(rest.to_string()),
        "expand" => VoiceCommand::Expand(rest.to_string()),
        "delete" => VoiceCommand::Delete(rest.to_string()),
        "change" => match split_into(rest) {
            Some((from, to)) => VoiceCommand::Change { from, to },
            None => not(),
        },
        "merge" => match split_into(rest) {
            Some((from, into)) => VoiceCommand::Merge { from, into },
            None => not(),
        },
        _ => not(),
    }
}

fn split_keyword(body: &str) -> Option<(&str, &str)> {
    let end = body.find(char::is_whitespace)?;
    Some((&body[..end], &body[end..]))
}

/// Splits at the first standalone, case-insensitive `into`.
fn split_into(rest: &str) -> Option<(String, String)> {
    let words: Vec<(usize, &str)> = rest
        .split_whitespace()
        .map(|w| (w.as_ptr() as usize - rest.as_ptr() as usize, w))
        .collect();
    let (pos, (offset, word)) = words
        .iter()
        .enumerate()
        .find(|(_, (_, w))| w.eq_ignore_ascii_case("into"))?;
    if pos == 0 || pos == words.len() - 1 {
        return None;
    }
    let a = rest[..*offset].trim();
    let b = rest[offset + word.len()..].trim();
    Some((a.to_string(), b.to_string()))
}

/// Runs a command against the scene. Missing referents produce a warning
/// and leave the scene untouched.
pub fn execute_command(
    cmd: &VoiceCommand,
    scene: &mut Scene,
    provider: &mut dyn Provider,
    now: f64,
    n_expand: usize,
) -> Vec<EventKind> {
    match cmd {
        VoiceCommand::NotACommand(_) => Vec::new(),
        VoiceCommand::Create(title) => {
            let Ok(key) = normalize_topic_key(title) else {
                return Vec::new();
            };
            if scene.topics.contains(&key) {
                return vec![EventKind::warning(
                    WarningCode::AlreadyCreated,
                    format!("topic {title:?} is already created"),
                )];
            }
            let topic = Topic::new(
                title,
                vec![Sentence::note(CREATED_BY_VOICE_NOTE)],
                now,
                TopicOrigin::VoiceCommand,
            )
            .expect("title normalized above");
            scene.create_topic(topic)
        }
        VoiceCommand::Change { from, to } => {
            let Some(from_key) = existing(scene, from) else {
                return vec![missing(from)];
            };
            let to_key = normalize_topic_key(to).unwrap_or_default();
            if to_key != from_key && scene.topics.contains(&to_key) {
                return vec![EventKind::warning(
                    WarningCode::TargetExists,
                    format!("cannot change {from:?} into {to:?}: {to:?} already exists"),
                )];
            }
            scene
                .rename_topic(&from_key, to)
                .unwrap_or_else(|e| vec![EventKind::warning(WarningCode::UnknownTopic, e.to_string())])
        }
        VoiceCommand::Expand(title) => match existing(scene, title) {
            Some(key) => extractor::expand_topic(&key, scene, provider, now, n_expand),
            None => vec![missing(title)],
        },
        VoiceCommand::Delete(title) => match existing(scene, title) {
            Some(key) => scene.delete_topic(&key).expect("topic exists"),
            None => vec![missing(title)],
        },
        VoiceCommand::Merge { from, into } => {
            let Some(from_key) = existing(scene, from) else {
                return vec![missing(from)];
            };
            let Some(into_key) = existing(scene, into) else {
                return vec![missing(into)];
            };
            if from_key == into_key {
                return vec![EventKind::warning(
                    WarningCode::TargetExists,
                    format!("{from:?} and {into:?} are the same topic"),
                )];
            }
            scene
                .merge_topics(&from_key, &into_key)
                .expect("both topics exist")
        }
    }
}

fn existing(scene: &Scene, title: &str) -> Option<String> {
    normalize_topic_key(title)
        .ok()
        .filter(|k| scene.topics.contains(k))
}

fn missing(title: &str) -> EventKind {
    EventKind::warning(WarningCode::UnknownTopic, format!("no topic named {title:?}"))
}
