//! Topic extraction: prompt construction, response parsing and the
//! create-or-append step that turns an extraction into balloons.
//!
//! Providers answer in a strict line format:
//!
//! ```text
//! TOPIC: <title>
//! SENT: <sentence>
//! SENT: <sentence>
//! TOPIC: <title>
//! SENT: <sentence>
//! ```
//!
//! Blank lines are ignored and any other line makes the whole response
//! malformed. Expansion answers use `TOPIC:` lines only.

use crate::error::{ParseFailure, ProviderError};
use crate::event::{EventKind, WarningCode};
use crate::model::{normalize_topic_key, Sentence, Topic, TopicOrigin, TranscriptSegment};
use crate::provider::{Provider, ProviderRequest, ProviderResponse, Purpose};
use crate::scene::Scene;

pub const DEFAULT_N_EXPAND: usize = 3;

/// Topic/sentence pairs in the order the provider listed them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub pairs: Vec<(String, Vec<String>)>,
}

impl Extraction {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn build_prompt(segment: &TranscriptSegment, existing_titles: &[String]) -> ProviderRequest {
    let mut prompt = String::new();
    prompt.push_str(
        "You identify the key topics a speaker talks about while thinking aloud.\n\
         Extract the key topics of the sentence below. Use short titles of one to three words.\n\
         If the sentence continues one of the existing topics, reuse that title exactly as written.\n\n",
    );
    prompt.push_str("Existing topics:\n");
    push_titles(&mut prompt, existing_titles);
    prompt.push_str("\nSentence:\n");
    prompt.push_str(segment.text.trim());
    prompt.push_str(
        "\n\nAnswer only with lines of this form:\n\
         TOPIC: <title>\n\
         SENT: <the original words from the sentence that belong to the topic>\n\
         Give one TOPIC line per topic, each followed by at least one SENT line. \
         Write nothing else. If the sentence has no topic, answer with an empty message.\n",
    );
    ProviderRequest {
        prompt,
        purpose: Purpose::Extract,
        subject: segment.text.trim().to_string(),
        attempt: 0,
    }
}

pub fn build_expand_prompt(topic: &Topic, existing_titles: &[String], n: usize) -> ProviderRequest {
    let mut prompt = String::new();
    prompt.push_str(&format!(
        "You help a person develop their ideas.\n\
         Propose up to {n} new ideas that grow out of the topic \"{}\".\n\
         Do not repeat any existing topic.\n\n",
        topic.title
    ));
    prompt.push_str("What the person said about it:\n");
    for s in &topic.sentences {
        prompt.push_str("- ");
        prompt.push_str(&s.text);
        prompt.push('\n');
    }
    prompt.push_str("\nExisting topics:\n");
    push_titles(&mut prompt, existing_titles);
    prompt.push_str(
        "\nAnswer only with lines of this form:\n\
         TOPIC: <title>\n\
         Write nothing else.\n",
    );
    ProviderRequest {
        prompt,
        purpose: Purpose::Expand,
        subject: topic.title.clone(),
        attempt: 0,
    }
}

fn push_titles(prompt: &mut String, titles: &[String]) {
    if titles.is_empty() {
        prompt.push_str("(none)\n");
    }
    for t in titles {
        prompt.push_str("- ");
        prompt.push_str(t);
        prompt.push('\n');
    }
}

enum Line<'a> {
    Blank,
    Topic(&'a str),
    Sent(&'a str),
    Other,
}

fn classify(line: &str) -> Line<'_> {
    let line = line.trim();
    if line.is_empty() {
        Line::Blank
    } else if let Some(rest) = line.strip_prefix("TOPIC:") {
        Line::Topic(rest.trim())
    } else if let Some(rest) = line.strip_prefix("SENT:") {
        Line::Sent(rest.trim())
    } else {
        Line::Other
    }
}

pub fn parse_response(resp: &ProviderResponse) -> Result<Extraction, ParseFailure> {
    parse_raw(&resp.raw)
}

pub fn parse_raw(raw: &str) -> Result<Extraction, ParseFailure> {
    let fail = |line: usize, reason: &str| ParseFailure {
        line,
        reason: reason.to_string(),
    };
    let mut pairs: Vec<(String, Vec<String>)> = Vec::new();
    let mut last_topic_line = 0;
    for (idx, line) in raw.lines().enumerate() {
        let n = idx + 1;
        match classify(line) {
            Line::Blank => {}
            Line::Topic(title) => {
                if title.is_empty() {
                    return Err(fail(n, "empty topic title"));
                }
                if pairs.last().is_some_and(|(_, s)| s.is_empty()) {
                    return Err(fail(last_topic_line, "topic without sentences"));
                }
                pairs.push((title.to_string(), Vec::new()));
                last_topic_line = n;
            }
            Line::Sent(sentence) => {
                if sentence.is_empty() {
                    return Err(fail(n, "empty sentence"));
                }
                match pairs.last_mut() {
                    Some((_, sentences)) => sentences.push(sentence.to_string()),
                    None => return Err(fail(n, "sentence before any topic")),
                }
            }
            Line::Other => return Err(fail(n, "unrecognized line")),
        }
    }
    if pairs.last().is_some_and(|(_, s)| s.is_empty()) {
        return Err(fail(last_topic_line, "topic without sentences"));
    }
    Ok(Extraction { pairs })
}

/// Parses an expansion answer into suggested titles.
pub fn parse_suggestions(raw: &str) -> Result<Vec<String>, ParseFailure> {
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        match classify(line) {
            Line::Blank => {}
            Line::Topic(t) if !t.is_empty() => out.push(t.to_string()),
            _ => {
                return Err(ParseFailure {
                    line: idx + 1,
                    reason: "expected a TOPIC line".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Creates a topic for every new title and appends to existing ones.
pub fn apply_extraction(
    ex: &Extraction,
    scene: &mut Scene,
    now: f64,
    segment_id: Option<u64>,
) -> Vec<EventKind> {
    let mut events = Vec::new();
    for (title, sentences) in &ex.pairs {
        let Ok(key) = normalize_topic_key(title) else {
            continue;
        };
        let sentences: Vec<Sentence> = sentences
            .iter()
            .map(|s| Sentence::new(segment_id, s.clone()))
            .collect();
        if scene.topics.contains(&key) {
            events.extend(
                scene
                    .append_sentences(&key, sentences)
                    .expect("topic exists"),
            );
        } else {
            let topic = Topic::new(title, sentences, now, TopicOrigin::Extracted)
                .expect("title normalized above");
            events.extend(scene.create_topic(topic));
        }
    }
    events
}

/// Outcome of asking the provider about one segment.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractOutcome {
    Parsed(Extraction),
    Failed(EventKind),
}

/// Requests an extraction, retrying once on a malformed answer.
pub fn request_extraction(
    segment: &TranscriptSegment,
    scene: &Scene,
    provider: &mut dyn Provider,
) -> ExtractOutcome {
    let first = build_prompt(segment, &scene.topics.titles());
    let mut failure = None;
    for request in [first.clone(), first.retry()] {
        let raw = match provider.complete(&request) {
            Ok(raw) => raw,
            Err(e) => return ExtractOutcome::Failed(provider_warning(&segment.text, &e)),
        };
        let response = ProviderResponse {
            raw,
            exchange_id: request.cache_key(),
        };
        match parse_response(&response) {
            Ok(ex) => return ExtractOutcome::Parsed(ex),
            Err(e) => failure = Some(e),
        }
    }
    let e = failure.expect("both attempts failed to parse");
    ExtractOutcome::Failed(EventKind::warning(
        WarningCode::MalformedResponse,
        format!("dropped segment {:?}: {e}", segment.text),
    ))
}

fn provider_warning(subject: &str, e: &ProviderError) -> EventKind {
    EventKind::warning(
        WarningCode::ProviderFailure,
        format!("provider failed on {subject:?}: {e}"),
    )
}

/// Asks the provider for ideas growing out of `key` and adds each new one
/// as a suggested topic.
pub fn expand_topic(
    key: &str,
    scene: &mut Scene,
    provider: &mut dyn Provider,
    now: f64,
    n_expand: usize,
) -> Vec<EventKind> {
    let Some(topic) = scene.topics.get(key).cloned() else {
        return vec![EventKind::warning(
            WarningCode::UnknownTopic,
            format!("cannot expand {key:?}: no such topic"),
        )];
    };
    let request = build_expand_prompt(&topic, &scene.topics.titles(), n_expand);
    let raw = match provider.complete(&request) {
        Ok(raw) => raw,
        Err(e) => return vec![provider_warning(&topic.title, &e)],
    };
    let ideas = match parse_suggestions(&raw) {
        Ok(ideas) => ideas,
        Err(e) => {
            return vec![EventKind::warning(
                WarningCode::MalformedResponse,
                format!("expansion of {:?} unusable: {e}", topic.title),
            )]
        }
    };
    let mut events = Vec::new();
    let mut added = 0;
    for idea in ideas {
        if added == n_expand {
            break;
        }
        let Ok(idea_key) = normalize_topic_key(&idea) else {
            continue;
        };
        if scene.topics.contains(&idea_key) {
            continue;
        }
        let note = Sentence::note(format!("Suggested from '{}'", topic.title));
        let suggested = Topic::new(&idea, vec![note], now, TopicOrigin::Suggested)
            .expect("title normalized above");
        events.push(EventKind::SuggestionAdded {
            parent_key: topic.key.clone(),
            topic_key: idea_key,
        });
        events.extend(scene.create_topic(suggested));
        added += 1;
    }
    events
}
