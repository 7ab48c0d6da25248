//! Sentence-level segmentation of recognized text.
//!
//! Live input arrives as [`SttEvent`] fragments. A segment closes when the
//! recognizer marks a fragment final, or once [`SILENCE_TIMEOUT`] seconds
//! pass with no further fragment. Time is supplied by the caller, so the
//! timeout is driven by whatever clock the session uses.

use serde::{Deserialize, Serialize};

use crate::model::{word_count, SegmentSource, TranscriptSegment};

/// Seconds of silence that close an open utterance.
pub const SILENCE_TIMEOUT: f64 = 0.3;

/// Synthetic speaking rate used for untimed transcript files.
pub const DEFAULT_WORDS_PER_SECOND: f64 = 2.5;

// Absorbs representation error in gaps such as 2.3 - 2.0.
const TIMEOUT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SttEvent {
    pub text: String,
    pub t: f64,
    #[serde(default)]
    pub is_final: bool,
}

impl SttEvent {
    pub fn partial(text: impl Into<String>, t: f64) -> Self {
        Self {
            text: text.into(),
            t,
            is_final: false,
        }
    }

    pub fn final_(text: impl Into<String>, t: f64) -> Self {
        Self {
            text: text.into(),
            t,
            is_final: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmenter {
    source: SegmentSource,
    next_id: u64,
    fragments: Vec<String>,
    t_first: f64,
    t_last: f64,
}

impl Segmenter {
    pub fn new(source: SegmentSource) -> Self {
        Self::starting_at(source, 1)
    }

    /// A segmenter whose first segment gets id `next_id`.
    pub fn starting_at(source: SegmentSource, next_id: u64) -> Self {
        Self {
            source,
            next_id,
            fragments: Vec::new(),
            t_first: 0.0,
            t_last: 0.0,
        }
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn has_pending(&self) -> bool {
        !self.fragments.is_empty()
    }

    /// Feeds one recognizer event and returns any segments it closed.
    pub fn ingest(&mut self, ev: &SttEvent) -> Vec<TranscriptSegment> {
        let text = ev.text.trim();
        if text.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<_> = self.poll(ev.t).into_iter().collect();
        if self.fragments.is_empty() {
            self.t_first = ev.t.max(0.0);
        }
        self.t_last = ev.t.max(self.t_first);
        self.fragments.push(text.to_string());
        if ev.is_final {
            out.extend(self.flush());
        }
        out
    }

    /// Closes the open utterance if the silence timeout has elapsed at `now`.
    pub fn poll(&mut self, now: f64) -> Option<TranscriptSegment> {
        if self.has_pending() && now - self.t_last + TIMEOUT_SLACK >= SILENCE_TIMEOUT {
            self.flush()
        } else {
            None
        }
    }

    /// Closes the open utterance unconditionally.
    pub fn flush(&mut self) -> Option<TranscriptSegment> {
        if self.fragments.is_empty() {
            return None;
        }
        let text = std::mem::take(&mut self.fragments).join(" ");
        let seg = TranscriptSegment {
            id: self.next_id,
            text,
            t_start: self.t_first,
            t_end: self.t_last,
            source: self.source,
        };
        self.next_id += 1;
        Some(seg)
    }
}

/// Splits text after `.`, `!` or `?` when followed by whitespace or the end.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Parses a transcript file: UTF-8 lines with an optional `[ss.mmm] ` prefix.
///
/// Lines without a timestamp continue from the previous sentence at
/// `words_per_second`. Each sentence lasts `words / words_per_second`.
pub fn parse_transcript(content: &str, words_per_second: f64) -> Vec<TranscriptSegment> {
    let wps = if words_per_second > 0.0 {
        words_per_second
    } else {
        DEFAULT_WORDS_PER_SECOND
    };
    let mut out = Vec::new();
    let mut cursor = 0.0_f64;
    let mut next_id = 1;
    for line in content.lines() {
        let (stamp, body) = split_timestamp(line);
        if let Some(t) = stamp {
            cursor = cursor.max(t);
        }
        for sentence in split_sentences(body) {
            let duration = word_count(&sentence) as f64 / wps;
            out.push(TranscriptSegment {
                id: next_id,
                text: sentence,
                t_start: cursor,
                t_end: cursor + duration,
                source: SegmentSource::File,
            });
            next_id += 1;
            cursor += duration;
        }
    }
    out
}

fn split_timestamp(line: &str) -> (Option<f64>, &str) {
    let trimmed = line.trim_start();
    if let Some(rest) = trimmed.strip_prefix('[') {
        if let Some(close) = rest.find(']') {
            let inner = &rest[..close];
            let looks_numeric =
                !inner.is_empty() && inner.chars().all(|c| c.is_ascii_digit() || c == '.');
            if looks_numeric {
                if let Ok(t) = inner.parse::<f64>() {
                    return (Some(t), &rest[close + 1..]);
                }
            }
        }
    }
    (None, line)
}
