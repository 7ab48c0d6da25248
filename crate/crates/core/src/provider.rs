//! Language-model providers.
//!
//! Three implementations sit behind [`Provider`]: [`ScriptedProvider`]
//! (canned answers, used by tests and simulations), [`RuleProvider`] (an
//! offline keyword heuristic) and, with the `live` feature, `LiveProvider`
//! (an OpenAI-compatible chat endpoint).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ProviderError;
use crate::model::normalize_topic_key;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Extract,
    Expand,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub prompt: String,
    pub purpose: Purpose,
    /// Segment text for extraction, topic title for expansion.
    pub subject: String,
    /// 0 for the first try, 1 for the retry after a malformed answer.
    #[serde(default)]
    pub attempt: u32,
}

impl ProviderRequest {
    /// SHA-256 over purpose, attempt and prompt, hex encoded.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(match self.purpose {
            Purpose::Extract => b"extract".as_slice(),
            Purpose::Expand => b"expand".as_slice(),
        });
        h.update([0u8]);
        h.update(self.attempt.to_le_bytes());
        h.update(self.prompt.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn retry(&self) -> Self {
        Self {
            attempt: self.attempt + 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub raw: String,
    /// Cache key of the request that produced this response.
    pub exchange_id: String,
}

pub trait Provider: Send {
    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

/// Recorded provider answers keyed by [`ProviderRequest::cache_key`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProviderCache {
    pub entries: BTreeMap<String, String>,
}

impl ProviderCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Serves from `cache` and records every fresh answer into it.
pub struct CachingProvider<'a> {
    pub inner: &'a mut dyn Provider,
    pub cache: &'a mut ProviderCache,
    /// Requests that reached `inner`.
    pub upstream_calls: &'a mut u64,
}

impl Provider for CachingProvider<'_> {
    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError> {
        let key = request.cache_key();
        if let Some(raw) = self.cache.entries.get(&key) {
            return Ok(raw.clone());
        }
        *self.upstream_calls += 1;
        let raw = self.inner.complete(request)?;
        self.cache.entries.insert(key, raw.clone());
        Ok(raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Live,
    Scripted,
    Rule,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Self::Live),
            "scripted" => Ok(Self::Scripted),
            "rule" => Ok(Self::Rule),
            other => Err(format!("unknown provider mode {other:?}")),
        }
    }
}

/// Canned answers, looked up by exact prompt first and then by subject.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    by_prompt: HashMap<String, String>,
    by_subject: HashMap<(Purpose, String), Result<String, ProviderError>>,
    calls: usize,
}

/// JSON form accepted by [`ScriptedProvider::from_script`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderScript {
    /// Segment text → raw `TOPIC:`/`SENT:` response.
    pub extract: BTreeMap<String, String>,
    /// Topic title → suggested titles.
    pub expand: BTreeMap<String, Vec<String>>,
    /// Request cache key → raw response.
    pub prompts: BTreeMap<String, String>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_script(script: &ProviderScript) -> Self {
        let mut p = Self::new();
        for (text, raw) in &script.extract {
            p.on_segment(text, raw);
        }
        for (title, ideas) in &script.expand {
            p.on_expand(title, ideas.iter().map(String::as_str));
        }
        p.by_prompt
            .extend(script.prompts.iter().map(|(k, v)| (k.clone(), v.clone())));
        p
    }

    /// Answers the exact request with `raw`.
    pub fn on_request(&mut self, request: &ProviderRequest, raw: impl Into<String>) -> &mut Self {
        self.by_prompt.insert(request.cache_key(), raw.into());
        self
    }

    /// Answers any extraction of `segment_text` with `raw`.
    pub fn on_segment(&mut self, segment_text: &str, raw: impl Into<String>) -> &mut Self {
        self.by_subject
            .insert((Purpose::Extract, subject_key(segment_text)), Ok(raw.into()));
        self
    }

    /// Answers any expansion of `title` with the given ideas.
    pub fn on_expand<'a>(&mut self, title: &str, ideas: impl IntoIterator<Item = &'a str>) -> &mut Self {
        let raw = ideas
            .into_iter()
            .map(|i| format!("TOPIC: {i}"))
            .collect::<Vec<_>>()
            .join("\n");
        self.by_subject
            .insert((Purpose::Expand, subject_key(title)), Ok(raw));
        self
    }

    /// Makes requests about `subject` fail.
    pub fn fail_on(&mut self, purpose: Purpose, subject: &str, err: ProviderError) -> &mut Self {
        self.by_subject.insert((purpose, subject_key(subject)), Err(err));
        self
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

fn subject_key(s: &str) -> String {
    normalize_topic_key(s).unwrap_or_default()
}

impl Provider for ScriptedProvider {
    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError> {
        self.calls += 1;
        if let Some(raw) = self.by_prompt.get(&request.cache_key()) {
            return Ok(raw.clone());
        }
        match self
            .by_subject
            .get(&(request.purpose, subject_key(&request.subject)))
        {
            Some(answer) => answer.clone(),
            None => Err(ProviderError::NoScript(format!(
                "{:?} {:?}",
                request.purpose, request.subject
            ))),
        }
    }
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "even",
    "few", "for", "from", "further", "get", "got", "had", "has", "have", "having", "he", "her",
    "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "like", "little", "lot", "maybe", "me", "more", "most", "much", "my", "no", "nor",
    "not", "now", "of", "off", "on", "once", "one", "only", "or", "other", "our", "ours", "out",
    "over", "own", "really", "same", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "them", "then", "there", "these", "they", "thing", "things", "think",
    "this", "those", "through", "to", "too", "um", "uh", "under", "until", "up", "us", "very",
    "want", "was", "we", "well", "were", "what", "when", "where", "which", "while", "who",
    "why", "will", "with", "would", "yeah", "yes", "you", "your", "yours",
];

/// Offline heuristic: the most frequent non-stopword token becomes the topic.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleProvider;

impl RuleProvider {
    /// Title-cased most frequent content word; ties go to the earliest.
    pub fn keyword(text: &str) -> Option<String> {
        let mut counts: Vec<(String, usize)> = Vec::new();
        for token in text
            .split(|c: char| !(c.is_alphanumeric() || c == '\''))
            .map(|t| t.trim_matches('\'').to_lowercase())
            .filter(|t| t.chars().count() >= 3 && !STOPWORDS.contains(&t.as_str()))
            .filter(|t| !t.chars().all(|c| c.is_ascii_digit()))
        {
            match counts.iter_mut().find(|(w, _)| *w == token) {
                Some((_, n)) => *n += 1,
                None => counts.push((token, 1)),
            }
        }
        let mut best: Option<&(String, usize)> = None;
        for entry in &counts {
            if best.is_none_or(|b| entry.1 > b.1) {
                best = Some(entry);
            }
        }
        best.map(|(w, _)| title_case(w))
    }
}

fn title_case(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl Provider for RuleProvider {
    fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError> {
        match request.purpose {
            Purpose::Extract => Ok(match Self::keyword(&request.subject) {
                Some(topic) => format!("TOPIC: {topic}\nSENT: {}", request.subject.trim()),
                None => String::new(),
            }),
            Purpose::Expand => Ok(String::new()),
        }
    }
}

#[cfg(feature = "live")]
pub use live::LiveProvider;

#[cfg(feature = "live")]
mod live {
    use super::*;

    pub const DEFAULT_URL: &str = "https://api.openai.com/v1/chat/completions";
    pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

    /// OpenAI-compatible chat completion client.
    ///
    /// Reads `PROVIDER_API_KEY`, and optionally `PROVIDER_URL` and
    /// `PROVIDER_MODEL`, from the environment.
    pub struct LiveProvider {
        agent: ureq::Agent,
        url: String,
        model: String,
        api_key: String,
    }

    impl LiveProvider {
        pub fn from_env() -> Result<Self, ProviderError> {
            let api_key = std::env::var("PROVIDER_API_KEY")
                .ok()
                .filter(|k| !k.trim().is_empty())
                .ok_or_else(|| ProviderError::MissingCredentials("PROVIDER_API_KEY".into()))?;
            Ok(Self {
                agent: ureq::AgentBuilder::new()
                    .timeout(std::time::Duration::from_secs(30))
                    .build(),
                url: std::env::var("PROVIDER_URL").unwrap_or_else(|_| DEFAULT_URL.into()),
                model: std::env::var("PROVIDER_MODEL").unwrap_or_else(|_| DEFAULT_MODEL.into()),
                api_key,
            })
        }
    }

    impl Provider for LiveProvider {
        fn complete(&mut self, request: &ProviderRequest) -> Result<String, ProviderError> {
            let body = serde_json::json!({
                "model": self.model,
                "temperature": 0,
                "messages": [{"role": "user", "content": request.prompt}],
            });
            let resp: serde_json::Value = self
                .agent
                .post(&self.url)
                .set("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(body)
                .map_err(|e| ProviderError::Transport(e.to_string()))?
                .into_json()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            resp["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| ProviderError::Other("response has no message content".into()))
        }
    }
}

/// Builds the provider for `mode`. Scripted mode uses `script`.
pub fn provider_for(
    mode: ProviderMode,
    script: Option<&ProviderScript>,
) -> Result<Box<dyn Provider>, ProviderError> {
    match mode {
        ProviderMode::Rule => Ok(Box::new(RuleProvider)),
        ProviderMode::Scripted => Ok(Box::new(ScriptedProvider::from_script(
            &script.cloned().unwrap_or_default(),
        ))),
        #[cfg(feature = "live")]
        ProviderMode::Live => Ok(Box::new(LiveProvider::from_env()?)),
        #[cfg(not(feature = "live"))]
        ProviderMode::Live => Err(ProviderError::Other(
            "built without the `live` feature".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extract(subject: &str) -> ProviderRequest {
        ProviderRequest {
            prompt: format!("prompt for {subject}"),
            purpose: Purpose::Extract,
            subject: subject.into(),
            attempt: 0,
        }
    }

    #[test]
    fn rule_picks_most_frequent_content_word() {
        assert_eq!(
            RuleProvider::keyword("The budget for the trip, and the budget for food").as_deref(),
            Some("Budget")
        );
        assert_eq!(RuleProvider::keyword("Rome then Paris").as_deref(), Some("Rome"));
        assert_eq!(RuleProvider::keyword("and so it is"), None);
        let raw = RuleProvider.complete(&extract("We fly to Rome.")).unwrap();
        assert_eq!(raw, "TOPIC: Fly\nSENT: We fly to Rome.");
    }

    #[test]
    fn scripted_lookup_order() {
        let req = extract("We fly to Rome");
        let mut p = ScriptedProvider::new();
        p.on_segment("we fly  to rome", "TOPIC: Rome\nSENT: We fly to Rome");
        assert_eq!(p.complete(&req).unwrap(), "TOPIC: Rome\nSENT: We fly to Rome");
        p.on_request(&req, "TOPIC: Travel\nSENT: We fly to Rome");
        assert!(p.complete(&req).unwrap().starts_with("TOPIC: Travel"));
        assert!(matches!(p.complete(&extract("other")), Err(ProviderError::NoScript(_))));
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn cache_key_separates_attempts() {
        let req = extract("x");
        assert_ne!(req.cache_key(), req.retry().cache_key());
        assert_eq!(req.cache_key(), extract("x").cache_key());
        assert_eq!(req.cache_key().len(), 64);
    }

    #[test]
    fn caching_provider_only_calls_upstream_once() {
        let mut inner = ScriptedProvider::new();
        inner.on_segment("a", "TOPIC: A\nSENT: a");
        let mut cache = ProviderCache::default();
        let mut calls = 0;
        for _ in 0..3 {
            let mut p = CachingProvider {
                inner: &mut inner,
                cache: &mut cache,
                upstream_calls: &mut calls,
            };
            p.complete(&extract("a")).unwrap();
        }
        assert_eq!(calls, 1);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn provider_mode_parses() {
        assert_eq!("Rule".parse::<ProviderMode>().unwrap(), ProviderMode::Rule);
        assert!("gpt".parse::<ProviderMode>().is_err());
    }
}
