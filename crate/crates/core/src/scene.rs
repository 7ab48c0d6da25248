//! Topic store plus layout, and the reducer that rebuilds both from events.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventKind, SessionEvent, WarningCode};
use crate::layout::{self, LayoutState, SpawnQuality};
use crate::model::{normalize_topic_key, scale_radius, Balloon, RoomConfig, Sentence, Topic};

/// Topics keyed by normalized title, in creation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Topic>", into = "Vec<Topic>")]
pub struct TopicStore {
    topics: IndexMap<String, Topic>,
}

impl From<Vec<Topic>> for TopicStore {
    fn from(topics: Vec<Topic>) -> Self {
        Self {
            topics: topics.into_iter().map(|t| (t.key.clone(), t)).collect(),
        }
    }
}

impl From<TopicStore> for Vec<Topic> {
    fn from(store: TopicStore) -> Self {
        store.topics.into_values().collect()
    }
}

impl TopicStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&Topic> {
        self.topics.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.topics.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    /// Display titles in creation order.
    pub fn titles(&self) -> Vec<String> {
        self.topics.values().map(|t| t.title.clone()).collect()
    }

    pub fn total_words(&self) -> usize {
        self.topics.values().map(|t| t.word_count).sum()
    }

    fn insert(&mut self, topic: Topic) {
        self.topics.insert(topic.key.clone(), topic);
    }

    fn get_mut(&mut self, key: &str) -> Option<&mut Topic> {
        self.topics.get_mut(key)
    }

    fn remove(&mut self, key: &str) -> Option<Topic> {
        self.topics.shift_remove(key)
    }

    fn rekey(&mut self, from: &str, to: String, title: String) {
        if let Some(idx) = self.topics.get_index_of(from) {
            let (_, mut topic) = self.topics.shift_remove_index(idx).expect("index is valid");
            topic.key = to.clone();
            topic.title = title;
            self.topics.shift_insert(idx, to, topic);
        }
    }
}

/// Everything that determines what the user sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub cfg: RoomConfig,
    pub topics: TopicStore,
    pub layout: LayoutState,
}

impl Scene {
    pub fn new(cfg: RoomConfig) -> Self {
        let layout = LayoutState::new(&cfg);
        Self {
            cfg,
            topics: TopicStore::new(),
            layout,
        }
    }

    /// Inserts a new topic and spawns its balloon in the user's view.
    ///
    /// The caller is responsible for the key being free.
    pub fn create_topic(&mut self, topic: Topic) -> Vec<EventKind> {
        debug_assert!(!self.topics.contains(&topic.key));
        let radius = scale_radius(topic.word_count, &self.cfg);
        let gaze = self.layout.user_pose;
        let (center, quality) = layout::spawn_position(&gaze, radius, &mut self.layout, &self.cfg);
        let balloon = Balloon::new(topic.key.clone(), center, radius, topic.created_at);
        self.layout.balloons.push(balloon.clone());
        let mut events = Vec::new();
        if quality == SpawnQuality::Fallback {
            events.push(EventKind::warning(
                WarningCode::SpawnFallback,
                format!("no free spot in view for {:?}", topic.key),
            ));
        }
        self.topics.insert(topic.clone());
        events.insert(0, EventKind::BalloonCreated { topic, balloon });
        events
    }

    /// Appends sentences to an existing topic and grows its balloon.
    pub fn append_sentences(&mut self, key: &str, sentences: Vec<Sentence>) -> Result<Vec<EventKind>> {
        let topic = self
            .topics
            .get_mut(key)
            .ok_or_else(|| Error::UnknownTopic(key.to_string()))?;
        topic.append(sentences.iter().cloned());
        let word_count = topic.word_count;
        let radius = scale_radius(word_count, &self.cfg);
        if let Some(b) = self.layout.get_mut(key) {
            b.radius = radius;
        }
        Ok(vec![
            EventKind::TranscriptAppended {
                topic_key: key.to_string(),
                sentences,
                word_count,
            },
            EventKind::BalloonGrown {
                topic_key: key.to_string(),
                radius,
                word_count,
            },
        ])
    }

    pub fn delete_topic(&mut self, key: &str) -> Result<Vec<EventKind>> {
        self.topics
            .remove(key)
            .ok_or_else(|| Error::UnknownTopic(key.to_string()))?;
        self.layout.remove(key);
        Ok(vec![EventKind::BalloonDeleted {
            topic_key: key.to_string(),
        }])
    }

    /// Retitles `from`; fails if the new key belongs to another topic.
    pub fn rename_topic(&mut self, from: &str, new_title: &str) -> Result<Vec<EventKind>> {
        let to_key = normalize_topic_key(new_title)?;
        if !self.topics.contains(from) {
            return Err(Error::UnknownTopic(from.to_string()));
        }
        if to_key != from && self.topics.contains(&to_key) {
            return Err(Error::InvalidInput(format!("topic {to_key:?} already exists")));
        }
        let title = new_title.split_whitespace().collect::<Vec<_>>().join(" ");
        self.topics.rekey(from, to_key.clone(), title.clone());
        if let Some(b) = self.layout.get_mut(from) {
            b.topic_key = to_key.clone();
        }
        Ok(vec![EventKind::TopicRenamed {
            from_key: from.to_string(),
            to_key,
            title,
        }])
    }

    /// Moves every sentence of `from` onto `into` and deletes `from`.
    pub fn merge_topics(&mut self, from: &str, into: &str) -> Result<Vec<EventKind>> {
        if from == into {
            return Err(Error::InvalidInput("cannot merge a topic into itself".into()));
        }
        if !self.topics.contains(into) {
            return Err(Error::UnknownTopic(into.to_string()));
        }
        let source = self
            .topics
            .remove(from)
            .ok_or_else(|| Error::UnknownTopic(from.to_string()))?;
        self.layout.remove(from);
        let target = self.topics.get_mut(into).expect("checked above");
        target.append(source.sentences);
        let word_count = target.word_count;
        let radius = scale_radius(word_count, &self.cfg);
        if let Some(b) = self.layout.get_mut(into) {
            b.radius = radius;
        }
        Ok(vec![EventKind::TopicsMerged {
            from_key: from.to_string(),
            into_key: into.to_string(),
            word_count,
            radius,
        }])
    }

    pub fn settle(&mut self) -> Vec<EventKind> {
        layout::resolve_collisions(&mut self.layout, &self.cfg)
    }

    /// Applies one logged event. Events that carry no scene state are ignored.
    pub fn apply(&mut self, kind: &EventKind) {
        match kind {
            EventKind::BalloonCreated { topic, balloon } => {
                self.topics.insert(topic.clone());
                self.layout.remove(&balloon.topic_key);
                self.layout.balloons.push(balloon.clone());
            }
            EventKind::TranscriptAppended {
                topic_key,
                sentences,
                word_count,
            } => {
                if let Some(t) = self.topics.get_mut(topic_key) {
                    t.sentences.extend(sentences.iter().cloned());
                    t.word_count = *word_count;
                }
            }
            EventKind::BalloonGrown {
                topic_key,
                radius,
                word_count,
            } => {
                if let Some(t) = self.topics.get_mut(topic_key) {
                    t.word_count = *word_count;
                }
                if let Some(b) = self.layout.get_mut(topic_key) {
                    b.radius = *radius;
                }
            }
            EventKind::BalloonMoved {
                topic_key,
                center,
                pinned,
            } => {
                if let Some(b) = self.layout.get_mut(topic_key) {
                    b.center = *center;
                    b.pinned = *pinned;
                }
            }
            EventKind::BalloonDeleted { topic_key } => {
                self.topics.remove(topic_key);
                self.layout.remove(topic_key);
            }
            EventKind::TopicRenamed {
                from_key,
                to_key,
                title,
            } => {
                self.topics.rekey(from_key, to_key.clone(), title.clone());
                if let Some(b) = self.layout.get_mut(from_key) {
                    b.topic_key = to_key.clone();
                }
            }
            EventKind::TopicsMerged {
                from_key,
                into_key,
                word_count,
                radius,
            } => {
                if let Some(source) = self.topics.remove(from_key) {
                    if let Some(t) = self.topics.get_mut(into_key) {
                        t.sentences.extend(source.sentences);
                        t.word_count = *word_count;
                    }
                }
                self.layout.remove(from_key);
                if let Some(b) = self.layout.get_mut(into_key) {
                    b.radius = *radius;
                }
            }
            EventKind::OrganizeApplied { walls } => {
                self.layout.organized_wall = walls.first().copied();
            }
            _ => {}
        }
    }

    /// Rebuilds topics and balloons from a log.
    pub fn replay<'a>(cfg: RoomConfig, events: impl IntoIterator<Item = &'a SessionEvent>) -> Self {
        let mut scene = Scene::new(cfg);
        for ev in events {
            scene.apply(&ev.kind);
        }
        scene
    }

    /// Topic store and balloons, without RNG or pose.
    pub fn same_content(&self, other: &Scene) -> bool {
        self.topics == other.topics && self.layout.balloons == other.layout.balloons
    }
}
