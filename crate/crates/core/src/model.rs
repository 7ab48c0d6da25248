//! Shared domain types and the closed-form balloon geometry.
//!
//! The room frame is right-handed with `y` pointing up. The floor spans
//! `x ∈ [0, width]` and `z ∈ [0, depth]`; `+z` is north and `+x` is east.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default balloon transparency.
pub const DEFAULT_ALPHA: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Distance measured in the floor plane only.
    pub fn horizontal_distance(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.z - other.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSource {
    Live,
    Recording,
    File,
}

/// One recognized utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub id: u64,
    pub text: String,
    pub t_start: f64,
    pub t_end: f64,
    pub source: SegmentSource,
}

impl TranscriptSegment {
    pub fn new(
        id: u64,
        text: impl Into<String>,
        t_start: f64,
        t_end: f64,
        source: SegmentSource,
    ) -> Result<Self> {
        let seg = Self {
            id,
            text: text.into(),
            t_start,
            t_end,
            source,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidSegment("text is empty".into()));
        }
        if !(self.t_start >= 0.0 && self.t_end >= self.t_start) {
            return Err(Error::InvalidSegment(format!(
                "bad timing [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }
}

/// A sentence attached to a topic, with the segment it came from when known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub segment_id: Option<u64>,
    pub text: String,
}

impl Sentence {
    pub fn new(segment_id: Option<u64>, text: impl Into<String>) -> Self {
        Self {
            segment_id,
            text: text.into(),
        }
    }

    pub fn note(text: impl Into<String>) -> Self {
        Self::new(None, text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicOrigin {
    Extracted,
    VoiceCommand,
    Suggested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub key: String,
    pub title: String,
    pub sentences: Vec<Sentence>,
    pub word_count: usize,
    pub created_at: f64,
    pub origin: TopicOrigin,
}

impl Topic {
    pub fn new(
        title: &str,
        sentences: Vec<Sentence>,
        created_at: f64,
        origin: TopicOrigin,
    ) -> Result<Self> {
        let key = normalize_topic_key(title)?;
        let word_count = sentences.iter().map(|s| word_count(&s.text)).sum();
        Ok(Self {
            key,
            title: title.trim().to_string(),
            sentences,
            word_count,
            created_at,
            origin,
        })
    }

    pub fn append(&mut self, sentences: impl IntoIterator<Item = Sentence>) {
        for s in sentences {
            self.word_count += word_count(&s.text);
            self.sentences.push(s);
        }
    }
}

/// The spatial embodiment of a topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Balloon {
    pub topic_key: String,
    pub center: Vec3,
    pub radius: f64,
    pub created_at: f64,
    pub pinned: bool,
    pub alpha: f64,
}

impl Balloon {
    pub fn new(topic_key: impl Into<String>, center: Vec3, radius: f64, created_at: f64) -> Self {
        Self {
            topic_key: topic_key.into(),
            center,
            radius,
            created_at,
            pinned: false,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Room geometry and layout parameters. Lengths in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomConfig {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub h_spawn: f64,
    pub h_max: f64,
    pub drift_rate: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub w_cap: usize,
    /// Degrees.
    pub fov_half_angle: f64,
    pub spawn_dist_min: f64,
    pub spawn_dist_max: f64,
    pub wall_offset: f64,
    pub user_radius: f64,
    pub grid_gap: f64,
    pub rng_seed: u64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            width: 6.0,
            depth: 6.0,
            // 2.6 m ceiling for centers plus the largest radius.
            height: 3.4,
            h_spawn: 1.4,
            h_max: 2.6,
            drift_rate: 0.005,
            r_min: 0.25,
            r_max: 0.75,
            w_cap: 300,
            fov_half_angle: 40.0,
            spawn_dist_min: 1.0,
            spawn_dist_max: 2.5,
            wall_offset: 0.3,
            user_radius: 0.4,
            grid_gap: 0.1,
            rng_seed: 0,
        }
    }
}

impl RoomConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..Self::default()
        }
    }

    /// Distance between neighbouring cells of the organize grid.
    pub fn grid_pitch(&self) -> f64 {
        2.0 * self.r_max + self.grid_gap
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        let all = [
            self.width,
            self.depth,
            self.height,
            self.h_spawn,
            self.h_max,
            self.drift_rate,
            self.r_min,
            self.r_max,
            self.fov_half_angle,
            self.spawn_dist_min,
            self.spawn_dist_max,
            self.wall_offset,
            self.user_radius,
            self.grid_gap,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all numeric fields must be finite");
        }
        if !(0.0 < self.h_spawn && self.h_spawn < self.h_max && self.h_max < self.height) {
            return fail("require 0 < h_spawn < h_max < height");
        }
        if !(0.0 < self.r_min && self.r_min < self.r_max) {
            return fail("require 0 < r_min < r_max");
        }
        if self.w_cap == 0 {
            return fail("w_cap must be positive");
        }
        if !(0.0 <= self.spawn_dist_min && self.spawn_dist_min < self.spawn_dist_max) {
            return fail("require 0 <= spawn_dist_min < spawn_dist_max");
        }
        if self.h_max + self.r_max > self.height {
            return fail("largest balloon at h_max must fit under the ceiling");
        }
        if self.h_spawn < self.r_max {
            return fail("largest balloon at h_spawn must clear the floor");
        }
        if self.width <= 2.0 * self.r_max || self.depth <= 2.0 * self.r_max {
            return fail("room too small for the largest balloon");
        }
        if !(0.0..=180.0).contains(&self.fov_half_angle) {
            return fail("fov_half_angle must lie in [0, 180] degrees");
        }
        if self.drift_rate < 0.0 || self.wall_offset < 0.0 || self.user_radius < 0.0 {
            return fail("drift_rate, wall_offset and user_radius must be non-negative");
        }
        if self.grid_gap <= 0.0 {
            return fail("grid_gap must be positive");
        }
        Ok(())
    }

    /// Whether a sphere lies inside the room box.
    pub fn contains_sphere(&self, center: Vec3, radius: f64) -> bool {
        center.x - radius >= 0.0
            && center.x + radius <= self.width
            && center.y - radius >= 0.0
            && center.y + radius <= self.height
            && center.z - radius >= 0.0
            && center.z + radius <= self.depth
    }

    pub fn clamp_sphere(&self, center: Vec3, radius: f64) -> Vec3 {
        Vec3::new(
            center.x.clamp(radius, self.width - radius),
            center.y.clamp(radius, self.height - radius),
            center.z.clamp(radius, self.depth - radius),
        )
    }
}

/// User head position and forward gaze.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeState {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl GazeState {
    /// Builds a gaze state, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !origin.is_finite() || !n.is_finite() || n < 1e-9 {
            return Err(Error::InvalidInput(
                "gaze direction must be a finite non-zero vector".into(),
            ));
        }
        Ok(Self {
            origin,
            direction: direction * (1.0 / n),
        })
    }

    /// Standing at the room center, looking north.
    pub fn room_center(cfg: &RoomConfig) -> Self {
        Self {
            origin: Vec3::new(cfg.width / 2.0, 1.6, cfg.depth / 2.0),
            direction: Vec3::new(0.0, 0.0, 1.0),
        }
    }

    /// Unit gaze direction projected onto the floor, as `(x, z)`.
    /// A vertical gaze falls back to north.
    pub fn horizontal_direction(&self) -> (f64, f64) {
        let h = self.direction.x.hypot(self.direction.z);
        if h < 1e-9 {
            (0.0, 1.0)
        } else {
            (self.direction.x / h, self.direction.z / h)
        }
    }
}

/// Walls of the room, listed clockwise seen from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wall {
    N,
    E,
    S,
    W,
}

impl Wall {
    pub const CLOCKWISE: [Wall; 4] = [Wall::N, Wall::E, Wall::S, Wall::W];

    pub fn next_clockwise(self) -> Wall {
        match self {
            Wall::N => Wall::E,
            Wall::E => Wall::S,
            Wall::S => Wall::W,
            Wall::W => Wall::N,
        }
    }
}

/// Trim, collapse internal whitespace and case-fold a title.
pub fn normalize_topic_key(title: &str) -> Result<String> {
    let collapsed = title.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(Error::InvalidTitle(title.to_string()));
    }
    Ok(collapsed.to_lowercase())
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Balloon radius for a topic holding `word_count` words: linear growth
/// from `r_min` that stops at `w_cap` words.
pub fn scale_radius(word_count: usize, cfg: &RoomConfig) -> f64 {
    let capped = word_count.min(cfg.w_cap) as f64;
    cfg.r_min + (cfg.r_max - cfg.r_min) * capped / cfg.w_cap as f64
}

/// Height of an unpinned balloon created at `created_at`, observed at `now`.
pub fn height_at(created_at: f64, now: f64, cfg: &RoomConfig) -> Result<f64> {
    if now < created_at {
        return Err(Error::TimeInversion { created_at, now });
    }
    Ok((cfg.h_spawn + cfg.drift_rate * (now - created_at)).min(cfg.h_max))
}
