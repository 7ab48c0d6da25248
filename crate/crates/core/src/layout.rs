//! Spatial engine: spawn placement, collision settling, height drift,
//! grabbing and the one-click wall organization.
//!
//! Collision response only ever moves balloons in the floor plane, so a
//! balloon's height keeps encoding its age.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventKind, WarningCode};
use crate::model::{height_at, Balloon, GazeState, RoomConfig, Vec3, Wall};

/// Tolerated residual overlap after settling, in meters.
pub const OVERLAP_EPSILON: f64 = 1e-3;
/// Sweep budget for [`resolve_collisions`].
pub const MAX_SETTLE_ITERATIONS: usize = 32;
/// Rejection samples tried before the no-overlap constraint is relaxed.
pub const SPAWN_SAMPLE_BUDGET: usize = 256;

const SEPARATION_SLOP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutState {
    pub balloons: Vec<Balloon>,
    pub user_pose: GazeState,
    pub rng: ChaCha8Rng,
    pub organized_wall: Option<Wall>,
    pub last_step: f64,
}

impl LayoutState {
    pub fn new(cfg: &RoomConfig) -> Self {
        Self {
            balloons: Vec::new(),
            user_pose: GazeState::room_center(cfg),
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            organized_wall: None,
            last_step: 0.0,
        }
    }

    pub fn get(&self, key: &str) -> Option<&Balloon> {
        self.balloons.iter().find(|b| b.topic_key == key)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut Balloon> {
        self.balloons.iter_mut().find(|b| b.topic_key == key)
    }

    pub fn remove(&mut self, key: &str) -> Option<Balloon> {
        let idx = self.balloons.iter().position(|b| b.topic_key == key)?;
        Some(self.balloons.remove(idx))
    }

    pub fn len(&self) -> usize {
        self.balloons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balloons.is_empty()
    }

    pub fn snapshot(&self) -> Vec<BalloonSnapshot> {
        self.balloons.iter().map(BalloonSnapshot::from).collect()
    }
}

/// Exported form of a balloon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalloonSnapshot {
    pub topic_key: String,
    pub center: [f64; 3],
    pub radius: f64,
    pub created_at: f64,
    pub pinned: bool,
}

impl From<&Balloon> for BalloonSnapshot {
    fn from(b: &Balloon) -> Self {
        Self {
            topic_key: b.topic_key.clone(),
            center: b.center.into(),
            radius: b.radius,
            created_at: b.created_at,
            pinned: b.pinned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpawnQuality {
    /// All constraints met.
    Clear,
    /// Cone, distance and wall constraints met; overlaps left to the resolver.
    Overlapping,
    /// No sample satisfied the cone; the point was clamped into the room.
    Fallback,
}

/// Samples a spawn point for a balloon of `radius` inside the gaze cone.
pub fn spawn_position(
    gaze: &GazeState,
    radius: f64,
    state: &mut LayoutState,
    cfg: &RoomConfig,
) -> (Vec3, SpawnQuality) {
    let (gx, gz) = gaze.horizontal_direction();
    let base = gz.atan2(gx);
    let fov = cfg.fov_half_angle.to_radians();
    let d2min = cfg.spawn_dist_min * cfg.spawn_dist_min;
    let d2max = cfg.spawn_dist_max * cfg.spawn_dist_max;
    let origin = gaze.origin;

    for attempt in 0..2 * SPAWN_SAMPLE_BUDGET {
        let u: f64 = state.rng.gen();
        let v: f64 = state.rng.gen();
        let angle = base + fov * (2.0 * u - 1.0);
        // Area-uniform over the annular sector.
        let dist = (d2min + v * (d2max - d2min)).sqrt();
        let p = Vec3::new(
            origin.x + dist * angle.cos(),
            cfg.h_spawn,
            origin.z + dist * angle.sin(),
        );
        if !clear_of_walls(p, radius, cfg) {
            continue;
        }
        if p.horizontal_distance(origin) < cfg.user_radius + radius {
            continue;
        }
        let overlaps = state
            .balloons
            .iter()
            .any(|b| b.center.distance(p) < b.radius + radius);
        if overlaps && attempt < SPAWN_SAMPLE_BUDGET {
            continue;
        }
        let quality = if overlaps {
            SpawnQuality::Overlapping
        } else {
            SpawnQuality::Clear
        };
        return (p, quality);
    }

    let ahead = Vec3::new(
        origin.x + cfg.spawn_dist_min * gx,
        cfg.h_spawn,
        origin.z + cfg.spawn_dist_min * gz,
    );
    (cfg.clamp_sphere(ahead, radius), SpawnQuality::Fallback)
}

/// Strict non-contact with the four walls.
pub fn clear_of_walls(p: Vec3, radius: f64, cfg: &RoomConfig) -> bool {
    p.x - radius > 0.0
        && p.x + radius < cfg.width
        && p.z - radius > 0.0
        && p.z + radius < cfg.depth
}

/// Largest pairwise penetration depth, `max(r_i + r_j - |c_i - c_j|, 0)`.
pub fn max_overlap(balloons: &[Balloon]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in balloons.iter().enumerate() {
        for b in &balloons[i + 1..] {
            worst = worst.max(a.radius + b.radius - a.center.distance(b.center));
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleReport {
    pub sweeps: usize,
    pub max_overlap: f64,
    pub converged: bool,
}

/// Pairwise horizontal separation until no pair overlaps by more than
/// [`OVERLAP_EPSILON`], within [`MAX_SETTLE_ITERATIONS`] sweeps.
pub fn settle(state: &mut LayoutState, cfg: &RoomConfig) -> SettleReport {
    let mut sweeps = 0;
    loop {
        let worst = max_overlap(&state.balloons);
        if worst < OVERLAP_EPSILON {
            return SettleReport {
                sweeps,
                max_overlap: worst.max(0.0),
                converged: true,
            };
        }
        if sweeps == MAX_SETTLE_ITERATIONS {
            return SettleReport {
                sweeps,
                max_overlap: worst,
                converged: false,
            };
        }
        sweep(state, cfg);
        sweeps += 1;
    }
}

fn sweep(state: &mut LayoutState, cfg: &RoomConfig) {
    let n = state.balloons.len();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&state.balloons[i], &state.balloons[j]);
            let need = a.radius + b.radius;
            if a.center.distance(b.center) >= need {
                continue;
            }
            let dy = a.center.y - b.center.y;
            let target = (need * need - dy * dy).max(0.0).sqrt() + SEPARATION_SLOP;
            let (hx, hz) = (b.center.x - a.center.x, b.center.z - a.center.z);
            let h = hx.hypot(hz);
            let (ux, uz) = if h < 1e-9 {
                let theta: f64 = state.rng.gen_range(0.0..std::f64::consts::TAU);
                (theta.cos(), theta.sin())
            } else {
                (hx / h, hz / h)
            };
            let total = target - h;
            let (ra, rb) = (a.radius, b.radius);
            let (ca, cb) = (a.center, b.center);

            let a_new = clamp_horizontal(
                Vec3::new(ca.x - ux * total / 2.0, ca.y, ca.z - uz * total / 2.0),
                ra,
                cfg,
            );
            let moved_a = (ca.x - a_new.x) * ux + (ca.z - a_new.z) * uz;
            // Whatever a wall kept `a` from taking goes to `b`.
            let rest = total - moved_a;
            let b_new = clamp_horizontal(
                Vec3::new(cb.x + ux * rest, cb.y, cb.z + uz * rest),
                rb,
                cfg,
            );
            state.balloons[i].center = a_new;
            state.balloons[j].center = b_new;
        }
    }
}

fn clamp_horizontal(p: Vec3, radius: f64, cfg: &RoomConfig) -> Vec3 {
    Vec3::new(
        p.x.clamp(radius, cfg.width - radius),
        p.y,
        p.z.clamp(radius, cfg.depth - radius),
    )
}

/// Settles the layout and reports one `BalloonMoved` per displaced balloon.
pub fn resolve_collisions(state: &mut LayoutState, cfg: &RoomConfig) -> Vec<EventKind> {
    let before = positions(state);
    let report = settle(state, cfg);
    let mut events = diff_moves(state, &before);
    if !report.converged {
        events.push(EventKind::warning(
            WarningCode::SettleIncomplete,
            format!(
                "residual overlap {:.4} m after {} sweeps",
                report.max_overlap, report.sweeps
            ),
        ));
    }
    events
}

/// Raises every unpinned balloon to its age height at `now`, then settles.
pub fn step_drift(state: &mut LayoutState, now: f64, cfg: &RoomConfig) -> Result<Vec<EventKind>> {
    if now < state.last_step {
        return Err(Error::TimeInversion {
            created_at: state.last_step,
            now,
        });
    }
    state.last_step = now;
    let before = positions(state);
    for b in state.balloons.iter_mut().filter(|b| !b.pinned) {
        // A balloon stamped in the future stays at spawn height.
        let y = height_at(b.created_at, now.max(b.created_at), cfg)?;
        b.center.y = y;
    }
    let report = settle(state, cfg);
    let mut events = diff_moves(state, &before);
    if !report.converged {
        events.push(EventKind::warning(
            WarningCode::SettleIncomplete,
            format!("residual overlap {:.4} m after drift", report.max_overlap),
        ));
    }
    Ok(events)
}

/// Moves a balloon to `target` (clamped into the room) and pins it.
pub fn grab_move(
    state: &mut LayoutState,
    key: &str,
    target: Vec3,
    cfg: &RoomConfig,
) -> Result<Vec<EventKind>> {
    if !target.is_finite() {
        return Err(Error::InvalidInput("target must be finite".into()));
    }
    let before = positions(state);
    let balloon = state
        .get_mut(key)
        .ok_or_else(|| Error::UnknownBalloon(key.to_string()))?;
    balloon.center = cfg.clamp_sphere(target, balloon.radius);
    balloon.pinned = true;
    let report = settle(state, cfg);

    let grabbed = state.get(key).expect("balloon still present");
    let mut events = vec![EventKind::BalloonMoved {
        topic_key: key.to_string(),
        center: grabbed.center,
        pinned: true,
    }];
    events.extend(
        diff_moves(state, &before)
            .into_iter()
            .filter(|e| !matches!(e, EventKind::BalloonMoved { topic_key, .. } if topic_key == key)),
    );
    if !report.converged {
        events.push(EventKind::warning(
            WarningCode::SettleIncomplete,
            format!("residual overlap {:.4} m after grab", report.max_overlap),
        ));
    }
    Ok(events)
}

/// The wall hit first by the horizontal gaze ray.
pub fn gaze_wall(gaze: &GazeState, cfg: &RoomConfig) -> Wall {
    let (dx, dz) = gaze.horizontal_direction();
    let ox = gaze.origin.x.clamp(0.0, cfg.width);
    let oz = gaze.origin.z.clamp(0.0, cfg.depth);
    let candidates = [
        (Wall::N, (dz > 0.0).then(|| (cfg.depth - oz) / dz)),
        (Wall::E, (dx > 0.0).then(|| (cfg.width - ox) / dx)),
        (Wall::S, (dz < 0.0).then(|| -oz / dz)),
        (Wall::W, (dx < 0.0).then(|| -ox / dx)),
    ];
    let mut best = (Wall::N, f64::INFINITY);
    for (wall, t) in candidates {
        if let Some(t) = t {
            if t < best.1 {
                best = (wall, t);
            }
        }
    }
    best.0
}

/// Distance from a wall to the plane holding its organize grid.
pub fn grid_plane_offset(cfg: &RoomConfig) -> f64 {
    cfg.wall_offset + cfg.r_max
}

/// Grid cells on `wall`, in reading order for a viewer facing it: rows top
/// to bottom, each row left to right.
///
/// Each wall owns the corner at its left end; the right end stops one pitch
/// short so the clockwise neighbour's first column fits.
pub fn wall_slots(wall: Wall, cfg: &RoomConfig) -> Vec<Vec3> {
    let pitch = cfg.grid_pitch();
    let d = grid_plane_offset(cfg);
    let length = match wall {
        Wall::N | Wall::S => cfg.width,
        Wall::E | Wall::W => cfg.depth,
    };
    let span = length - 2.0 * d;
    let cols = if span >= pitch {
        ((span / pitch) + 1e-9).floor() as usize
    } else {
        0
    };
    let rows = if cfg.height >= pitch {
        (((cfg.height - pitch) / pitch) + 1e-9).floor() as usize + 1
    } else {
        0
    };
    let mut slots = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let y = cfg.height - pitch / 2.0 - row as f64 * pitch;
        for col in 0..cols {
            let a = d + col as f64 * pitch;
            let p = match wall {
                Wall::N => Vec3::new(a, y, cfg.depth - d),
                Wall::E => Vec3::new(cfg.width - d, y, cfg.depth - a),
                Wall::S => Vec3::new(cfg.width - a, y, d),
                Wall::W => Vec3::new(d, y, a),
            };
            slots.push(p);
        }
    }
    slots
}

/// Relocates every balloon onto the grid of the gazed wall, oldest first,
/// overflowing clockwise. Placed balloons become pinned.
///
/// Age order is the order of unpinned heights, so it is also what a user
/// reads off the heights before organizing.
pub fn organize(state: &mut LayoutState, gaze: &GazeState, cfg: &RoomConfig) -> Vec<EventKind> {
    if state.balloons.is_empty() {
        return Vec::new();
    }
    let before = positions(state);
    let first = gaze_wall(gaze, cfg);

    let mut order: Vec<usize> = (0..state.balloons.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&state.balloons[i], &state.balloons[j]);
        a.created_at
            .total_cmp(&b.created_at)
            .then_with(|| a.topic_key.cmp(&b.topic_key))
    });

    let mut walls_used = Vec::new();
    let mut cells = Vec::new();
    let mut wall = first;
    for _ in 0..4 {
        if cells.len() >= order.len() {
            break;
        }
        let slots = wall_slots(wall, cfg);
        if !slots.is_empty() {
            walls_used.push(wall);
            cells.extend(slots);
        }
        wall = wall.next_clockwise();
    }

    for (&idx, &cell) in order.iter().zip(cells.iter()) {
        let b = &mut state.balloons[idx];
        b.center = cell;
        b.pinned = true;
    }
    let unplaced = order.len().saturating_sub(cells.len());
    let report = settle(state, cfg);

    let mut events = diff_moves(state, &before);
    if !events.is_empty() {
        state.organized_wall = Some(first);
        events.push(EventKind::OrganizeApplied { walls: walls_used });
    }
    if unplaced > 0 {
        events.push(EventKind::warning(
            WarningCode::RoomSaturated,
            format!("{unplaced} balloons did not fit on the walls"),
        ));
    }
    if !report.converged {
        events.push(EventKind::warning(
            WarningCode::SettleIncomplete,
            format!("residual overlap {:.4} m after organize", report.max_overlap),
        ));
    }
    events
}

fn positions(state: &LayoutState) -> Vec<(String, Vec3, bool)> {
    state
        .balloons
        .iter()
        .map(|b| (b.topic_key.clone(), b.center, b.pinned))
        .collect()
}

fn diff_moves(state: &LayoutState, before: &[(String, Vec3, bool)]) -> Vec<EventKind> {
    state
        .balloons
        .iter()
        .filter(|b| {
            before
                .iter()
                .find(|(k, _, _)| *k == b.topic_key)
                .is_none_or(|(_, c, p)| *c != b.center || *p != b.pinned)
        })
        .map(|b| EventKind::BalloonMoved {
            topic_key: b.topic_key.clone(),
            center: b.center,
            pinned: b.pinned,
        })
        .collect()
}
