// Spawning in the gaze cone, collision settling, drift and one-click organize.

use idea_balloons::layout::{self, LayoutState};
use idea_balloons::model::{height_at, scale_radius, Balloon, GazeState, RoomConfig, Vec3};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RoomConfig::with_seed(42);
    let mut state = LayoutState::new(&cfg);
    let gaze = GazeState::new(Vec3::new(3.0, 1.6, 1.0), Vec3::new(0.2, -0.1, 1.0))?;
    state.user_pose = gaze;

    for (i, words) in [5usize, 40, 120, 300, 12, 60].iter().enumerate() {
        let created = 2.0 * i as f64;
        let radius = scale_radius(*words, &cfg);
        let (center, quality) = layout::spawn_position(&gaze, radius, &mut state, &cfg);
        println!("t={created:>4.1}  r={radius:.3}  spawn {center:?} ({quality:?})");
        state
            .balloons
            .push(Balloon::new(format!("topic{i}"), center, radius, created));
        let report = layout::settle(&mut state, &cfg);
        assert!(report.converged);
    }

    let now = 60.0;
    layout::step_drift(&mut state, now, &cfg)?;
    for b in &state.balloons {
        let expected = height_at(b.created_at, now, &cfg)?;
        println!("{:<7} age {:>4.1}s  y = {:.3}", b.topic_key, now - b.created_at, b.center.y);
        assert_eq!(b.center.y, expected);
    }

    let events = layout::organize(&mut state, &gaze, &cfg);
    println!("organize emitted {} events", events.len());
    for b in &state.balloons {
        println!("{:<7} -> {:?} pinned={}", b.topic_key, b.center, b.pinned);
    }
    assert!(layout::max_overlap(&state.balloons) < layout::OVERLAP_EPSILON);
    assert!(layout::organize(&mut state, &gaze, &cfg).is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
