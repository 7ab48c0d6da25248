// Headless replay of a transcript file with the keyword provider.

use idea_balloons::cli::{replay_transcript, to_json};
use idea_balloons::{RuleProvider, SessionConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/vacation.txt");
    let content = std::fs::read_to_string(path)?;
    let (events, layout) = replay_transcript(&content, SessionConfig::with_seed(7), Box::new(RuleProvider))?;
    let (again, _) = replay_transcript(&content, SessionConfig::with_seed(7), Box::new(RuleProvider))?;

    println!("{} events", events.len());
    for b in &layout {
        println!(
            "{:<8} r = {:.3}  at [{:.2}, {:.2}, {:.2}]",
            b.topic_key, b.radius, b.center[0], b.center[1], b.center[2]
        );
    }
    assert_eq!(to_json(&events), to_json(&again));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
