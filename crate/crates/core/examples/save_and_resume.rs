// Save a live session, load it back and keep talking.

use idea_balloons::{RuleProvider, Session, SessionConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("balloons-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("talk.balloons.json");

    let mut session = Session::new(SessionConfig::with_seed(9), Box::new(RuleProvider))?;
    session.start_session()?;
    session.ingest_text("Gardens need water and gardens need light.", 2.0)?;
    session.ingest_text("Tomatoes grow fast in warm weather.", 5.0)?;
    session.save(&path)?;
    println!("saved {} events to {}", session.events().len(), path.display());

    let mut resumed = Session::load(&path, Box::new(RuleProvider))?;
    assert_eq!(resumed.scene(), session.scene());

    let more = "Tomatoes need support stakes.";
    session.ingest_text(more, 9.0)?;
    resumed.ingest_text(more, 9.0)?;
    println!("topics after resume: {:?}", resumed.scene().topics.titles());
    assert_eq!(resumed.events(), session.events());

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
