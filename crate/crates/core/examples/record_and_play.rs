// Linear mode: record first, play later. A second playback of the same
// recording is answered entirely from the provider cache.

use idea_balloons::error::ProviderError;
use idea_balloons::model::{SegmentSource, TranscriptSegment};
use idea_balloons::provider::{Provider, ProviderRequest};
use idea_balloons::session::Recording;
use idea_balloons::{ScriptedProvider, Session, SessionConfig, SessionEvent, SessionPhase};

struct Offline;

impl Provider for Offline {
    fn complete(&mut self, _: &ProviderRequest) -> Result<String, ProviderError> {
        Err(ProviderError::Transport("offline".into()))
    }
}

fn record(session: &mut Session, lines: &[(&str, f64)]) -> idea_balloons::Result<()> {
    session.start_recording()?;
    for (i, (text, t)) in lines.iter().enumerate() {
        let seg = TranscriptSegment::new(i as u64 + 1, *text, *t - 1.0, *t, SegmentSource::Live)?;
        session.ingest_segment(seg)?;
    }
    session.stop_recording()?;
    Ok(())
}

fn content(events: &[SessionEvent]) -> Vec<String> {
    events
        .iter()
        .map(|e| serde_json::to_string(&e.kind).expect("events serialize"))
        .collect()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let lines = [
        ("Our results come first.", 2.0),
        ("Then the method.", 6.0),
        ("Related work closes the talk.", 11.0),
    ];
    let mut provider = ScriptedProvider::new();
    provider
        .on_segment(lines[0].0, "TOPIC: Results\nSENT: Our results come first.")
        .on_segment(lines[1].0, "TOPIC: Method\nSENT: Then the method.")
        .on_segment(lines[2].0, "TOPIC: Related Work\nSENT: Related work closes the talk.");

    let mut first = Session::new(SessionConfig::with_seed(4), Box::new(provider))?;
    record(&mut first, &lines)?;
    let recording: Recording = first.recording().clone();
    println!("recorded {} segments", recording.segments.len());

    first.advance_to(20.0)?;
    first.play(Some(2.0))?;
    for ev in first.play_to_end()? {
        if ev.kind.name() == "BalloonCreated" {
            println!("t={:>5.2}  balloon appears", ev.t);
        }
    }
    assert_eq!(first.phase(), SessionPhase::Done);
    println!("upstream calls during first playback: {}", first.upstream_calls());

    let mut second = Session::new(SessionConfig::with_seed(4), Box::new(Offline))?
        .with_cache(first.cache().clone());
    record(&mut second, &lines)?;
    second.advance_to(20.0)?;
    second.play(Some(2.0))?;
    second.play_to_end()?;
    println!("upstream calls during cached playback: {}", second.upstream_calls());

    assert_eq!(second.upstream_calls(), 0);
    assert_eq!(second.scene(), first.scene());
    assert_eq!(content(second.events()), content(first.events()));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
