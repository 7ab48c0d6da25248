// One utterance through the extraction pipeline: prompt, answer, parse, apply.

use idea_balloons::extractor::{self, ExtractOutcome};
use idea_balloons::model::{RoomConfig, SegmentSource, TranscriptSegment};
use idea_balloons::{Scene, ScriptedProvider};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut scene = Scene::new(RoomConfig::with_seed(1));
    let mut provider = ScriptedProvider::new();
    provider
        .on_segment(
            "Lisbon has great food and the trams look fun.",
            "TOPIC: Lisbon\nSENT: Lisbon has great food\nTOPIC: Transport\nSENT: the trams look fun",
        )
        .on_segment(
            "The food in Lisbon is cheap too.",
            "TOPIC: lisbon\nSENT: The food in Lisbon is cheap too.",
        );

    let utterances = [
        "Lisbon has great food and the trams look fun.",
        "The food in Lisbon is cheap too.",
    ];
    for (i, text) in utterances.iter().enumerate() {
        let t = 2.0 * (i as f64 + 1.0);
        let segment = TranscriptSegment::new(i as u64 + 1, *text, t - 1.5, t, SegmentSource::Live)?;
        if i == 0 {
            let request = extractor::build_prompt(&segment, &scene.topics.titles());
            println!("--- prompt ---\n{}\n--------------", request.prompt);
        }
        match extractor::request_extraction(&segment, &scene, &mut provider) {
            ExtractOutcome::Parsed(ex) => {
                for event in extractor::apply_extraction(&ex, &mut scene, t, Some(segment.id)) {
                    println!("{:>18}  {}", event.name(), serde_json::to_string(&event)?);
                }
            }
            ExtractOutcome::Failed(warning) => println!("warning: {warning:?}"),
        }
    }

    for topic in scene.topics.iter() {
        let b = scene.layout.get(&topic.key).expect("every topic has a balloon");
        println!(
            "{:<10} {:>2} words  r = {:.3}  sentences = {}",
            topic.title,
            topic.word_count,
            b.radius,
            topic.sentences.len()
        );
    }
    assert_eq!(scene.topics.len(), 2);
    assert_eq!(scene.topics.get("lisbon").map(|t| t.sentences.len()), Some(2));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
