// Voice command grammar and its effect on a scene.

use idea_balloons::commands::{execute_command, parse_command, VoiceCommand};
use idea_balloons::model::{RoomConfig, Sentence, Topic, TopicOrigin};
use idea_balloons::{Scene, ScriptedProvider};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for text in [
        "Create Vacation Plans",
        "change colour into Color.",
        "Merge Colors into Color",
        "I want to create memories",
        "merge with nothing",
    ] {
        println!("{text:<30} -> {:?}", parse_command(text));
    }

    let mut scene = Scene::new(RoomConfig::with_seed(3));
    for (title, text) in [("Colors", "Red is warm"), ("Color", "Blue is calm and deep")] {
        let topic = Topic::new(title, vec![Sentence::new(None, text)], 0.0, TopicOrigin::Extracted)?;
        scene.create_topic(topic);
    }
    let mut provider = ScriptedProvider::new();
    provider.on_expand("Color", ["Contrast", "Palette"]);

    let script = [
        "Merge Colors into Color",
        "Expand Color",
        "Create Typography",
        "Create typography",
        "Change Typography into Fonts",
        "Delete Ghost",
    ];
    for (i, text) in script.iter().enumerate() {
        let cmd = parse_command(text);
        assert!(!matches!(cmd, VoiceCommand::NotACommand(_)));
        let events = execute_command(&cmd, &mut scene, &mut provider, 1.0 + i as f64, 2);
        let names: Vec<&str> = events.iter().map(|e| e.name()).collect();
        println!("{text:<30} {names:?}");
    }

    let titles = scene.topics.titles();
    println!("topics: {titles:?}");
    assert_eq!(titles, ["Color", "Contrast", "Palette", "Fonts"]);
    assert_eq!(scene.topics.get("color").map(|t| t.word_count), Some(8));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
