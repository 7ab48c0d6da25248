// Run the brainstorm, merge, organize, record and play scenario script.

use idea_balloons::sim::{parse_script, run_script, SimOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenario.json");
    let script = parse_script(&std::fs::read_to_string(path)?)?;
    let report = run_script(&script, &SimOptions::default())?;
    print!("{}", report.render());
    if let Some(failure) = report.failure {
        return Err(failure.into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
