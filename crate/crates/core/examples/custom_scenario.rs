//! Loads a scenario file and runs a tweaked copy through the same path the
//! CLI uses.
//!
//! `cargo run --example custom_scenario -- scenarios/grazing-1.json`

use std::path::PathBuf;

use keepout::scenario::{emit_scenario, load_scenario, normalize, run_file};

fn main() -> keepout::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/grazing-1.json"));
    let mut loaded = load_scenario(&path)?;
    for w in &loaded.warnings {
        println!("warning: {w}");
    }

    // Half the duration, no disturbance.
    loaded.file.sim.duration /= 2.0;
    loaded.file.sim.disturbance_enabled = false;
    loaded.file.targets = Default::default();
    let loaded = normalize(loaded.file)?;

    let r = run_file(loaded.clone(), false, None)?;
    let s = &r.runs[0].summary;
    println!("{}: clearance {:.2?} deg, final error {:.4} deg", r.name, s.min_clearance_deg, s.final_error_deg);
    println!("emitted scenario is {} bytes of JSON", emit_scenario(&loaded.file)?.len());
    Ok(())
}
