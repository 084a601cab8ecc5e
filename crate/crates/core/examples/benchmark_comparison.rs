//! Proposed switching controller against the APF-only benchmark on the
//! same geometry.

use keepout::scenario::{build, normalize, preset};
use keepout::sim::{run_scenario, ControllerMode, SimConfig};

fn main() -> keepout::Result<()> {
    let b = build(&normalize(preset("paper-compare-1")?)?.file)?;
    for mode in [ControllerMode::Proposed, ControllerMode::BenchmarkApf] {
        let out = run_scenario(&b.scenario, &SimConfig { controller_mode: mode, ..b.sim })?;
        let s = &out.summary;
        println!(
            "{mode:?}: settle {:?} s, terminal {:.4} deg, final {:.4} deg, saturated {:.1}% of steps",
            s.settling_time_s,
            s.terminal_error_deg,
            s.final_error_deg,
            100.0 * s.saturation_fraction
        );
    }
    Ok(())
}
