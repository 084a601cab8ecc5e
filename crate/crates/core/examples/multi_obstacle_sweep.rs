//! Every preset in parallel, one summary line each.

use keepout::scenario::{run_all_presets, Overrides};

fn main() {
    for (name, res) in run_all_presets(Overrides::default(), false, None) {
        match res {
            Ok(r) => {
                let s = &r.runs[0].summary;
                let clear: Vec<String> = s.min_clearance_deg.iter().map(|c| format!("{c:6.2}")).collect();
                println!(
                    "{name:<16} clearance [{}] deg  settle {:>6}  terminal {:.4} deg  exit {}",
                    clear.join(", "),
                    s.settling_time_s.map_or("never".into(), |t| format!("{t:.1}s")),
                    s.terminal_error_deg,
                    r.outcome.exit_code()
                );
            }
            Err(e) => println!("{name:<16} error: {e}"),
        }
    }
}
