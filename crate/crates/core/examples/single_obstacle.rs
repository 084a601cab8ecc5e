//! Runs the single-cone preset and writes its trajectory log.
//!
//! `cargo run --example single_obstacle -- [out.csv]`

use std::fs::File;
use std::io::BufWriter;

use keepout::scenario::{build, normalize, preset};
use keepout::sim::{run_scenario, write_trajectory_csv};

fn main() -> keepout::Result<()> {
    let loaded = normalize(preset("paper-single-1")?)?;
    let b = build(&loaded.file)?;
    let out = run_scenario(&b.scenario, &b.sim)?;

    for r in out.records.iter().step_by(1000) {
        println!(
            "t {:6.1}  error {:8.4} deg  rho {:.4}  eps {:.4}  |u| {:.4}",
            r.t,
            r.pointing_angle_deg,
            r.rho_q,
            r.eps_q,
            r.torque.iter().map(|u| u * u).sum::<f64>().sqrt()
        );
    }
    let s = &out.summary;
    println!("settled below 1 deg at {:?} s", s.settling_time_s);
    println!("terminal error after 80 s: {:.4} deg", s.terminal_error_deg);
    println!("closest approach to the cone axis: {:.2} deg", s.min_clearance_deg[0]);

    if let Some(path) = std::env::args().nth(1) {
        write_trajectory_csv(&out.records, b.scenario.obstacles.len(), BufWriter::new(File::create(&path)?))?;
        println!("wrote {path}");
    }
    Ok(())
}
