use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use keepout::scenario::{
    emit_scenario, list_presets, load_scenario, normalize, preset, run_all_presets, run_file, Outcome, Overrides,
    ScenarioResult,
};
use keepout::Result;

#[derive(Parser)]
#[command(name = "keepout-sim", about = "Keep-out cone attitude reorientation simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file or preset and write trajectory.csv and summary.json.
    Run {
        /// Scenario JSON file.
        #[arg(long, conflicts_with_all = ["preset", "all_presets"])]
        scenario: Option<PathBuf>,
        /// Built-in preset name (see list-presets).
        #[arg(long, conflicts_with = "all_presets")]
        preset: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also run the APF-only benchmark and write comparison.json.
        #[arg(long)]
        compare: bool,
        /// Run every preset in parallel, one subdirectory each.
        #[arg(long)]
        all_presets: bool,
        /// Override the integration step, s.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the simulated duration, s.
        #[arg(long)]
        duration: Option<f64>,
        /// Switch the external disturbance off.
        #[arg(long)]
        no_disturbance: bool,
        /// Reserved; runs are deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the built-in presets.
    ListPresets,
    /// Print a preset as a scenario file.
    Emit { preset: String },
}

fn report(r: &ScenarioResult) {
    for w in &r.warnings {
        eprintln!("warning: {}: {w}", r.name);
    }
    for c in r.rules.warnings() {
        eprintln!("warning: {}: {}: {}", r.name, c.rule, c.detail);
    }
    for run in &r.runs {
        let s = &run.summary;
        let settle = s.settling_time_s.map_or("never".to_string(), |t| format!("{t:.2} s"));
        let clear: Vec<String> = s.min_clearance_deg.iter().map(|c| format!("{c:.2}")).collect();
        println!(
            "{} [{:?}] settle {settle}, terminal {:.4} deg, final {:.4} deg, min clearance [{}] deg{}",
            r.name,
            s.controller_mode,
            s.terminal_error_deg,
            s.final_error_deg,
            clear.join(", "),
            if s.constraint_violated { ", CONSTRAINT VIOLATED" } else { "" }
        );
        for m in &run.target_misses {
            println!("  target missed: {m}");
        }
    }
    if let Some(c) = &r.comparison {
        println!(
            "{} terminal error: proposed {:.4} deg, benchmark {:.4} deg",
            r.name, c.proposed_terminal_error_deg, c.benchmark_terminal_error_deg
        );
    }
}

fn fail(name: &str, e: &keepout::Error) -> Outcome {
    eprintln!("error: {name}: {e}");
    Outcome::of_error(e)
}

fn run_one(source: Result<keepout::scenario::Loaded>, name: &str, compare: bool, out: &PathBuf, ov: Overrides) -> Outcome {
    let res = source.and_then(|mut l| {
        ov.apply(&mut l.file);
        let warnings = std::mem::take(&mut l.warnings);
        let mut l = normalize(l.file)?;
        l.warnings.splice(0..0, warnings);
        run_file(l, compare, Some(out))
    });
    match res {
        Ok(r) => {
            report(&r);
            r.outcome
        }
        Err(e) => fail(name, &e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::ListPresets => {
            for (name, desc) in list_presets() {
                println!("{name:<16} {desc}");
            }
            Outcome::Ok
        }
        Command::Emit { preset: name } => match preset(&name).and_then(|f| emit_scenario(&f)) {
            Ok(text) => {
                println!("{text}");
                Outcome::Ok
            }
            Err(e) => fail(&name, &e),
        },
        Command::Run { scenario, preset: name, out, compare, all_presets, dt, duration, no_disturbance, seed: _ } => {
            let ov = Overrides { dt, duration, no_disturbance };
            if all_presets {
                run_all_presets(ov, compare, Some(&out))
                    .iter()
                    .map(|(name, res)| match res {
                        Ok(r) => {
                            report(r);
                            r.outcome
                        }
                        Err(e) => fail(name, e),
                    })
                    .max()
                    .unwrap_or(Outcome::Ok)
            } else if let Some(path) = scenario {
                run_one(load_scenario(&path), &path.display().to_string(), compare, &out, ov)
            } else if let Some(name) = name {
                let src = preset(&name).map(|file| keepout::scenario::Loaded { file, warnings: Vec::new() });
                run_one(src, &name, compare, &out, ov)
            } else {
                eprintln!("error: one of --scenario, --preset or --all-presets is required");
                Outcome::ValidationFailure
            }
        }
    };
    ExitCode::from(outcome.exit_code() as u8)
}
