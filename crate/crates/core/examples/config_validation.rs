//! Gain-rule report for a preset, then for deliberately broken variants.

use keepout::controller::CheckStatus;
use keepout::scenario::{build, check_rules, normalize, preset, ScenarioFile};

fn report(label: &str, file: &ScenarioFile) -> keepout::Result<()> {
    let built = build(file)?;
    let rep = check_rules(file, &built);
    println!("== {label}: {}", if rep.passed() { "passes" } else { "fails" });
    for c in &rep.checks {
        let tag = match c.status {
            CheckStatus::Pass => "ok  ",
            CheckStatus::Warn => "warn",
            CheckStatus::Fail => "FAIL",
        };
        println!("  {tag} {:<30} {}", c.rule, c.detail);
    }
    Ok(())
}

fn main() -> keepout::Result<()> {
    let base = normalize(preset("paper-two-4")?)?.file;
    report("paper-two-4", &base)?;

    let mut slow = base.clone();
    slow.controller.k1 = 0.05;
    report("K1 below k_rho", &slow)?;

    let mut steep = base.clone();
    for o in &mut steep.obstacles {
        o.r_slope = 2.0;
        o.k_r = 0.12;
    }
    report("repulsion slope beyond the attraction rule", &steep)?;

    let mut strict = base;
    strict.theta_df_deg = 50.0;
    report("50 deg separation assumed on this geometry", &strict)?;
    Ok(())
}
