use keepout::attitude::{UnitQuaternion, Vec3};
use keepout::scenario::{build, normalize, preset, Built};
use keepout::sim::{run_scenario, SimConfig};
use proptest::prelude::*;

fn single() -> Built {
    build(&normalize(preset("paper-single-1").unwrap()).unwrap().file).unwrap()
}

#[test]
fn nominal_lyapunov_mostly_non_increasing() {
    let b = single();
    let sim = SimConfig { disturbance_enabled: false, ..b.sim };
    let out = run_scenario(&b.scenario, &sim).unwrap();
    let d = &out.summary.lyapunov;
    assert!(d.samples > 1000);
    assert!(1.0 - d.increasing_fraction >= 0.99, "{d:?}");
}

#[test]
fn benchmark_runs_finish() {
    let b = single();
    let sim = SimConfig { controller_mode: keepout::sim::ControllerMode::BenchmarkApf, duration: 30.0, ..b.sim };
    let out = run_scenario(&b.scenario, &sim).unwrap();
    assert!(out.summary.max_abs_torque <= 0.5);
    assert!(!out.summary.constraint_violated);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Arbitrary start attitudes: the run stays finite, saturated, normalized
    // and inside the envelope wherever the switch is off.
    #[test]
    fn random_starts_keep_invariants(
        ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in -1.0..1.0f64, angle in 0.0..1.2f64,
        w in prop::array::uniform3(-0.02..0.02f64),
    ) {
        let axis = Vec3::new(ax, ay, az);
        prop_assume!(axis.norm() > 0.1);
        let mut b = single();
        b.scenario.initial.attitude = UnitQuaternion::from_axis_angle(&axis, angle).unwrap();
        b.scenario.initial.omega = Vec3::from(w);
        let sim = SimConfig { duration: 20.0, ..b.sim };
        let out = run_scenario(&b.scenario, &sim).unwrap();
        let s = &out.summary;
        prop_assert!(s.max_abs_torque <= 0.5);
        prop_assert!(s.max_quat_norm_error < 1e-9);
        prop_assert!(s.max_abs_eps_outside_switch < 1.0);
        prop_assert!(s.max_freeze_drift_rate() < 1e-6);
    }
}
