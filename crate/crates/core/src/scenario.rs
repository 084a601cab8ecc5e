//! Scenario files, the built-in presets and run orchestration.
//!
//! Angles in scenario files are degrees; everything is converted to radians
//! when the runtime [`Scenario`] is built.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attitude::{BodyState, Mat3, SpacecraftParams, UnitQuaternion, Vec3};
use crate::controller::{validate_config, CheckStatus, ControllerConfig, Obstacle, ValidationReport};
use crate::envelope::{EnvelopeConfig, SwitchConfig};
use crate::error::{Error, Result};
use crate::field::ObstacleCone;
use crate::integrator::Integrator;
use crate::sim::{run_scenario, write_trajectory_csv, ControllerMode, RunOutput, RunSummary, Scenario, SimConfig};

/// Correction above which normalizing an input vector is reported.
pub const NORMALIZE_WARN: f64 = 1e-6;
/// Vectors closer than this to unit length are left untouched, so that a
/// normalized file reloads bit-for-bit.
const NORMALIZE_SKIP: f64 = 1e-12;

const REFERENCE_TUNING: &str = include_str!("../data/reference_tuning.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacecraftSpec {
    pub inertia: [[f64; 3]; 3],
    pub torque_limit: f64,
    pub disturbance_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// `[x, y, z, w]`, body to inertial.
    pub attitude: [f64; 4],
    pub omega: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub direction: [f64; 3],
    pub theta_f_deg: f64,
    pub theta_0_deg: f64,
    pub theta_1_deg: f64,
    pub k_r: f64,
    pub r_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeTuning {
    pub theta_f_deg: f64,
    pub theta_0_deg: f64,
    pub theta_1_deg: f64,
    pub k_r: f64,
    pub r_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    pub delta: f64,
    pub m: f64,
    pub n: f64,
    /// Places `P_1` at `L_0 + p1_fraction·(L_1 − L_0)`.
    #[serde(default = "full")]
    pub p1_fraction: f64,
}

fn full() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "stride")]
    pub record_stride: usize,
    #[serde(default = "enabled")]
    pub disturbance_enabled: bool,
}

fn stride() -> usize {
    1
}

fn enabled() -> bool {
    true
}

/// Performance targets a run must meet for a zero exit status.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_settling_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_terminal_error_deg: Option<f64>,
}

impl Targets {
    /// Human-readable misses; empty when every target is met.
    pub fn misses(&self, s: &RunSummary) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(limit) = self.max_settling_time_s {
            match s.settling_time_s {
                Some(t) if t <= limit => {}
                Some(t) => out.push(format!("settling time {t:.2} s > {limit} s")),
                None => out.push(format!("never settled (limit {limit} s)")),
            }
        }
        if let Some(limit) = self.max_terminal_error_deg {
            if !(s.terminal_error_deg < limit) {
                out.push(format!("terminal error {:.4} deg >= {limit} deg", s.terminal_error_deg));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub spacecraft: SpacecraftSpec,
    pub initial: InitialSpec,
    /// Body frame.
    pub boresight: [f64; 3],
    /// Inertial frame.
    pub goal: [f64; 3],
    pub obstacles: Vec<ObstacleSpec>,
    pub switching: SwitchSpec,
    pub envelope: EnvelopeConfig,
    pub controller: ControllerConfig,
    pub sim: SimSpec,
    #[serde(default)]
    pub controller_mode: ControllerMode,
    /// Always run both controllers and write a comparison.
    #[serde(default)]
    pub compare: bool,
    /// Minimum goal-to-obstacle separation the gain rules assume.
    pub theta_df_deg: f64,
    #[serde(default)]
    pub targets: Targets,
    /// Gain rules this scenario breaks on purpose; their failures are
    /// downgraded to warnings. Matched on the rule name before any `[i]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waived_rules: Vec<String>,
}

/// Shared tuning for every preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTuning {
    pub spacecraft: SpacecraftSpec,
    pub initial: InitialSpec,
    pub boresight: [f64; 3],
    pub goal: [f64; 3],
    pub cone: ConeTuning,
    pub switching: SwitchSpec,
    pub envelope: EnvelopeConfig,
    pub controller: ControllerConfig,
    pub sim: SimSpec,
    pub theta_df_deg: f64,
    pub targets: Targets,
}

pub fn reference_tuning() -> ReferenceTuning {
    serde_json::from_str(REFERENCE_TUNING).expect("bundled reference tuning is valid")
}

/// Built-in scenario descriptor.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub obstacles: &'static [[f64; 3]],
    /// Goal separation assumed by the gain rules, degrees.
    pub theta_df_deg: f64,
    pub compare: bool,
    /// Whether the shared performance targets apply.
    pub targets: bool,
}

const PRESETS: &[Preset] = &[
    Preset {
        name: "paper-single-1",
        description: "single keep-out cone at [0.5145, 0.8575, 0]",
        obstacles: &[[0.5145, 0.8575, 0.0]],
        theta_df_deg: 50.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-single-2",
        description: "single keep-out cone at [-0.099, 0.990, -0.099]",
        obstacles: &[[-0.099, 0.990, -0.099]],
        theta_df_deg: 50.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-single-3",
        description: "single keep-out cone at [0, 0.980, 0.196]",
        obstacles: &[[0.0, 0.980, 0.196]],
        theta_df_deg: 50.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-two-1",
        description: "two cones, first two-obstacle setting",
        obstacles: &[[0.571, 0.816, 0.081], [-0.336, 0.842, 0.421]],
        theta_df_deg: 44.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-two-2",
        description: "two cones, second two-obstacle setting",
        obstacles: &[[0.512, 0.854, 0.085], [-0.188, 0.940, -0.282]],
        theta_df_deg: 50.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-two-3",
        description: "two cones, third two-obstacle setting",
        obstacles: &[[0.514, 0.857, 0.0], [-0.311, 0.778, -0.544]],
        theta_df_deg: 48.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-two-4",
        description: "two cones, fourth two-obstacle setting",
        obstacles: &[[0.472, 0.788, 0.394], [-0.369, 0.924, -0.092]],
        theta_df_deg: 38.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-three-1",
        description: "three cones",
        obstacles: &[[0.472, 0.788, 0.394], [-0.336, 0.842, 0.421], [0.169, 0.845, -0.507]],
        theta_df_deg: 44.0,
        compare: false,
        targets: true,
    },
    Preset {
        name: "paper-compare-1",
        description: "single cone at [0.5145, 0.8575, 0], proposed vs APF-only benchmark",
        obstacles: &[[0.5145, 0.8575, 0.0]],
        theta_df_deg: 50.0,
        compare: true,
        targets: true,
    },
];

/// Preset names and descriptions in their fixed order.
pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    PRESETS.iter().map(|p| (p.name, p.description)).collect()
}

pub fn preset(name: &str) -> Result<ScenarioFile> {
    let p = PRESETS.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let t = reference_tuning();
    Ok(ScenarioFile {
        name: p.name.to_string(),
        description: p.description.to_string(),
        spacecraft: t.spacecraft,
        initial: t.initial,
        boresight: t.boresight,
        goal: t.goal,
        obstacles: p
            .obstacles
            .iter()
            .map(|d| ObstacleSpec {
                direction: *d,
                theta_f_deg: t.cone.theta_f_deg,
                theta_0_deg: t.cone.theta_0_deg,
                theta_1_deg: t.cone.theta_1_deg,
                k_r: t.cone.k_r,
                r_slope: t.cone.r_slope,
            })
            .collect(),
        switching: t.switching,
        envelope: t.envelope,
        controller: t.controller,
        sim: t.sim,
        controller_mode: ControllerMode::Proposed,
        compare: p.compare,
        theta_df_deg: p.theta_df_deg.min(t.theta_df_deg),
        targets: if p.targets { t.targets } else { Targets::default() },
        waived_rules: Vec::new(),
    })
}

/// A scenario file after unit-vector normalization, with any warnings.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ScenarioFile,
    pub warnings: Vec<String>,
}

/// Reads and validates a scenario file. Malformed JSON is a
/// [`Error::Parse`]; schema and physics problems are collected into one
/// [`Error::Validation`], each message prefixed by its field path.
pub fn load_scenario(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text, &path.display().to_string())
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Loaded> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { path: origin.to_string(), message: e.to_string() })?;
    let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::Validation(vec![format!("{path}: {}", e.into_inner())])
    })?;
    normalize(file)
}

/// Normalizes the unit vectors in place and checks that the file builds.
pub fn normalize(mut file: ScenarioFile) -> Result<Loaded> {
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    normalize_field(&mut file.boresight, "boresight", &mut warnings, &mut errors);
    normalize_field(&mut file.goal, "goal", &mut warnings, &mut errors);
    for (i, o) in file.obstacles.iter_mut().enumerate() {
        normalize_field(&mut o.direction, &format!("obstacles[{i}].direction"), &mut warnings, &mut errors);
    }
    let q = Vector4::from(file.initial.attitude);
    let n = q.norm();
    if !(n > 0.0 && n.is_finite()) {
        errors.push("initial.attitude: quaternion must be non-zero and finite".to_string());
    } else if (n - 1.0).abs() > NORMALIZE_SKIP {
        if (n - 1.0).abs() > NORMALIZE_WARN {
            warnings.push(format!("initial.attitude: norm {n} normalized to 1"));
        }
        file.initial.attitude = (q / n).into();
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    build(&file)?;
    Ok(Loaded { file, warnings })
}

fn normalize_field(v: &mut [f64; 3], field: &str, warnings: &mut Vec<String>, errors: &mut Vec<String>) {
    let x = Vec3::from(*v);
    let n = x.norm();
    if !(n > 0.0 && n.is_finite()) {
        errors.push(format!("{field}: must be a non-zero finite vector"));
        return;
    }
    if (n - 1.0).abs() > NORMALIZE_SKIP {
        if (n - 1.0).abs() > NORMALIZE_WARN {
            warnings.push(format!("{field}: norm {n} normalized to 1"));
        }
        *v = (x / n).into();
    }
}

/// Runtime objects built from a file, plus what orchestration needs.
#[derive(Debug, Clone)]
pub struct Built {
    pub scenario: Scenario,
    pub sim: SimConfig,
    pub theta_df: f64,
}

fn field_err(field: &str) -> impl Fn(Error) -> String + '_ {
    move |e| format!("{field}: {}", strip(e))
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidParameter(m) | Error::InvalidInput(m) | Error::InvalidState(m) => m,
        other => other.to_string(),
    }
}

/// Builds the runtime scenario, collecting every error with its field path.
pub fn build(file: &ScenarioFile) -> Result<Built> {
    let mut errors = Vec::new();
    let inertia = Mat3::from_fn(|i, j| file.spacecraft.inertia[i][j]);
    let params = SpacecraftParams::new(inertia, file.spacecraft.torque_limit, file.spacecraft.disturbance_bound)
        .map_err(field_err("spacecraft"))
        .map_err(|e| errors.push(e))
        .ok();

    let attitude = UnitQuaternion::from_vector(&Vector4::from(file.initial.attitude))
        .map_err(field_err("initial.attitude"))
        .map_err(|e| errors.push(e))
        .ok();

    let mut obstacles = Vec::new();
    for (i, o) in file.obstacles.iter().enumerate() {
        let path = format!("obstacles[{i}]");
        let cone = ObstacleCone::new(
            Vec3::from(o.direction),
            o.theta_f_deg.to_radians(),
            o.theta_0_deg.to_radians(),
            o.theta_1_deg.to_radians(),
            o.k_r,
            o.r_slope,
        );
        match cone {
            Ok(cone) => {
                let s = &file.switching;
                if !(s.p1_fraction > 0.0 && s.p1_fraction <= 1.0) {
                    errors.push(format!("switching.p1_fraction: must lie in (0, 1], got {}", s.p1_fraction));
                    continue;
                }
                let p1 = cone.l0() + s.p1_fraction * (cone.l1() - cone.l0());
                match SwitchConfig::from_cone(&cone, p1, s.delta, s.m, s.n) {
                    Ok(switches) => obstacles.push(Obstacle { cone, switches }),
                    Err(e) => errors.push(format!("switching (for {path}): {}", strip(e))),
                }
            }
            Err(e) => errors.push(format!("{path}: {}", strip(e))),
        }
    }
    if file.obstacles.is_empty() {
        errors.push("obstacles: at least one obstacle is required".into());
    }

    if let Err(e) = file.envelope.validate() {
        errors.push(format!("envelope: {}", strip(e)));
    }

    let sim = SimConfig {
        dt: file.sim.dt,
        duration: file.sim.duration,
        integrator: file.sim.integrator,
        record_stride: file.sim.record_stride,
        disturbance_enabled: file.sim.disturbance_enabled,
        controller_mode: file.controller_mode,
    };
    if let Err(e) = sim.validate() {
        errors.push(format!("sim: {}", strip(e)));
    }
    if !(file.theta_df_deg > 0.0 && file.theta_df_deg < 180.0) {
        errors.push(format!("theta_df_deg: must lie in (0, 180), got {}", file.theta_df_deg));
    }

    match (params, attitude, errors.is_empty()) {
        (Some(params), Some(attitude), true) => Ok(Built {
            scenario: Scenario {
                params,
                initial: BodyState { attitude, omega: Vec3::from(file.initial.omega) },
                boresight: Vec3::from(file.boresight),
                goal: Vec3::from(file.goal),
                obstacles,
                envelope: file.envelope,
                controller: file.controller,
            },
            sim,
            theta_df: file.theta_df_deg.to_radians(),
        }),
        _ => Err(Error::Validation(errors)),
    }
}

/// Gain-rule report with waived failures downgraded to warnings.
pub fn check_rules(file: &ScenarioFile, built: &Built) -> ValidationReport {
    let s = &built.scenario;
    let mut rep = validate_config(
        &s.controller,
        &s.envelope,
        &s.obstacles,
        &s.goal,
        s.initial_pointing_error(),
        built.theta_df,
    );
    for c in &mut rep.checks {
        let base = c.rule.split('[').next().unwrap_or(&c.rule);
        if c.status == CheckStatus::Fail && file.waived_rules.iter().any(|w| w == base) {
            c.status = CheckStatus::Warn;
            c.detail.push_str(" (waived)");
        }
    }
    rep
}

/// Serializes a scenario in the same schema [`parse_scenario`] reads.
pub fn emit_scenario(file: &ScenarioFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(file)?)
}

/// CLI overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub no_disturbance: bool,
}

impl Overrides {
    pub fn apply(&self, file: &mut ScenarioFile) {
        if let Some(dt) = self.dt {
            file.sim.dt = dt;
        }
        if let Some(d) = self.duration {
            file.sim.duration = d;
        }
        if self.no_disturbance {
            file.sim.disturbance_enabled = false;
        }
    }
}

/// Outcome classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    ParseFailure,
    ValidationFailure,
    NumericAbort,
    TargetMiss,
    IoFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::IoFailure => 1,
            Outcome::ParseFailure => 2,
            Outcome::ValidationFailure => 3,
            Outcome::NumericAbort => 4,
            Outcome::TargetMiss => 5,
        }
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Json(_) => Outcome::ParseFailure,
            Error::Validation(_)
            | Error::InvalidInput(_)
            | Error::InvalidParameter(_)
            | Error::InvalidState(_)
            | Error::UnknownPreset(_) => Outcome::ValidationFailure,
            Error::NonFinite { .. } => Outcome::NumericAbort,
            Error::Io(_) => Outcome::IoFailure,
        }
    }
}

/// One controller run of one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub summary: RunSummary,
    pub target_misses: Vec<String>,
}

impl RunReport {
    pub fn outcome(&self) -> Outcome {
        if self.summary.constraint_violated || !self.target_misses.is_empty() {
            Outcome::TargetMiss
        } else {
            Outcome::Ok
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub proposed: RunSummary,
    pub benchmark: RunSummary,
    pub proposed_terminal_error_deg: f64,
    pub benchmark_terminal_error_deg: f64,
    pub proposed_better: bool,
}

impl Comparison {
    pub fn new(scenario: &str, proposed: &RunSummary, benchmark: &RunSummary) -> Self {
        Self {
            scenario: scenario.to_string(),
            proposed: proposed.clone(),
            benchmark: benchmark.clone(),
            proposed_terminal_error_deg: proposed.terminal_error_deg,
            benchmark_terminal_error_deg: benchmark.terminal_error_deg,
            proposed_better: proposed.terminal_error_deg < benchmark.terminal_error_deg,
        }
    }
}

/// Everything one `run` produced for a single scenario.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub warnings: Vec<String>,
    pub rules: ValidationReport,
    pub runs: Vec<RunReport>,
    pub comparison: Option<Comparison>,
    pub outcome: Outcome,
}

fn write_run(dir: &Path, out: &RunOutput, n_obstacles: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv = fs::File::create(dir.join("trajectory.csv"))?;
    write_trajectory_csv(&out.records, n_obstacles, std::io::BufWriter::new(csv))?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    Ok(())
}

/// Validates and runs one scenario, writing artifacts under `out`.
///
/// Layout: `out/trajectory.csv` and `out/summary.json` for a single run;
/// with a comparison, one subdirectory per controller plus
/// `out/comparison.json`.
pub fn run_file(loaded: Loaded, compare: bool, out: Option<&Path>) -> Result<ScenarioResult> {
    let Loaded { file, warnings } = loaded;
    let built = build(&file)?;
    let rules = check_rules(&file, &built);
    if !rules.passed() {
        let msgs = rules.failures().map(|c| format!("{}: {}", c.rule, c.detail)).collect();
        return Err(Error::Validation(msgs));
    }

    let modes = if compare || file.compare {
        vec![ControllerMode::Proposed, ControllerMode::BenchmarkApf]
    } else {
        vec![file.controller_mode]
    };
    let n_obs = built.scenario.obstacles.len();
    let mut runs = Vec::new();
    for mode in &modes {
        let sim = SimConfig { controller_mode: *mode, ..built.sim };
        let output = run_scenario(&built.scenario, &sim)?;
        if let Some(dir) = out {
            let dir: PathBuf = if modes.len() > 1 { dir.join(mode_dir(*mode)) } else { dir.to_path_buf() };
            write_run(&dir, &output, n_obs)?;
        }
        runs.push(RunReport {
            scenario: file.name.clone(),
            target_misses: file.targets.misses(&output.summary),
            summary: output.summary,
        });
    }

    let comparison = (runs.len() == 2).then(|| Comparison::new(&file.name, &runs[0].summary, &runs[1].summary));
    if let (Some(c), Some(dir)) = (&comparison, out) {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(c)?)?;
    }
    // With a comparison, only the proposed controller is held to the targets.
    let outcome = runs[0].outcome();
    Ok(ScenarioResult { name: file.name, warnings, rules, runs, comparison, outcome })
}

fn mode_dir(mode: ControllerMode) -> &'static str {
    match mode {
        ControllerMode::Proposed => "proposed",
        ControllerMode::BenchmarkApf => "benchmark",
    }
}

/// Runs every preset in parallel, each into `out/<preset>/`.
pub fn run_all_presets(
    overrides: Overrides,
    compare: bool,
    out: Option<&Path>,
) -> Vec<(String, Result<ScenarioResult>)> {
    PRESETS
        .par_iter()
        .map(|p| {
            let res = preset(p.name).and_then(|mut f| {
                overrides.apply(&mut f);
                let loaded = normalize(f)?;
                let dir = out.map(|d| d.join(p.name));
                run_file(loaded, compare, dir.as_deref())
            });
            (p.name.to_string(), res)
        })
        .collect()
}
