//! Coupled integration of the 14-dimensional closed-loop state.
//! The disturbance model and the run monitors live here too.
//!
//! The controller is re-evaluated from the sub-stage state at every RK4
//! stage; nothing is held across stages.

use std::io::Write;

use nalgebra::{SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::attitude::{
    angle_between, dynamics_rhs, pointing_error, quaternion_rate, reduced_error_rate, BodyState, SpacecraftParams,
    UnitQuaternion, Vec3,
};
use crate::controller::{
    benchmark_apf_law, benchmark_virtual_law, td_rhs, torque_law, virtual_law, ControllerConfig, GuidanceInputs,
    Obstacle, ObstacleView, TdState,
};
use crate::envelope::{blf_value, effective_switches_per_obstacle, sppf_rhs, EnvelopeConfig, EnvelopeState};
use crate::error::{Error, Result};
use crate::field::total_potential;
use crate::integrator::Integrator;

/// Pointing error under which a run counts as settled, degrees.
pub const SETTLE_THRESHOLD_DEG: f64 = 1.0;
/// Start of the window over which the terminal error is taken, seconds.
pub const TERMINAL_AFTER_S: f64 = 80.0;
/// Frequency of the periodic disturbance terms, rad/s.
pub const DISTURBANCE_FREQ: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    #[default]
    Proposed,
    BenchmarkApf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default = "yes")]
    pub disturbance_enabled: bool,
    #[serde(default)]
    pub controller_mode: ControllerMode,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            duration: 120.0,
            integrator: Integrator::Rk4,
            record_stride: 1,
            disturbance_enabled: true,
            controller_mode: ControllerMode::Proposed,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "duration must be >= dt, got {} < {}",
                self.duration, self.dt
            )));
        }
        if self.record_stride < 1 {
            return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// A fully built, validated scenario ready to integrate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: SpacecraftParams,
    pub initial: BodyState,
    /// Sensor boresight, body frame.
    pub boresight: Vec3,
    /// Desired pointing direction, inertial frame.
    pub goal: Vec3,
    pub obstacles: Vec<Obstacle>,
    pub envelope: EnvelopeConfig,
    pub controller: ControllerConfig,
}

impl Scenario {
    pub fn initial_pointing_error(&self) -> f64 {
        let r_b = self.initial.attitude.attitude_matrix() * self.goal;
        pointing_error(&self.boresight, &r_b)
    }

    /// Initial coupled state: envelope at `rho_0`, differentiator settled on
    /// the initial virtual command.
    pub fn initial_state(&self, mode: ControllerMode) -> FullState {
        let mut s = FullState {
            body: self.initial,
            rho: self.envelope.rho_0,
            td: TdState::default(),
        };
        let v = evaluate_command(self, mode, &s.pack());
        s.td = TdState::settled_on(v);
        s
    }
}

/// Body-frame disturbance torque, N·m.
pub fn disturbance(t: f64) -> Vec3 {
    let w = DISTURBANCE_FREQ;
    Vec3::new(
        4.0 * (3.0 * w * t).sin() + 3.0 * (10.0 * w * t).cos() - 40.0,
        -1.5 * (2.0 * w * t).sin() + 3.0 * (5.0 * w * t).cos() + 45.0,
        3.0 * (10.0 * w * t).sin() - 8.0 * (4.0 * w * t).cos() + 40.0,
    ) * 1e-3
}

pub type PackedState = SVector<f64, 14>;

const FIELD_NAMES: [&str; 14] = [
    "attitude.x",
    "attitude.y",
    "attitude.z",
    "attitude.w",
    "omega.x",
    "omega.y",
    "omega.z",
    "rho",
    "td.x1.x",
    "td.x1.y",
    "td.x1.z",
    "td.x2.x",
    "td.x2.y",
    "td.x2.z",
];

/// Concatenated `[q, ω, ρ, x₁, x₂]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullState {
    pub body: BodyState,
    pub rho: f64,
    pub td: TdState,
}

impl FullState {
    pub fn pack(&self) -> PackedState {
        let q = self.body.attitude.coords();
        let mut p = PackedState::zeros();
        p.fixed_rows_mut::<4>(0).copy_from(&q);
        p.fixed_rows_mut::<3>(4).copy_from(&self.body.omega);
        p[7] = self.rho;
        p.fixed_rows_mut::<3>(8).copy_from(&self.td.x1);
        p.fixed_rows_mut::<3>(11).copy_from(&self.td.x2);
        p
    }

    /// Unpacks and renormalizes the quaternion.
    pub fn unpack(p: &PackedState) -> Result<Self> {
        Ok(Self {
            body: BodyState {
                attitude: UnitQuaternion::from_vector(&p.fixed_rows::<4>(0).into_owned())?,
                omega: p.fixed_rows::<3>(4).into_owned(),
            },
            rho: p[7],
            td: TdState { x1: p.fixed_rows::<3>(8).into_owned(), x2: p.fixed_rows::<3>(11).into_owned() },
        })
    }
}

fn check_finite(p: &PackedState, t: f64) -> Result<()> {
    match p.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite { field: FIELD_NAMES[i].to_string(), t }),
        None => Ok(()),
    }
}

/// Every intermediate quantity of one right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub x_e: f64,
    pub x_e_dot: f64,
    pub betas: Vec<f64>,
    pub clearance: Vec<f64>,
    pub omega_s: f64,
    pub omega_v: f64,
    pub rho: f64,
    pub eps: f64,
    pub command: Vec3,
    pub e2: Vec3,
    pub torque: Vec3,
    pub disturbance: Vec3,
    pub potential: f64,
    pub v_q: f64,
    pub v_omega: f64,
    pub td_error: f64,
    pub rate: PackedState,
}

struct Geometry {
    q: UnitQuaternion,
    omega: Vec3,
    goal_b: Vec3,
    f_b: Vec<Vec3>,
    betas: Vec<f64>,
}

fn geometry(scn: &Scenario, p: &PackedState) -> Result<Geometry> {
    let q = UnitQuaternion::from_vector(&p.fixed_rows::<4>(0).into_owned())?;
    let a = q.attitude_matrix();
    let f_b: Vec<Vec3> = scn.obstacles.iter().map(|o| a * o.cone.direction()).collect();
    let betas = f_b.iter().map(|f| scn.boresight.dot(f)).collect();
    Ok(Geometry { q, omega: p.fixed_rows::<3>(4).into_owned(), goal_b: a * scn.goal, f_b, betas })
}

fn views<'a>(scn: &'a Scenario, g: &Geometry) -> Vec<ObstacleView<'a>> {
    scn.obstacles
        .iter()
        .zip(g.f_b.iter().zip(&g.betas))
        .map(|(o, (f, b))| ObstacleView { cone: &o.cone, f_b: *f, beta: *b })
        .collect()
}

fn evaluate_command(scn: &Scenario, mode: ControllerMode, p: &PackedState) -> Vec3 {
    let g = match geometry(scn, p) {
        Ok(g) => g,
        Err(_) => return Vec3::zeros(),
    };
    let obs = views(scn, &g);
    let x_e = pointing_error(&scn.boresight, &g.goal_b);
    let (_, om_v) = effective_switches_per_obstacle(scn.obstacles.iter().map(|o| &o.switches).zip(g.betas.iter().copied()));
    match mode {
        ControllerMode::Proposed => {
            let eps = x_e / p[7];
            virtual_law(&scn.boresight, &g.goal_b, &obs, eps, p[7], om_v, &scn.controller)
        }
        ControllerMode::BenchmarkApf => benchmark_virtual_law(&scn.boresight, &g.goal_b, &obs, &scn.controller),
    }
}

/// Evaluates the controller and the dynamics at one packed state.
pub fn evaluate(scn: &Scenario, sim: &SimConfig, t: f64, p: &PackedState) -> Result<Evaluation> {
    check_finite(p, t)?;
    let g = geometry(scn, p)?;
    let obs = views(scn, &g);
    let rho = p[7];
    let td = TdState { x1: p.fixed_rows::<3>(8).into_owned(), x2: p.fixed_rows::<3>(11).into_owned() };
    let body = BodyState { attitude: g.q, omega: g.omega };

    let x_e = pointing_error(&scn.boresight, &g.goal_b);
    let x_e_dot = reduced_error_rate(&scn.boresight, &g.goal_b, &g.omega);
    let (om_s, om_v) =
        effective_switches_per_obstacle(scn.obstacles.iter().map(|o| &o.switches).zip(g.betas.iter().copied()));
    let env = EnvelopeState::new(x_e, rho).map_err(|_| Error::NonFinite { field: "rho".into(), t })?;
    let cfg = &scn.controller;

    let (command, torque) = match sim.controller_mode {
        ControllerMode::Proposed => {
            let v = virtual_law(&scn.boresight, &g.goal_b, &obs, env.epsilon, rho, om_v, cfg);
            let inp = GuidanceInputs {
                state: &body,
                boresight: &scn.boresight,
                goal_b: &g.goal_b,
                obstacles: &obs,
                eps_q: env.epsilon,
                rho_q: rho,
                omega_s: om_s,
                omega_v: om_v,
            };
            let e2 = g.omega - v;
            (v, torque_law(&inp, &e2, &td.x2, &scn.params, cfg))
        }
        ControllerMode::BenchmarkApf => {
            let v = benchmark_virtual_law(&scn.boresight, &g.goal_b, &obs, cfg);
            let e2 = g.omega - v;
            (v, benchmark_apf_law(&body, &scn.boresight, &g.goal_b, &obs, &e2, &td.x2, &scn.params, cfg))
        }
    };
    let e2 = g.omega - command;
    let dist = if sim.disturbance_enabled { disturbance(t) } else { Vec3::zeros() };

    let q_raw: Vector4<f64> = p.fixed_rows::<4>(0).into_owned();
    // Kinematics act on the raw coordinates so the stage arithmetic stays linear.
    let q_dot = quaternion_rate(&q_raw, &g.omega);
    let omega_dot = dynamics_rhs(&body, &torque, &dist, &scn.params);
    let rho_dot = sppf_rhs(&env, &scn.envelope, om_s, x_e, x_e_dot);
    let td_dot = td_rhs(&td, &command, &cfg.td);

    let mut rate = PackedState::zeros();
    rate.fixed_rows_mut::<4>(0).copy_from(&q_dot);
    rate.fixed_rows_mut::<3>(4).copy_from(&omega_dot);
    rate[7] = rho_dot;
    rate.fixed_rows_mut::<3>(8).copy_from(&td_dot.x1);
    rate.fixed_rows_mut::<3>(11).copy_from(&td_dot.x2);

    let pairs: Vec<_> = scn.obstacles.iter().map(|o| &o.cone).zip(g.betas.iter().copied()).collect();
    let potential = total_potential(x_e, cfg.k_a, &pairs);
    let v_q = match sim.controller_mode {
        ControllerMode::Proposed => blf_value(env.epsilon, cfg.g, cfg.f) + potential,
        ControllerMode::BenchmarkApf => potential,
    };
    let v_omega = 0.5 * e2.dot(&(scn.params.inertia() * e2));
    let clearance = g.f_b.iter().map(|f| angle_between(&scn.boresight, f)).collect();

    Ok(Evaluation {
        x_e,
        x_e_dot,
        betas: g.betas,
        clearance,
        omega_s: om_s,
        omega_v: om_v,
        rho,
        eps: env.epsilon,
        command,
        e2,
        torque,
        disturbance: dist,
        potential,
        v_q,
        v_omega,
        td_error: (td.x1 - command).norm(),
        rate,
    })
}

/// Right-hand side of the coupled system.
pub fn coupled_rhs(scn: &Scenario, sim: &SimConfig, t: f64, p: &PackedState) -> Result<PackedState> {
    Ok(evaluate(scn, sim, t, p)?.rate)
}

/// One logged row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub x_e: f64,
    pub pointing_angle_deg: f64,
    pub betas: Vec<f64>,
    pub rho_q: f64,
    pub eps_q: f64,
    pub omega_s_eff: f64,
    pub omega_v_eff: f64,
    pub omega_body: [f64; 3],
    pub torque: [f64; 3],
    pub v_q: f64,
    pub v_omega: f64,
    pub td_error: f64,
}

impl TrajectoryRecord {
    fn from_eval(t: f64, omega: &Vec3, e: &Evaluation) -> Self {
        Self {
            t,
            x_e: e.x_e,
            pointing_angle_deg: pointing_angle_deg(e.x_e),
            betas: e.betas.clone(),
            rho_q: e.rho,
            eps_q: e.eps,
            omega_s_eff: e.omega_s,
            omega_v_eff: e.omega_v,
            omega_body: (*omega).into(),
            torque: e.torque.into(),
            v_q: e.v_q,
            v_omega: e.v_omega,
            td_error: e.td_error,
        }
    }

    fn is_finite(&self) -> bool {
        [self.t, self.x_e, self.pointing_angle_deg, self.rho_q, self.eps_q, self.omega_s_eff, self.omega_v_eff]
            .iter()
            .chain(&self.betas)
            .chain(&self.omega_body)
            .chain(&self.torque)
            .chain([self.v_q, self.v_omega, self.td_error].iter())
            .all(|v| v.is_finite())
    }
}

/// Pointing angle in degrees from `x_e = 1 − cos θ`, accurate for small θ.
pub fn pointing_angle_deg(x_e: f64) -> f64 {
    // 1 − cos θ = 2 sin²(θ/2)
    (2.0 * (0.5 * x_e).sqrt().min(1.0).asin()).to_degrees()
}

/// A stretch of consecutive steps with `Ω_s = 1` at both ends of every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezeSegment {
    pub start: f64,
    pub end: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Sum of `|Δε|` over the segment's steps.
    pub eps_variation: f64,
}

impl FreezeSegment {
    /// Variation of `ε` per simulated second.
    pub fn drift_rate(&self) -> f64 {
        let d = self.end - self.start;
        if d > 0.0 { self.eps_variation / d } else { 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovDiagnostics {
    /// Samples considered: after `skip_until` and outside the terminal ball.
    pub samples: usize,
    pub increasing: usize,
    pub increasing_fraction: f64,
    pub max_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub controller_mode: ControllerMode,
    pub steps: usize,
    pub final_time: f64,
    pub min_clearance_deg: Vec<f64>,
    pub forbidden_half_angle_deg: Vec<f64>,
    pub constraint_violated: bool,
    pub settling_time_s: Option<f64>,
    pub terminal_window_start_s: f64,
    pub terminal_error_deg: f64,
    pub final_error_deg: f64,
    pub max_abs_eps_ppc: f64,
    pub max_abs_eps_outside_switch: f64,
    pub saturation_fraction: f64,
    pub max_abs_torque: f64,
    pub max_quat_norm_error: f64,
    pub max_step_quat_drift: f64,
    pub freeze_segments: Vec<FreezeSegment>,
    pub lyapunov: LyapunovDiagnostics,
}

impl RunSummary {
    pub fn max_freeze_drift_rate(&self) -> f64 {
        self.freeze_segments.iter().map(FreezeSegment::drift_rate).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub summary: RunSummary,
    pub final_state: FullState,
}

/// Finite-difference Lyapunov check over logged rows. Rows before
/// `skip_until` or with pointing angle inside `ball_deg` are ignored.
pub fn lyapunov_monitor(records: &[TrajectoryRecord], ball_deg: f64, skip_until: f64, tol: f64) -> LyapunovDiagnostics {
    let mut samples = 0;
    let mut increasing = 0;
    let mut max_rate = f64::NEG_INFINITY;
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.t < skip_until || a.pointing_angle_deg <= ball_deg {
            continue;
        }
        let rate = ((b.v_q + b.v_omega) - (a.v_q + a.v_omega)) / (b.t - a.t);
        samples += 1;
        max_rate = max_rate.max(rate);
        if rate > tol {
            increasing += 1;
        }
    }
    LyapunovDiagnostics {
        samples,
        increasing,
        increasing_fraction: if samples > 0 { increasing as f64 / samples as f64 } else { 0.0 },
        max_rate: if samples > 0 { max_rate } else { 0.0 },
    }
}

/// Integrates one scenario. Constraint violations are recorded in the
/// summary; only a non-finite state aborts.
pub fn run_scenario(scn: &Scenario, sim: &SimConfig) -> Result<RunOutput> {
    sim.validate()?;
    let n = sim.steps();
    let mut p = scn.initial_state(sim.controller_mode).pack();
    let mut records = Vec::with_capacity(n / sim.record_stride + 2);

    let n_obs = scn.obstacles.len();
    let mut min_clear = vec![f64::INFINITY; n_obs];
    let mut last_unsettled: Option<f64> = None;
    let window_start = TERMINAL_AFTER_S.min(n as f64 * sim.dt);
    let mut terminal = 0.0f64;
    let mut max_eps_ppc = 0.0f64;
    let mut max_eps_outside = 0.0f64;
    let mut saturated = 0usize;
    let mut max_torque = 0.0f64;
    let mut max_norm_err = 0.0f64;
    let mut max_step_drift = 0.0f64;
    let mut segments: Vec<FreezeSegment> = Vec::new();
    let mut open: Option<FreezeSegment> = None;
    let mut prev: Option<(f64, f64, f64)> = None; // (t, eps, omega_s)
    let limit = scn.params.torque_limit();

    for k in 0..=n {
        let t = k as f64 * sim.dt;
        let e = evaluate(scn, sim, t, &p)?;
        let angle = pointing_angle_deg(e.x_e);

        for (m, c) in min_clear.iter_mut().zip(&e.clearance) {
            *m = m.min(*c);
        }
        if angle >= SETTLE_THRESHOLD_DEG {
            last_unsettled = Some(t);
        }
        if t >= window_start - 1e-9 {
            terminal = terminal.max(angle);
        }
        if e.omega_s == 0.0 {
            max_eps_ppc = max_eps_ppc.max(e.eps.abs());
        }
        if e.omega_s < 0.5 {
            max_eps_outside = max_eps_outside.max(e.eps.abs());
        }
        if k < n {
            if e.torque.iter().any(|c| c.abs() >= limit) {
                saturated += 1;
            }
            max_torque = max_torque.max(e.torque.amax());
        }

        if let Some((pt, peps, pom)) = prev {
            if pom == 1.0 && e.omega_s == 1.0 {
                let seg = open.get_or_insert(FreezeSegment {
                    start: pt,
                    end: pt,
                    eps_start: peps,
                    eps_end: peps,
                    eps_variation: 0.0,
                });
                seg.end = t;
                seg.eps_end = e.eps;
                seg.eps_variation += (e.eps - peps).abs();
            } else if let Some(seg) = open.take() {
                segments.push(seg);
            }
        }
        prev = Some((t, e.eps, e.omega_s));

        if k % sim.record_stride == 0 || k == n {
            let rec = TrajectoryRecord::from_eval(t, &p.fixed_rows::<3>(4).into_owned(), &e);
            if !rec.is_finite() {
                return Err(Error::NonFinite { field: "trajectory record".into(), t });
            }
            records.push(rec);
        }
        if k == n {
            break;
        }

        let next = sim.integrator.step(&p, t, sim.dt, |tt, y| coupled_rhs(scn, sim, tt, y))?;
        check_finite(&next, t + sim.dt)?;
        let qn = next.fixed_rows::<4>(0).norm();
        max_step_drift = max_step_drift.max((qn - 1.0).abs());
        p = next;
        let q = p.fixed_rows::<4>(0) / qn;
        p.fixed_rows_mut::<4>(0).copy_from(&q);
        max_norm_err = max_norm_err.max((p.fixed_rows::<4>(0).norm() - 1.0).abs());
    }
    if let Some(seg) = open.take() {
        segments.push(seg);
    }

    let final_state = FullState::unpack(&p)?;
    let last = records.last().expect("at least one record");
    let settling_time_s = match last_unsettled {
        None => Some(0.0),
        Some(t) if t + sim.dt <= n as f64 * sim.dt + 1e-9 && t < n as f64 * sim.dt - 1e-9 => Some(t + sim.dt),
        Some(_) => None,
    };
    let min_clearance_deg: Vec<f64> = min_clear.iter().map(|c| c.to_degrees()).collect();
    let forbidden: Vec<f64> = scn.obstacles.iter().map(|o| o.cone.theta_f().to_degrees()).collect();
    let constraint_violated = scn
        .obstacles
        .iter()
        .zip(&min_clear)
        .any(|(o, c)| *c < o.cone.theta_f());

    let summary = RunSummary {
        controller_mode: sim.controller_mode,
        steps: n,
        final_time: n as f64 * sim.dt,
        min_clearance_deg,
        forbidden_half_angle_deg: forbidden,
        constraint_violated,
        settling_time_s,
        terminal_window_start_s: window_start,
        terminal_error_deg: terminal,
        final_error_deg: last.pointing_angle_deg,
        max_abs_eps_ppc: max_eps_ppc,
        max_abs_eps_outside_switch: max_eps_outside,
        saturation_fraction: saturated as f64 / n.max(1) as f64,
        max_abs_torque: max_torque,
        max_quat_norm_error: max_norm_err,
        max_step_quat_drift: max_step_drift,
        freeze_segments: segments,
        lyapunov: lyapunov_monitor(&records, SETTLE_THRESHOLD_DEG * 0.1, 1.0, 1e-6),
    };
    Ok(RunOutput { records, summary, final_state })
}

/// CSV header for `n_obstacles` cones, in record field order.
pub fn csv_header(n_obstacles: usize) -> String {
    let mut cols = vec!["t".to_string(), "x_e".into(), "pointing_angle_deg".into()];
    cols.extend((1..=n_obstacles).map(|i| format!("beta_{i}")));
    for c in [
        "rho_q",
        "eps_q",
        "omega_s_eff",
        "omega_v_eff",
        "omega_x",
        "omega_y",
        "omega_z",
        "torque_x",
        "torque_y",
        "torque_z",
        "v_q",
        "v_omega",
        "td_error",
    ] {
        cols.push(c.into());
    }
    cols.join(",")
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the trajectory log: fixed header, 17 significant digits per float.
pub fn write_trajectory_csv<W: Write>(records: &[TrajectoryRecord], n_obstacles: usize, mut w: W) -> Result<()> {
    writeln!(w, "{}", csv_header(n_obstacles))?;
    for r in records {
        let mut row = vec![fmt(r.t), fmt(r.x_e), fmt(r.pointing_angle_deg)];
        row.extend(r.betas.iter().map(|b| fmt(*b)));
        row.extend([r.rho_q, r.eps_q, r.omega_s_eff, r.omega_v_eff].map(fmt));
        row.extend(r.omega_body.map(fmt));
        row.extend(r.torque.map(fmt));
        row.extend([r.v_q, r.v_omega, r.td_error].map(fmt));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::Mat3;
    use crate::controller::{RateGain, TdConfig};
    use crate::envelope::SwitchConfig;
    use crate::field::ObstacleCone;

    fn controller() -> ControllerConfig {
        ControllerConfig {
            k1: 0.3,
            k_p: 0.02,
            k_omega: RateGain::Scalar(100.0),
            g: 1.0,
            f: 1.0,
            k_a: 1.0,
            eta: 1e-4,
            sigma: 1e-6,
            td: TdConfig { r: 20.0, a1: 1.0, a2: 2.0 },
        }
    }

    fn obstacle(f: Vec3) -> Obstacle {
        let cone = ObstacleCone::new(f.normalize(), 20f64.to_radians(), 35f64.to_radians(), 25f64.to_radians(), 0.003, 0.05)
            .unwrap();
        let switches = SwitchConfig::from_cone(&cone, cone.l1(), 0.01, 5.0, 2.0).unwrap();
        Obstacle { cone, switches }
    }

    fn scenario(obstacles: Vec<Obstacle>) -> Scenario {
        Scenario {
            params: SpacecraftParams::new(Mat3::from_diagonal(&Vec3::new(5.08, 5.14, 5.0)), 0.5, 0.1).unwrap(),
            initial: BodyState::at_rest(UnitQuaternion::identity()),
            boresight: Vec3::z(),
            goal: Vec3::new(-0.866, 0.5, 0.0).normalize(),
            obstacles,
            envelope: EnvelopeConfig::new(3.0, 1e-3, 0.1).unwrap(),
            controller: controller(),
        }
    }

    fn single() -> Scenario {
        scenario(vec![obstacle(Vec3::new(0.5145, 0.8575, 0.0))])
    }

    #[test]
    fn disturbance_at_zero() {
        let d = disturbance(0.0);
        for (a, b) in d.iter().zip([-0.037, 0.048, 0.032]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn disturbance_axis_one_bound() {
        for k in 0..20_000 {
            let d = disturbance(k as f64 * 0.37);
            assert!(d.x.abs() <= 0.047 + 1e-15);
        }
    }

    #[test]
    fn disabled_disturbance_is_zero() {
        let scn = single();
        let sim = SimConfig { disturbance_enabled: false, ..SimConfig::default() };
        let p = scn.initial_state(sim.controller_mode).pack();
        assert_eq!(evaluate(&scn, &sim, 3.0, &p).unwrap().disturbance, Vec3::zeros());
    }

    #[test]
    fn pack_round_trip() {
        let s = FullState {
            body: BodyState {
                attitude: UnitQuaternion::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 0.7).unwrap(),
                omega: Vec3::new(0.1, -0.2, 0.3),
            },
            rho: 1.5,
            td: TdState { x1: Vec3::new(1.0, 2.0, 3.0), x2: Vec3::new(4.0, 5.0, 6.0) },
        };
        let back = FullState::unpack(&s.pack()).unwrap();
        assert_eq!(back.rho, s.rho);
        assert_eq!(back.td, s.td);
        assert_eq!(back.body.omega, s.body.omega);
        assert!((back.body.attitude.coords() - s.body.attitude.coords()).norm() < 1e-15);
    }

    #[test]
    fn equilibrium_rates_vanish() {
        // Body already pointing at the goal.
        let mut scn = single();
        let axis = Vec3::z().cross(&scn.goal);
        let angle = angle_between(&Vec3::z(), &scn.goal);
        scn.initial = BodyState::at_rest(UnitQuaternion::from_axis_angle(&axis, angle).unwrap());
        let sim = SimConfig { disturbance_enabled: false, ..SimConfig::default() };
        let mut s = scn.initial_state(sim.controller_mode);
        s.rho = scn.envelope.rho_inf;
        let e = evaluate(&scn, &sim, 0.0, &s.pack()).unwrap();
        assert!(e.x_e < 1e-15);
        assert!(e.rate.amax() < 1e-9, "{:?}", e.rate);
    }

    #[test]
    fn quaternion_rate_matches_reduced_error_rate() {
        let scn = single();
        let sim = SimConfig::default();
        let mut s = scn.initial_state(sim.controller_mode);
        s.body.attitude = UnitQuaternion::from_axis_angle(&Vec3::new(0.3, -1.0, 0.2), 0.6).unwrap();
        s.body.omega = Vec3::new(0.02, -0.05, 0.01);
        let p = s.pack();
        let e = evaluate(&scn, &sim, 0.0, &p).unwrap();
        let x_e_at = |h: f64| {
            let q = UnitQuaternion::from_vector(&(p.fixed_rows::<4>(0) + e.rate.fixed_rows::<4>(0) * h)).unwrap();
            pointing_error(&scn.boresight, &(q.attitude_matrix() * scn.goal))
        };
        let h = 1e-5;
        let fd = (x_e_at(h) - x_e_at(-h)) / (2.0 * h);
        assert!((fd - e.x_e_dot).abs() < 1e-8, "{fd} vs {}", e.x_e_dot);
    }

    #[test]
    fn non_finite_state_names_the_field() {
        let scn = single();
        let sim = SimConfig::default();
        let mut p = scn.initial_state(sim.controller_mode).pack();
        p[5] = f64::NAN;
        match coupled_rhs(&scn, &sim, 2.5, &p) {
            Err(Error::NonFinite { field, t }) => {
                assert_eq!(field, "omega.y");
                assert_eq!(t, 2.5);
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn mode_two_freezes_epsilon() {
        // Boresight pointed inside V1 of an obstacle placed 30° away.
        let mut scn = single();
        let f = Vec3::new(30f64.to_radians().sin(), 0.0, 30f64.to_radians().cos());
        scn.obstacles = vec![obstacle(f)];
        let sim = SimConfig::default();
        let mut s = scn.initial_state(sim.controller_mode);
        s.body.omega = Vec3::new(0.01, -0.03, 0.02);
        s.rho = 1.7;
        let p = s.pack();
        let e = evaluate(&scn, &sim, 0.0, &p).unwrap();
        assert_eq!(e.omega_s, 1.0);
        let eps_dot = (e.x_e_dot * e.rho - e.x_e * e.rate[7]) / (e.rho * e.rho);
        assert!(eps_dot.abs() < 1e-12, "{eps_dot}");
    }

    #[test]
    fn settled_start_without_obstacles_stays_put() {
        let mut scn = scenario(Vec::new());
        scn.boresight = scn.goal;
        let sim = SimConfig { duration: 20.0, ..SimConfig::default() };
        let out = run_scenario(&scn, &sim).unwrap();
        let worst = out.records.iter().map(|r| r.pointing_angle_deg).fold(0.0, f64::max);
        assert!(worst < 0.1, "{worst}");
        // Torque is the disturbance rejection alone, well inside the limit.
        assert_eq!(out.summary.saturation_fraction, 0.0);
        assert!(out.summary.max_abs_torque < 0.06);
    }

    #[test]
    fn mode_one_envelope_follows_closed_form() {
        let scn = single();
        let out = run_scenario(&scn, &SimConfig { duration: 50.0, ..SimConfig::default() }).unwrap();
        for t in [1.0, 10.0, 50.0] {
            let r = out.records.iter().find(|r| (r.t - t).abs() < 1e-9).unwrap();
            assert_eq!(r.omega_s_eff, 0.0);
            assert!((r.rho_q - scn.envelope.decay_at(t)).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn runs_are_bit_identical() {
        let scn = single();
        let sim = SimConfig { duration: 30.0, ..SimConfig::default() };
        let a = run_scenario(&scn, &sim).unwrap();
        let b = run_scenario(&scn, &sim).unwrap();
        assert_eq!(a.records, b.records);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_trajectory_csv(&a.records, 1, &mut ca).unwrap();
        write_trajectory_csv(&b.records, 1, &mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn record_stride_thins_the_log() {
        let scn = single();
        let sim = SimConfig { duration: 1.0, record_stride: 10, ..SimConfig::default() };
        let out = run_scenario(&scn, &sim).unwrap();
        let ts: Vec<f64> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts.len(), 11);
        assert!((ts[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { duration: 0.001, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { record_stride: 0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
    }

    #[test]
    fn csv_layout() {
        assert_eq!(
            csv_header(2),
            "t,x_e,pointing_angle_deg,beta_1,beta_2,rho_q,eps_q,omega_s_eff,omega_v_eff,omega_x,omega_y,omega_z,\
             torque_x,torque_y,torque_z,v_q,v_omega,td_error"
        );
        let rec = TrajectoryRecord {
            t: 0.1,
            x_e: 1.0 / 3.0,
            pointing_angle_deg: 0.0,
            betas: vec![0.5, -0.25],
            rho_q: 1.0,
            eps_q: 0.0,
            omega_s_eff: 0.0,
            omega_v_eff: 0.0,
            omega_body: [0.0; 3],
            torque: [0.0; 3],
            v_q: 0.0,
            v_omega: 0.0,
            td_error: 0.0,
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&[rec], 2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 18);
        assert_eq!(row[0], "1.0000000000000001e-1");
        assert_eq!(row[1], "3.3333333333333331e-1");
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn pointing_angle_small_and_large() {
        assert!((pointing_angle_deg(0.0)).abs() < 1e-15);
        assert!((pointing_angle_deg(1.0) - 90.0).abs() < 1e-12);
        assert!((pointing_angle_deg(2.0) - 180.0).abs() < 1e-12);
        let th = 1e-4f64;
        assert!((pointing_angle_deg(1.0 - th.cos()) - th.to_degrees()).abs() < 1e-8);
    }

    #[test]
    fn lyapunov_monitor_counts_increases() {
        let mk = |t: f64, v: f64| TrajectoryRecord {
            t,
            x_e: 0.5,
            pointing_angle_deg: 60.0,
            betas: vec![],
            rho_q: 1.0,
            eps_q: 0.5,
            omega_s_eff: 0.0,
            omega_v_eff: 0.0,
            omega_body: [0.0; 3],
            torque: [0.0; 3],
            v_q: v,
            v_omega: 0.0,
            td_error: 0.0,
        };
        let recs = vec![mk(0.0, 1.0), mk(1.0, 0.5), mk(2.0, 0.7), mk(3.0, 0.1)];
        let d = lyapunov_monitor(&recs, 0.1, 0.0, 1e-6);
        assert_eq!(d.samples, 3);
        assert_eq!(d.increasing, 1);
        assert!((d.max_rate - 0.2).abs() < 1e-12);
    }
}
