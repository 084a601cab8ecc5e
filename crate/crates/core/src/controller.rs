//! Switching backstepping guidance.
//!
//! The virtual angular-velocity law gets its derivative from a tracking
//! differentiator. The torque law adds disturbance compensation and
//! saturation. Gain validation and the APF-only benchmark law sit alongside.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::attitude::{angle_between, BodyState, SpacecraftParams, Vec3};
use crate::envelope::{EnvelopeConfig, SwitchConfig};
use crate::error::{Error, Result};
use crate::field::{repulsion_grad_beta, ObstacleCone};
use crate::integrator::rk4_step;

/// Pointing error above which the boresight is treated as sitting on the
/// antipodal (unstable) equilibrium.
pub const ANTIPODAL_THRESHOLD: f64 = 2.0 - 1e-6;

/// Fraction of the torque limit used to kick the state off the antipode.
pub const ANTIPODAL_KICK_FRACTION: f64 = 0.1;

/// Rate-loop gain `K_ω`: uniform or per body axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateGain {
    Scalar(f64),
    Diagonal([f64; 3]),
}

impl RateGain {
    pub fn apply(&self, e: &Vec3) -> Vec3 {
        match *self {
            RateGain::Scalar(k) => e * k,
            RateGain::Diagonal(d) => Vec3::new(d[0] * e.x, d[1] * e.y, d[2] * e.z),
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            RateGain::Scalar(k) => k,
            RateGain::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdConfig {
    /// Speed factor `R`.
    pub r: f64,
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// PPC virtual gain `K_1`.
    pub k1: f64,
    /// APF virtual gain `K_p`.
    pub k_p: f64,
    pub k_omega: RateGain,
    pub g: f64,
    pub f: f64,
    pub k_a: f64,
    pub eta: f64,
    pub sigma: f64,
    pub td: TdConfig,
}

/// One keep-out cone with the switching knots derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub cone: ObstacleCone,
    pub switches: SwitchConfig,
}

/// An obstacle as seen from the current attitude.
#[derive(Debug, Clone, Copy)]
pub struct ObstacleView<'a> {
    pub cone: &'a ObstacleCone,
    /// Forbidden direction in the body frame.
    pub f_b: Vec3,
    /// `β = B·f_b`.
    pub beta: f64,
}

/// Everything the laws need about the current geometry and envelope.
#[derive(Debug, Clone, Copy)]
pub struct GuidanceInputs<'a> {
    pub state: &'a BodyState,
    pub boresight: &'a Vec3,
    pub goal_b: &'a Vec3,
    pub obstacles: &'a [ObstacleView<'a>],
    pub eps_q: f64,
    pub rho_q: f64,
    pub omega_s: f64,
    pub omega_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TdState {
    pub x1: Vec3,
    pub x2: Vec3,
}

impl Add for TdState {
    type Output = TdState;

    fn add(self, rhs: TdState) -> TdState {
        TdState { x1: self.x1 + rhs.x1, x2: self.x2 + rhs.x2 }
    }
}

impl Mul<f64> for TdState {
    type Output = TdState;

    fn mul(self, k: f64) -> TdState {
        TdState { x1: self.x1 * k, x2: self.x2 * k }
    }
}

impl TdState {
    /// Starts on the input with zero derivative.
    pub fn settled_on(input: Vec3) -> Self {
        Self { x1: input, x2: Vec3::zeros() }
    }
}

/// `ẋ₁ = x₂`, `ẋ₂ = −R² a₁ tanh(x₁ − u) − R² a₂ tanh(x₂/R)`.
pub fn td_rhs(state: &TdState, input: &Vec3, cfg: &TdConfig) -> TdState {
    let r2 = cfg.r * cfg.r;
    let pos = (state.x1 - input).map(f64::tanh);
    let vel = (state.x2 / cfg.r).map(f64::tanh);
    TdState { x1: state.x2, x2: -(pos * (r2 * cfg.a1)) - vel * (r2 * cfg.a2) }
}

/// One RK4 step of the differentiator with the input held over the step.
pub fn td_step(state: &TdState, input: &Vec3, dt: f64, cfg: &TdConfig) -> TdState {
    rk4_step(state, 0.0, dt, |_, s| Ok::<_, std::convert::Infallible>(td_rhs(s, input, cfg)))
        .unwrap_or_else(|e| match e {})
}

/// `P₁ = k_a r×B − Σ k_r∇_β f×B`, the gradient of the total potential with
/// respect to body rate (`U̇ = P₁·ω`).
pub fn apf_gradient(boresight: &Vec3, goal_b: &Vec3, obstacles: &[ObstacleView<'_>], k_a: f64) -> Vec3 {
    let mut p = goal_b.cross(boresight) * k_a;
    for o in obstacles {
        let g = repulsion_grad_beta(o.cone, o.beta);
        if g != 0.0 {
            p -= o.f_b.cross(boresight) * g;
        }
    }
    p
}

fn regularized_inverse(v: &Vec3, sigma: f64) -> Vec3 {
    v / (v.norm_squared() + sigma)
}

/// Virtual angular velocity: the PPC branch weighted by `1 − Ω_v` plus the
/// APF branch weighted by `Ω_v`.
pub fn virtual_law(
    boresight: &Vec3,
    goal_b: &Vec3,
    obstacles: &[ObstacleView<'_>],
    eps_q: f64,
    rho_q: f64,
    omega_v: f64,
    cfg: &ControllerConfig,
) -> Vec3 {
    let rxb = goal_b.cross(boresight);
    let mut v = Vec3::zeros();
    if omega_v < 1.0 {
        v += regularized_inverse(&rxb, cfg.sigma) * (-cfg.k1 * rho_q * eps_q * (1.0 - omega_v));
    }
    if omega_v > 0.0 {
        let p1 = apf_gradient(boresight, goal_b, obstacles, cfg.k_a);
        v -= regularized_inverse(&p1, cfg.sigma) * (omega_v * cfg.k_p);
    }
    v
}

/// Virtual law of the APF-only benchmark: the APF branch alone.
pub fn benchmark_virtual_law(
    boresight: &Vec3,
    goal_b: &Vec3,
    obstacles: &[ObstacleView<'_>],
    cfg: &ControllerConfig,
) -> Vec3 {
    let p1 = apf_gradient(boresight, goal_b, obstacles, cfg.k_a);
    -regularized_inverse(&p1, cfg.sigma) * cfg.k_p
}

fn saturate(u: Vec3, limit: f64) -> Vec3 {
    u.map(|c| c.clamp(-limit, limit))
}

/// Small torque about the body axis least aligned with the boresight,
/// applied only on the antipodal equilibrium.
pub fn antipodal_kick(boresight: &Vec3, goal_b: &Vec3, params: &SpacecraftParams) -> Vec3 {
    if 1.0 - boresight.dot(goal_b) <= ANTIPODAL_THRESHOLD {
        return Vec3::zeros();
    }
    let axis = boresight.iamin();
    let mut kick = Vec3::zeros();
    kick[axis] = ANTIPODAL_KICK_FRACTION * params.torque_limit();
    kick
}

/// Terms shared by both laws: gyroscopic cancellation, rate feedback,
/// tanh disturbance compensation and the differentiator feed-forward.
fn rate_loop(state: &BodyState, e2: &Vec3, sd_dot: &Vec3, params: &SpacecraftParams, cfg: &ControllerConfig) -> Vec3 {
    let j = params.inertia();
    let w = &state.omega;
    w.cross(&(j * w)) - cfg.k_omega.apply(e2) - (e2 / cfg.eta).map(f64::tanh) * params.disturbance_bound()
        + j * sd_dot
}

/// Saturated control torque of the switching controller. `e2 = ω − v`.
pub fn torque_law(
    inp: &GuidanceInputs<'_>,
    e2: &Vec3,
    sd_dot: &Vec3,
    params: &SpacecraftParams,
    cfg: &ControllerConfig,
) -> Vec3 {
    let rxb = inp.goal_b.cross(inp.boresight);
    let mut u = rate_loop(inp.state, e2, sd_dot, params, cfg);
    if inp.omega_s < 1.0 {
        u -= rxb * (cfg.g * (inp.eps_q / cfg.f).tanh() / inp.rho_q * (1.0 - inp.omega_s));
    }
    if inp.omega_v > 0.0 {
        u -= apf_gradient(inp.boresight, inp.goal_b, inp.obstacles, cfg.k_a) * inp.omega_v;
    }
    u += antipodal_kick(inp.boresight, inp.goal_b, params);
    saturate(u, params.torque_limit())
}

/// Saturated torque of the APF-only benchmark (`Ω_s ≡ Ω_v ≡ 1`): no
/// barrier term, full APF feedback.
pub fn benchmark_apf_law(
    state: &BodyState,
    boresight: &Vec3,
    goal_b: &Vec3,
    obstacles: &[ObstacleView<'_>],
    e2: &Vec3,
    sd_dot: &Vec3,
    params: &SpacecraftParams,
    cfg: &ControllerConfig,
) -> Vec3 {
    let mut u = rate_loop(state, e2, sd_dot, params, cfg);
    u -= apf_gradient(boresight, goal_b, obstacles, cfg.k_a);
    u += antipodal_kick(boresight, goal_b, params);
    saturate(u, params.torque_limit())
}

/// Lower bound on `sin θ_d` while inside the `Ω_v` blend, from
/// `θ_d ≥ Θ_df − arccos P₀` and `θ_d ≤ π − arccos P₁`.
pub fn min_sin_theta_d(theta_df: f64, p0: f64, p1: f64) -> Result<f64> {
    if !(theta_df > 0.0 && theta_df < std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!("Theta_df must lie in (0, pi), got {theta_df}")));
    }
    if !(p0 < p1 && p0 >= -1.0 && p1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("need -1 <= P0 < P1 <= 1, got {p0}, {p1}")));
    }
    let lo = theta_df - p0.acos();
    let hi = std::f64::consts::PI - p1.acos();
    if lo > hi {
        return Err(Error::InvalidParameter(format!(
            "theta_d bounds are infeasible: min {lo} > max {hi}"
        )));
    }
    Ok(min_sin_on(lo, hi))
}

// sin is concave on [0, π], so its minimum over an interval is at an end.
fn min_sin_on(lo: f64, hi: f64) -> f64 {
    lo.max(0.0).sin().min(hi.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub rule: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<RuleCheck>,
}

impl ValidationReport {
    fn push(&mut self, rule: &str, status: CheckStatus, detail: String) {
        self.checks.push(RuleCheck { rule: rule.to_string(), status, detail });
    }

    fn check(&mut self, rule: &str, ok: bool, detail: String) {
        let status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        self.push(rule, status, detail);
    }

    pub fn failures(&self) -> impl Iterator<Item = &RuleCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &RuleCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Warn)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Boundary equilibrium pointing error `x_E = 1 − cos(ang(r, f) − Θ₁)`.
pub fn boundary_pointing_error(goal: &Vec3, cone: &ObstacleCone) -> f64 {
    1.0 - (angle_between(goal, cone.direction()) - cone.theta_1()).cos()
}

/// Checks the gain-selection rules against a concrete scenario geometry.
/// `goal` and the cone directions are inertial; `initial_x_e` is the
/// pointing error at `t = 0`.
pub fn validate_config(
    cfg: &ControllerConfig,
    envelope: &EnvelopeConfig,
    obstacles: &[Obstacle],
    goal: &Vec3,
    initial_x_e: f64,
    theta_df: f64,
) -> ValidationReport {
    let mut rep = ValidationReport::default();

    let gains = [
        ("k1", cfg.k1),
        ("k_p", cfg.k_p),
        ("k_omega", cfg.k_omega.min()),
        ("g", cfg.g),
        ("f", cfg.f),
        ("k_a", cfg.k_a),
        ("eta", cfg.eta),
        ("sigma", cfg.sigma),
        ("td.r", cfg.td.r),
        ("td.a1", cfg.td.a1),
        ("td.a2", cfg.td.a2),
    ];
    let bad: Vec<_> = gains.iter().filter(|(_, v)| !(*v > 0.0 && v.is_finite())).map(|(n, _)| *n).collect();
    rep.check(
        "gains_positive",
        bad.is_empty(),
        if bad.is_empty() { "all gains > 0".into() } else { format!("non-positive: {}", bad.join(", ")) },
    );

    rep.check(
        "k1_exceeds_k_rho",
        cfg.k1 > envelope.k_rho,
        format!("K1 = {}, k_rho = {}", cfg.k1, envelope.k_rho),
    );

    rep.check(
        "envelope_contains_start",
        envelope.rho_0 > initial_x_e,
        format!("rho_0 = {}, x_e(0) = {initial_x_e}", envelope.rho_0),
    );

    for (i, o) in obstacles.iter().enumerate() {
        let sep = angle_between(goal, o.cone.direction());
        rep.check(
            &format!("goal_separation[{i}]"),
            sep >= theta_df,
            format!("ang(r, f) = {:.3} deg, Theta_df = {:.3} deg", sep.to_degrees(), theta_df.to_degrees()),
        );

        let beta_goal = sep.cos();
        rep.check(
            &format!("goal_outside_switching[{i}]"),
            beta_goal < o.switches.v0,
            format!("beta at goal = {beta_goal:.6}, V0 = {:.6}", o.switches.v0),
        );

        rep.check(
            &format!("repulsion_slope_peak[{i}]"),
            o.cone.slope_peaks_at_centre(),
            format!(
                "r(L1 - L0)/k_r = {:.4} (needs >= {:.4} for max slope = r)",
                o.cone.slope_coefficient(),
                crate::field::MIN_SLOPE_COEFFICIENT
            ),
        );

        match min_sin_theta_d(theta_df, o.switches.p0, o.switches.p1) {
            Ok(s) if s > 0.0 => {
                let need = o.cone.r_slope() / s;
                rep.check(
                    &format!("attraction_dominates_slope[{i}]"),
                    cfg.k_a >= need,
                    format!("k_a = {}, r/min sin(theta_d) = {need:.6}", cfg.k_a),
                );
            }
            Ok(s) => rep.check(
                &format!("attraction_dominates_slope[{i}]"),
                false,
                format!("min sin(theta_d) = {s}, no finite k_a satisfies the rule"),
            ),
            Err(e) => rep.check(&format!("attraction_dominates_slope[{i}]"), false, e.to_string()),
        }

        let x_e = boundary_pointing_error(goal, &o.cone);
        let residual = cfg.k_a * x_e - o.cone.k_r();
        let rel = residual.abs() / o.cone.k_r();
        let status = if rel <= 1e-6 { CheckStatus::Pass } else { CheckStatus::Warn };
        rep.push(
            &format!("boundary_equilibrium[{i}]"),
            status,
            format!("k_a x_E - k_r = {residual:.6e} (x_E = {x_e:.6}, k_r = {})", o.cone.k_r()),
        );
    }
    rep
}
