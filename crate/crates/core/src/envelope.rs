//! Switching prescribed-performance envelope, the translated error, the
//! log-cosh barrier value and the two switching variables.
//!
//! In Mode 1 (`Ω_s = 0`) the envelope decays exponentially towards
//! `rho_inf`. In Mode 2 (`Ω_s = 1`) it follows the error itself so the
//! translated error `ε = x_e/ρ` is frozen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BridgeScale, BridgeShape, ObstacleCone};

pub const DEFAULT_E_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub rho_0: f64,
    pub rho_inf: f64,
    pub k_rho: f64,
    /// Below this error magnitude the Mode-2 ratio `ė/e` is taken as zero.
    #[serde(default = "default_e_min")]
    pub e_min: f64,
}

fn default_e_min() -> f64 {
    DEFAULT_E_MIN
}

impl EnvelopeConfig {
    pub fn new(rho_0: f64, rho_inf: f64, k_rho: f64) -> Result<Self> {
        let cfg = Self { rho_0, rho_inf, k_rho, e_min: DEFAULT_E_MIN };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_0 > self.rho_inf && self.rho_inf > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "envelope needs rho_0 > rho_inf > 0, got {} and {}",
                self.rho_0, self.rho_inf
            )));
        }
        if !(self.k_rho > 0.0) {
            return Err(Error::InvalidParameter(format!("k_rho must be > 0, got {}", self.k_rho)));
        }
        if !(self.e_min >= 0.0) {
            return Err(Error::InvalidParameter("e_min must be >= 0".into()));
        }
        Ok(())
    }

    /// Mode-1 closed form `ρ_∞ + (ρ_0 − ρ_∞) e^{−k_ρ t}`.
    pub fn decay_at(&self, t: f64) -> f64 {
        self.rho_inf + (self.rho_0 - self.rho_inf) * (-self.k_rho * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeState {
    pub rho: f64,
    pub epsilon: f64,
}

impl EnvelopeState {
    pub fn new(x_e: f64, rho: f64) -> Result<Self> {
        Ok(Self { rho, epsilon: translated_error(x_e, rho)? })
    }
}

/// Knots of `Ω_s` (V) and `Ω_v` (P), in cosine units, with their
/// steepness coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub v0: f64,
    pub v1: f64,
    pub vm: f64,
    pub p0: f64,
    pub p1: f64,
    pub pm: f64,
    pub m: f64,
    pub n: f64,
    pub delta: f64,
}

impl SwitchConfig {
    /// Knots from a cone: `V_0 = L_0 − 2δ`, `V_1 = L_0`, `V_m = L_0 − δ`,
    /// `P_0 = V_1`, `P_m` the midpoint of `[P_0, P_1]`. `p1` must lie in
    /// `(L_0, L_1]`.
    pub fn from_cone(cone: &ObstacleCone, p1: f64, delta: f64, m: f64, n: f64) -> Result<Self> {
        let l0 = cone.l0();
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        if !(p1 > l0 && p1 <= cone.l1() + 1e-15) {
            return Err(Error::InvalidParameter(format!(
                "P1 must lie in (L0, L1] = ({l0}, {}], got {p1}",
                cone.l1()
            )));
        }
        let cfg = Self {
            v0: l0 - 2.0 * delta,
            v1: l0,
            vm: l0 - delta,
            p0: l0,
            p1,
            pm: 0.5 * (l0 + p1),
            m,
            n,
            delta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        BridgeShape::new(self.v0, self.v1, self.vm, self.m)?;
        BridgeShape::new(self.p0, self.p1, self.pm, self.n)?;
        Ok(())
    }

    fn s_shape(&self) -> BridgeShape {
        BridgeShape { lo: self.v0, hi: self.v1, mid: self.vm, steepness: self.m }
    }

    fn v_shape(&self) -> BridgeShape {
        BridgeShape { lo: self.p0, hi: self.p1, mid: self.pm, steepness: self.n }
    }
}

/// Envelope switch: 0 far from the obstacle, 1 from `V_1` inwards.
pub fn omega_s(cfg: &SwitchConfig, beta: f64) -> f64 {
    cfg.s_shape().eval(beta, BridgeScale::Unit)
}

/// Virtual-law switch: the milder blend over `[P_0, P_1]`.
pub fn omega_v(cfg: &SwitchConfig, beta: f64) -> f64 {
    cfg.v_shape().eval(beta, BridgeScale::Unit)
}

/// Nearest-obstacle aggregation: the largest switch value over all cones.
pub fn effective_switches(cfg: &SwitchConfig, betas: &[f64]) -> Result<(f64, f64)> {
    if betas.is_empty() {
        return Err(Error::InvalidInput("effective_switches needs at least one beta".into()));
    }
    Ok(betas.iter().fold((0.0f64, 0.0f64), |(s, v), &b| {
        (s.max(omega_s(cfg, b)), v.max(omega_v(cfg, b)))
    }))
}

/// Same aggregation when each obstacle carries its own knots.
pub fn effective_switches_per_obstacle<'a, I>(pairs: I) -> (f64, f64)
where
    I: IntoIterator<Item = (&'a SwitchConfig, f64)>,
{
    pairs.into_iter().fold((0.0f64, 0.0f64), |(s, v), (cfg, b)| {
        (s.max(omega_s(cfg, b)), v.max(omega_v(cfg, b)))
    })
}

/// `ρ̇ = −k_ρ(ρ − ρ_∞)(1 − Ω_s) + (ė/e) ρ Ω_s`, with the ratio dropped when
/// `|e| < e_min`.
pub fn sppf_rhs(state: &EnvelopeState, cfg: &EnvelopeConfig, omega_s: f64, e: f64, e_dot: f64) -> f64 {
    let decay = -cfg.k_rho * (state.rho - cfg.rho_inf) * (1.0 - omega_s);
    let follow = if omega_s > 0.0 && e.abs() >= cfg.e_min && e != 0.0 {
        (e_dot / e) * state.rho * omega_s
    } else {
        0.0
    };
    decay + follow
}

/// `ε = x_e/ρ`.
pub fn translated_error(x_e: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidState(format!("envelope must be positive, got rho = {rho}")));
    }
    Ok(x_e / rho)
}

/// Overflow-safe `ln cosh x`.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `V_B = g F ln cosh(ε/F)`.
pub fn blf_value(epsilon: f64, g: f64, f: f64) -> f64 {
    g * f * ln_cosh(epsilon / f)
}

/// `H(x) = x tanh x − ln cosh x`, non-negative for `x ≥ 0`.
pub fn property_one(x: f64) -> f64 {
    x * x.tanh() - ln_cosh(x)
}
