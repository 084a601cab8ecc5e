//! Attraction and repulsion potentials over the boresight/obstacle cosine
//! `β = B·f`, together with the tanh-over-sqrt bridge shared with the
//! switching variables.

use serde::{Deserialize, Serialize};

use crate::attitude::Vec3;
use crate::error::{Error, Result};

/// Distance from a knot inside which the bridge returns its limit value.
const KNOT_GUARD: f64 = 1e-12;

/// How the bridge output and its tanh argument are scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BridgeScale {
    /// Repulsion-field use: output in `[0, gain]`, argument scaled by
    /// `steepness·(hi − lo)/gain` so the slope at `mid` equals `steepness`
    /// when `mid` is the interval centre.
    Field { gain: f64 },
    /// Switching use: output in `[0, 1]`, argument scaled by
    /// `steepness·(hi − lo)`.
    Unit,
}

impl BridgeScale {
    fn ceiling(self) -> f64 {
        match self {
            BridgeScale::Field { gain } => gain,
            BridgeScale::Unit => 1.0,
        }
    }
}

/// Knots and steepness of the smooth 0→scale step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeShape {
    pub lo: f64,
    pub hi: f64,
    pub mid: f64,
    pub steepness: f64,
}

impl BridgeShape {
    pub fn new(lo: f64, hi: f64, mid: f64, steepness: f64) -> Result<Self> {
        if !(lo < mid && mid < hi) {
            return Err(Error::InvalidParameter(format!(
                "bridge knots must satisfy lo < mid < hi, got {lo}, {mid}, {hi}"
            )));
        }
        if !(steepness > 0.0 && steepness.is_finite()) {
            return Err(Error::InvalidParameter(format!("bridge steepness must be > 0, got {steepness}")));
        }
        Ok(Self { lo, hi, mid, steepness })
    }

    /// Centred bridge, `mid = (lo + hi)/2`.
    pub fn centred(lo: f64, hi: f64, steepness: f64) -> Result<Self> {
        Self::new(lo, hi, 0.5 * (lo + hi), steepness)
    }

    fn coefficient(&self, scale: BridgeScale) -> f64 {
        let base = self.steepness * (self.hi - self.lo);
        match scale {
            BridgeScale::Field { gain } => base / gain,
            BridgeScale::Unit => base,
        }
    }

    pub fn eval(&self, beta: f64, scale: BridgeScale) -> f64 {
        let top = scale.ceiling();
        if beta < self.lo + KNOT_GUARD {
            return 0.0;
        }
        if beta >= self.hi - KNOT_GUARD {
            return top;
        }
        let d = (beta - self.lo) * (self.hi - beta);
        let arg = self.coefficient(scale) * (beta - self.mid) / d.sqrt();
        0.5 * top * (arg.tanh() + 1.0)
    }

    /// Analytic `∂/∂β` of [`BridgeShape::eval`]; zero outside `(lo, hi)`.
    pub fn slope(&self, beta: f64, scale: BridgeScale) -> f64 {
        if beta < self.lo + KNOT_GUARD || beta >= self.hi - KNOT_GUARD {
            return 0.0;
        }
        let c = self.coefficient(scale);
        let d = (beta - self.lo) * (self.hi - beta);
        let dd = self.hi + self.lo - 2.0 * beta;
        let sd = d.sqrt();
        let arg = c * (beta - self.mid) / sd;
        let darg = c * (2.0 * d - (beta - self.mid) * dd) / (2.0 * d * sd);
        let ch = arg.cosh();
        // sech² underflows to exactly 0 before darg can overflow.
        0.5 * scale.ceiling() * darg / (ch * ch)
    }
}

pub fn bridge(shape: &BridgeShape, beta: f64, scale: BridgeScale) -> f64 {
    shape.eval(beta, scale)
}

/// A keep-out cone around an inertial direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleCone {
    f_inertial: Vec3,
    theta_f: f64,
    theta_0: f64,
    theta_1: f64,
    k_r: f64,
    r_slope: f64,
}

impl ObstacleCone {
    /// Angles in radians. `f_inertial` must already be a unit vector.
    pub fn new(
        f_inertial: Vec3,
        theta_f: f64,
        theta_0: f64,
        theta_1: f64,
        k_r: f64,
        r_slope: f64,
    ) -> Result<Self> {
        if (f_inertial.norm() - 1.0).abs() > crate::attitude::UNIT_TOLERANCE {
            return Err(Error::InvalidParameter("obstacle direction must be a unit vector".into()));
        }
        if !(theta_f > 0.0 && theta_1 >= theta_f && theta_0 > theta_1 && theta_0 < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "cone angles must satisfy 0 < theta_f <= theta_1 < theta_0 < pi, got {theta_f}, {theta_1}, {theta_0}"
            )));
        }
        if !(k_r > 0.0 && r_slope > 0.0) {
            return Err(Error::InvalidParameter("k_r and r_slope must be > 0".into()));
        }
        Ok(Self { f_inertial, theta_f, theta_0, theta_1, k_r, r_slope })
    }

    pub fn direction(&self) -> &Vec3 {
        &self.f_inertial
    }

    pub fn theta_f(&self) -> f64 {
        self.theta_f
    }

    pub fn theta_0(&self) -> f64 {
        self.theta_0
    }

    pub fn theta_1(&self) -> f64 {
        self.theta_1
    }

    pub fn k_r(&self) -> f64 {
        self.k_r
    }

    pub fn r_slope(&self) -> f64 {
        self.r_slope
    }

    /// `L_0 = cos Θ_0`, onset of repulsion.
    pub fn l0(&self) -> f64 {
        self.theta_0.cos()
    }

    /// `L_1 = cos Θ_1`, saturation of repulsion.
    pub fn l1(&self) -> f64 {
        self.theta_1.cos()
    }

    pub fn lm(&self) -> f64 {
        0.5 * (self.l0() + self.l1())
    }

    pub fn shape(&self) -> BridgeShape {
        BridgeShape { lo: self.l0(), hi: self.l1(), mid: self.lm(), steepness: self.r_slope }
    }

    fn scale(&self) -> BridgeScale {
        BridgeScale::Field { gain: self.k_r }
    }

    /// Tanh-argument coefficient `r(L_1 − L_0)/k_r`. The slope peaks at `L_m`
    /// (and therefore never exceeds `r`) exactly when this is at least
    /// `√(3/2)`; below that the peak moves towards the knots.
    pub fn slope_coefficient(&self) -> f64 {
        self.r_slope * (self.l1() - self.l0()) / self.k_r
    }

    pub fn slope_peaks_at_centre(&self) -> bool {
        self.slope_coefficient() >= MIN_SLOPE_COEFFICIENT
    }
}

/// Smallest tanh coefficient for which the bridge slope is maximal at its
/// centre: `(1 + s²)^{3/2} sech²(c s) ≤ 1` for all `s` iff `c² ≥ 3/2`.
pub const MIN_SLOPE_COEFFICIENT: f64 = 1.224_744_871_391_589;

/// `U_a = k_a x_e`.
pub fn attraction(x_e: f64, k_a: f64) -> f64 {
    k_a * x_e
}

/// `U_r(β)`, piece-wise 0 / bridge / `k_r`.
pub fn repulsion(cone: &ObstacleCone, beta: f64) -> f64 {
    cone.shape().eval(beta, cone.scale())
}

/// `k_r ∇_β = ∂U_r/∂β`.
pub fn repulsion_grad_beta(cone: &ObstacleCone, beta: f64) -> f64 {
    cone.shape().slope(beta, cone.scale())
}

/// `U = U_a + Σ U_ri`.
pub fn total_potential(x_e: f64, k_a: f64, betas: &[(&ObstacleCone, f64)]) -> f64 {
    attraction(x_e, k_a) + betas.iter().map(|(c, b)| repulsion(c, *b)).sum::<f64>()
}
