//! Fixed-step explicit integrators over any state type that forms a vector
//! space under `+` and scalar `*`.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

/// Classic fourth-order Runge-Kutta step. The derivative closure may fail,
/// in which case the step is abandoned and the error propagated.
pub fn rk4_step<S, E, F>(y: &S, t: f64, dt: f64, mut f: F) -> Result<S, E>
where
    S: Copy + Add<Output = S> + Mul<f64, Output = S>,
    F: FnMut(f64, &S) -> Result<S, E>,
{
    let half = 0.5 * dt;
    let k1 = f(t, y)?;
    let k2 = f(t + half, &(*y + k1 * half))?;
    let k3 = f(t + half, &(*y + k2 * half))?;
    let k4 = f(t + dt, &(*y + k3 * dt))?;
    Ok(*y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

pub fn euler_step<S, E, F>(y: &S, t: f64, dt: f64, mut f: F) -> Result<S, E>
where
    S: Copy + Add<Output = S> + Mul<f64, Output = S>,
    F: FnMut(f64, &S) -> Result<S, E>,
{
    let k = f(t, y)?;
    Ok(*y + k * dt)
}

impl Integrator {
    pub fn step<S, E, F>(self, y: &S, t: f64, dt: f64, f: F) -> Result<S, E>
    where
        S: Copy + Add<Output = S> + Mul<f64, Output = S>,
        F: FnMut(f64, &S) -> Result<S, E>,
    {
        match self {
            Integrator::Rk4 => rk4_step(y, t, dt, f),
            Integrator::Euler => euler_step(y, t, dt, f),
        }
    }
}
