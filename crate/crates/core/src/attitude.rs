//! Quaternion kinematics and the reduced-attitude pointing error.
//!
//! Quaternions are stored vector-first, `[x, y, z, w]`, and multiplied with
//! the Hamilton rule. A [`UnitQuaternion`] `q` describes the body attitude so
//! that a vector fixed in the inertial frame is seen in the body frame as
//! `q* ⊗ v ⊗ q`, i.e. `v_b = A(q) v_i` with `A(q) = R(q)ᵀ`. Under this
//! convention the body-rate kinematics are `q̇ = ½ q ⊗ [ω, 0]` and any
//! inertial vector expressed in the body frame evolves as `ṙ_b = r_b × ω`.

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when a caller promises a unit vector.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    x: f64,
    y: f64,
    z: f64,
    w: f64,
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self { x: 0.0, y: 0.0, z: 0.0, w: 1.0 }
    }

    /// Normalizes `[x, y, z, w]`. Fails for a zero or non-finite input.
    pub fn new_normalize(x: f64, y: f64, z: f64, w: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z + w * w).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "quaternion [{x}, {y}, {z}, {w}] cannot be normalized"
            )));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n, w: w / n })
    }

    pub fn from_vector(v: &Vector4<f64>) -> Result<Self> {
        Self::new_normalize(v[0], v[1], v[2], v[3])
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n < 1e-12 {
            return Err(Error::InvalidInput("zero rotation axis".into()));
        }
        let s = (0.5 * angle).sin() / n;
        Self::new_normalize(axis.x * s, axis.y * s, axis.z * s, (0.5 * angle).cos())
    }

    pub fn coords(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.z, self.w)
    }

    pub fn vector_part(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn scalar_part(&self) -> f64 {
        self.w
    }

    pub fn norm(&self) -> f64 {
        self.coords().norm()
    }

    pub fn conjugate(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z, w: self.w }
    }

    /// Hamilton product `self ⊗ rhs`, renormalized.
    pub fn compose(&self, rhs: &Self) -> Self {
        let p = hamilton(&self.coords(), &rhs.coords());
        // Product of unit quaternions is unit up to rounding.
        Self::from_vector(&p).expect("product of unit quaternions is non-zero")
    }

    /// Body-to-inertial rotation matrix `R(q)`.
    pub fn rotation_matrix(&self) -> Mat3 {
        let (x, y, z, w) = (self.x, self.y, self.z, self.w);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Inertial-to-body attitude matrix `A(q) = R(q)ᵀ`.
    pub fn attitude_matrix(&self) -> Mat3 {
        self.rotation_matrix().transpose()
    }

    /// Expresses a body vector in the inertial frame.
    pub fn rotate_to_inertial(&self, v_body: &Vec3) -> Vec3 {
        self.rotation_matrix() * v_body
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        Self::new_normalize(c[0], c[1], c[2], c[3])
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        [q.x, q.y, q.z, q.w]
    }
}

/// Raw Hamilton product on vector-first coordinates.
pub(crate) fn hamilton(p: &Vector4<f64>, q: &Vector4<f64>) -> Vector4<f64> {
    let pv = p.xyz();
    let qv = q.xyz();
    let v = qv * p[3] + pv * q[3] + pv.cross(&qv);
    Vector4::new(v.x, v.y, v.z, p[3] * q[3] - pv.dot(&qv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub attitude: UnitQuaternion,
    /// Body angular velocity, rad/s.
    pub omega: Vec3,
}

impl BodyState {
    pub fn at_rest(attitude: UnitQuaternion) -> Self {
        Self { attitude, omega: Vec3::zeros() }
    }
}

/// Rigid-body parameters. The inverse inertia is computed once here.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacecraftParams {
    inertia: Mat3,
    inertia_inv: Mat3,
    torque_limit: f64,
    disturbance_bound: f64,
}

impl SpacecraftParams {
    pub fn new(inertia: Mat3, torque_limit: f64, disturbance_bound: f64) -> Result<Self> {
        if inertia.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("inertia has non-finite entries".into()));
        }
        if (inertia - inertia.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidParameter("inertia is not symmetric".into()));
        }
        let chol = inertia
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("inertia is not positive-definite".into()))?;
        if !(torque_limit > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "torque_limit must be > 0, got {torque_limit}"
            )));
        }
        if !(disturbance_bound >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "disturbance_bound must be >= 0, got {disturbance_bound}"
            )));
        }
        Ok(Self { inertia, inertia_inv: chol.inverse(), torque_limit, disturbance_bound })
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn torque_limit(&self) -> f64 {
        self.torque_limit
    }

    pub fn disturbance_bound(&self) -> f64 {
        self.disturbance_bound
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.inertia.symmetric_eigenvalues().max()
    }
}

fn check_unit(v: &Vec3, what: &str) -> Result<()> {
    let n = v.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidInput(format!("{what} must be a unit vector, norm = {n}")));
    }
    Ok(())
}

/// `A(q) · v_inertial`.
pub fn rotate_to_body(q: &UnitQuaternion, v_inertial: &Vec3) -> Result<Vec3> {
    check_unit(v_inertial, "inertial direction")?;
    Ok(q.attitude_matrix() * v_inertial)
}

/// `x_e = 1 − B·r`, clamped into `[0, 2]` against rounding.
pub fn pointing_error(boresight: &Vec3, target: &Vec3) -> f64 {
    (1.0 - boresight.dot(target)).clamp(0.0, 2.0)
}

/// `ẋ_e = −Bᵀ (r × ω)`.
pub fn reduced_error_rate(boresight: &Vec3, target: &Vec3, omega: &Vec3) -> f64 {
    -boresight.dot(&target.cross(omega))
}

/// `q̇ = ½ q ⊗ [ω, 0]`.
pub fn attitude_kinematics_rhs(q: &UnitQuaternion, omega: &Vec3) -> Vector4<f64> {
    quaternion_rate(&q.coords(), omega)
}

/// Same product on raw, possibly non-unit coordinates, as seen inside an
/// integrator stage.
pub fn quaternion_rate(q: &Vector4<f64>, omega: &Vec3) -> Vector4<f64> {
    let w = Vector4::new(omega.x, omega.y, omega.z, 0.0);
    hamilton(q, &w) * 0.5
}

/// `ω̇ = J⁻¹ (−ω × Jω + u + d)`.
pub fn dynamics_rhs(
    state: &BodyState,
    torque: &Vec3,
    disturbance: &Vec3,
    params: &SpacecraftParams,
) -> Vec3 {
    let w = &state.omega;
    let gyro = w.cross(&(params.inertia() * w));
    params.inertia_inv() * (-gyro + torque + disturbance)
}

/// Angle between two vectors in radians, accurate near 0 and π.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::rk4_step;
    use proptest::prelude::*;
    use std::convert::Infallible;

    // Independent brute-force Hamilton product on [x, y, z, w] arrays.
    fn qmul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
        let [ax, ay, az, aw] = a;
        let [bx, by, bz, bw] = b;
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    }

    fn sandwich_to_body(q: &UnitQuaternion, v: &Vec3) -> Vec3 {
        let c: [f64; 4] = (*q).into();
        let conj = [-c[0], -c[1], -c[2], c[3]];
        let r = qmul(qmul(conj, [v.x, v.y, v.z, 0.0]), c);
        Vec3::new(r[0], r[1], r[2])
    }

    fn propagate(q0: UnitQuaternion, omega: Vec3, dt: f64, steps: usize) -> UnitQuaternion {
        let mut q = q0;
        for i in 0..steps {
            let c = rk4_step(&q.coords(), i as f64 * dt, dt, |_, c| {
                Ok::<_, Infallible>(attitude_kinematics_rhs(
                    &UnitQuaternion::from_vector(c).unwrap(),
                    &omega,
                ))
            })
            .unwrap();
            q = UnitQuaternion::from_vector(&c).unwrap();
        }
        q
    }

    fn unit3() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(a, b, c)| a * a + b * b + c * c > 1e-3)
            .prop_map(|(a, b, c)| Vec3::new(a, b, c).normalize())
    }

    fn quat() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
            .prop_map(|(a, b, c, d)| UnitQuaternion::new_normalize(a, b, c, d).unwrap())
    }

    #[test]
    fn identity_rotation() {
        let v = rotate_to_body(&UnitQuaternion::identity(), &Vec3::z()).unwrap();
        assert_eq!(v, Vec3::z());
    }

    #[test]
    fn half_turn_about_z() {
        let q = UnitQuaternion::from_axis_angle(&Vec3::z(), std::f64::consts::PI).unwrap();
        let v = rotate_to_body(&q, &Vec3::x()).unwrap();
        assert!((v - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rotate_rejects_non_unit() {
        let err = rotate_to_body(&UnitQuaternion::identity(), &Vec3::new(1.0, 1.0, 0.0));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pointing_error_cases() {
        assert_eq!(pointing_error(&Vec3::z(), &Vec3::z()), 0.0);
        assert_eq!(pointing_error(&Vec3::z(), &-Vec3::z()), 2.0);
        assert_eq!(pointing_error(&Vec3::z(), &Vec3::x()), 1.0);
    }

    #[test]
    fn error_rate_cases() {
        assert_eq!(reduced_error_rate(&Vec3::z(), &Vec3::x(), &Vec3::zeros()), 0.0);
        assert_eq!(reduced_error_rate(&Vec3::z(), &Vec3::x(), &Vec3::y()), -1.0);
    }

    #[test]
    fn kinematics_rates() {
        let q = UnitQuaternion::identity();
        assert_eq!(attitude_kinematics_rhs(&q, &Vec3::zeros()), Vector4::zeros());
        let r = attitude_kinematics_rhs(&q, &Vec3::new(0.0, 0.0, 0.3));
        assert_eq!(r, Vector4::new(0.0, 0.0, 0.15, 0.0));
    }

    #[test]
    fn constant_spin_matches_axis_angle() {
        let q = propagate(UnitQuaternion::identity(), Vec3::new(0.0, 0.0, 0.1), 0.01, 1000);
        let expected = UnitQuaternion::from_axis_angle(&Vec3::z(), 1.0).unwrap();
        // Angle of the residual rotation.
        let d = expected.conjugate().compose(&q);
        let ang = 2.0 * d.vector_part().norm().atan2(d.scalar_part().abs());
        assert!(ang < 1e-6, "residual {ang}");
    }

    #[test]
    fn diagonal_inertia_acceleration() {
        let p = SpacecraftParams::new(Mat3::from_diagonal(&Vec3::new(5.08, 5.14, 5.0)), 0.5, 0.1)
            .unwrap();
        let s = BodyState::at_rest(UnitQuaternion::identity());
        assert_eq!(dynamics_rhs(&s, &Vec3::zeros(), &Vec3::zeros(), &p), Vec3::zeros());
        let a = dynamics_rhs(&s, &Vec3::new(0.5, 0.0, 0.0), &Vec3::zeros(), &p);
        assert!((a - Vec3::new(0.5 / 5.08, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn torque_free_spin_conserves_energy() {
        let p = SpacecraftParams::new(Mat3::from_diagonal(&Vec3::new(5.08, 5.14, 5.0)), 0.5, 0.1)
            .unwrap();
        let mut w = Vec3::new(0.3, -0.2, 0.1);
        let energy = |w: &Vec3| 0.5 * w.dot(&(p.inertia() * w));
        let e0 = energy(&w);
        let dt = 0.01;
        for i in 0..10_000 {
            w = rk4_step(&w, i as f64 * dt, dt, |_, w| {
                let s = BodyState { attitude: UnitQuaternion::identity(), omega: *w };
                Ok::<_, Infallible>(dynamics_rhs(&s, &Vec3::zeros(), &Vec3::zeros(), &p))
            })
            .unwrap();
        }
        assert!((energy(&w) - e0).abs() < 1e-8);
    }

    #[test]
    fn params_reject_bad_inertia() {
        let asym = Mat3::new(5.0, 0.1, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 5.0);
        assert!(SpacecraftParams::new(asym, 0.5, 0.0).is_err());
        let indefinite = Mat3::from_diagonal(&Vec3::new(5.0, -1.0, 5.0));
        assert!(SpacecraftParams::new(indefinite, 0.5, 0.0).is_err());
        assert!(SpacecraftParams::new(Mat3::identity(), 0.0, 0.0).is_err());
        assert!(SpacecraftParams::new(Mat3::identity(), 0.5, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn rotation_matches_sandwich(q in quat(), a in unit3(), b in unit3()) {
            let ra = rotate_to_body(&q, &a).unwrap();
            let rb = rotate_to_body(&q, &b).unwrap();
            prop_assert!((ra - sandwich_to_body(&q, &a)).norm() < 1e-12);
            prop_assert!((ra.norm() - 1.0).abs() < 1e-9);
            prop_assert!((ra.dot(&rb) - a.dot(&b)).abs() < 1e-9);
        }

        #[test]
        fn pointing_error_in_range(a in unit3(), b in unit3()) {
            let x = pointing_error(&a, &b);
            prop_assert!((0.0..=2.0).contains(&x));
        }

        #[test]
        fn compose_stays_unit(p in quat(), q in quat()) {
            prop_assert!((p.compose(&q).norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn error_rate_matches_finite_difference(
            q in quat(),
            r_i in unit3(),
            wx in -0.5..0.5f64, wy in -0.5..0.5f64, wz in -0.5..0.5f64,
        ) {
            let omega = Vec3::new(wx, wy, wz);
            let b = Vec3::z();
            let h = 1e-3;
            // One RK4 step forward and backward of the kinematics.
            let fwd = propagate(q, omega, h, 1);
            let bwd = propagate(q, -omega, h, 1);
            let xe = |q: &UnitQuaternion| pointing_error(&b, &rotate_to_body(q, &r_i).unwrap());
            let fd = (xe(&fwd) - xe(&bwd)) / (2.0 * h);
            let r_b = rotate_to_body(&q, &r_i).unwrap();
            let analytic = reduced_error_rate(&b, &r_b, &omega);
            // Clamping at 0 or 2 breaks differentiability; skip those points.
            let x0 = xe(&q);
            prop_assume!(x0 > 1e-3 && x0 < 2.0 - 1e-3);
            prop_assert!((fd - analytic).abs() < 1e-6, "fd {} analytic {}", fd, analytic);
        }
    }
}
