//! Reduced-attitude basics: rotate an inertial goal into the body frame,
//! measure the pointing error and its rate, and spin a rigid body freely.

use keepout::attitude::{
    angle_between, pointing_error, reduced_error_rate, rotate_to_body, BodyState, Mat3, SpacecraftParams,
    UnitQuaternion, Vec3,
};
use keepout::integrator::rk4_step;
use nalgebra::SVector;

fn main() -> keepout::Result<()> {
    let boresight = Vec3::z();
    let goal = Vec3::new(-0.866, 0.5, 0.0).normalize();

    // A 30° roll about x, then look at the goal from the body frame.
    let q = UnitQuaternion::from_axis_angle(&Vec3::x(), 30f64.to_radians())?;
    let goal_b = rotate_to_body(&q, &goal)?;
    let x_e = pointing_error(&boresight, &goal_b);
    println!("goal in body frame   {:.4?}", goal_b.as_slice());
    println!("pointing error x_e   {x_e:.6}  ({:.3} deg)", angle_between(&boresight, &goal_b).to_degrees());

    let omega = Vec3::new(0.01, -0.02, 0.005);
    println!("x_e rate at omega    {:.6e}", reduced_error_rate(&boresight, &goal_b, &omega));

    // Torque-free tumble: kinetic energy is conserved.
    let params = SpacecraftParams::new(Mat3::from_diagonal(&Vec3::new(5.08, 5.14, 5.0)), 0.5, 0.1)?;
    let mut w: SVector<f64, 3> = Vec3::new(0.1, 0.05, -0.2);
    let energy = |w: &Vec3| 0.5 * w.dot(&(params.inertia() * w));
    let e0 = energy(&w);
    for k in 0..10_000 {
        w = rk4_step(&w, k as f64 * 0.01, 0.01, |_, w| {
            let s = BodyState { attitude: UnitQuaternion::identity(), omega: *w };
            Ok::<_, keepout::Error>(keepout::attitude::dynamics_rhs(&s, &Vec3::zeros(), &Vec3::zeros(), &params))
        })?;
    }
    println!("energy drift after 100 s of tumbling: {:.3e}", (energy(&w) - e0).abs() / e0);
    Ok(())
}
