//! The switching envelope on its own: decay in Mode 1, then a frozen
//! translated error once the switch turns on.

use keepout::attitude::Vec3;
use keepout::envelope::{
    blf_value, omega_s, omega_v, sppf_rhs, EnvelopeConfig, EnvelopeState, SwitchConfig,
};
use keepout::field::ObstacleCone;
use keepout::integrator::rk4_step;

fn main() -> keepout::Result<()> {
    let env = EnvelopeConfig::new(3.0, 1e-3, 0.1)?;
    let cone = ObstacleCone::new(Vec3::y(), 20f64.to_radians(), 35f64.to_radians(), 25f64.to_radians(), 0.003, 0.05)?;
    let sw = SwitchConfig::from_cone(&cone, cone.l1(), 0.01, 5.0, 2.0)?;

    println!("switch knots: V0 {:.4} V1 {:.4} | P0 {:.4} P1 {:.4}", sw.v0, sw.v1, sw.p0, sw.p1);
    for deg in [40.0, 37.0, 36.0, 35.0, 30.0, 25.0] {
        let b = f64::cos(f64::to_radians(deg));
        println!("  {deg:>4} deg from f: Omega_s {:.4}  Omega_v {:.4}", omega_s(&sw, b), omega_v(&sw, b));
    }

    // A made-up error signal: slow decay, with the switch on between 20 and 30 s.
    let e = |t: f64| 0.8 * (-0.05 * t).exp();
    let e_dot = |t: f64| -0.04 * (-0.05 * t).exp();
    let switch = |t: f64| if (20.0..30.0).contains(&t) { 1.0 } else { 0.0 };

    let dt = 0.01;
    let mut rho = env.rho_0;
    for k in 0..4000 {
        let t = k as f64 * dt;
        if k % 500 == 0 {
            let s = EnvelopeState::new(e(t), rho)?;
            println!(
                "t {t:5.1}  Omega_s {}  rho {rho:.5}  closed form {:.5}  eps {:.5}  BLF {:.5}",
                switch(t),
                env.decay_at(t),
                s.epsilon,
                blf_value(s.epsilon, 1.0, 1.0)
            );
        }
        // The switch is held over each step so the freeze is exact.
        let om = switch(t);
        rho = rk4_step(&rho, t, dt, |tt, r| {
            let s = EnvelopeState { rho: *r, epsilon: e(tt) / r };
            Ok::<_, keepout::Error>(sppf_rhs(&s, &env, om, e(tt), e_dot(tt)))
        })?;
    }
    Ok(())
}
