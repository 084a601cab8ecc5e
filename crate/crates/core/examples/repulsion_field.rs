//! Tabulates the buffer-zone repulsion and its gradient across one cone and
//! shows where the slope peak lands for two choices of `k_r`.

use keepout::attitude::Vec3;
use keepout::field::{repulsion, repulsion_grad_beta, total_potential, ObstacleCone, MIN_SLOPE_COEFFICIENT};

fn cone(k_r: f64) -> keepout::Result<ObstacleCone> {
    ObstacleCone::new(
        Vec3::new(0.5145, 0.8575, 0.0).normalize(),
        20f64.to_radians(),
        35f64.to_radians(),
        25f64.to_radians(),
        k_r,
        0.05,
    )
}

fn main() -> keepout::Result<()> {
    let c = cone(0.003)?;
    println!("L0 = {:.5}, Lm = {:.5}, L1 = {:.5}", c.l0(), c.lm(), c.l1());
    println!("{:>8} {:>8} {:>12} {:>12}", "angle", "beta", "U_r", "dU_r/dbeta");
    for i in 0..=20 {
        let angle = 36.0 - 12.0 * i as f64 / 20.0;
        let beta = angle.to_radians().cos();
        println!("{angle:8.2} {beta:8.5} {:12.5e} {:12.5e}", repulsion(&c, beta), repulsion_grad_beta(&c, beta));
    }

    // The slope only peaks at Lm (and equals r there) once the tanh
    // coefficient clears sqrt(3/2).
    for k_r in [0.003, 0.01] {
        let c = cone(k_r)?;
        let peak = (1..2000)
            .map(|i| c.l0() + (c.l1() - c.l0()) * i as f64 / 2000.0)
            .map(|b| repulsion_grad_beta(&c, b))
            .fold(0.0, f64::max);
        println!(
            "k_r = {k_r}: coefficient {:.3} (threshold {MIN_SLOPE_COEFFICIENT:.3}), peak slope {peak:.4}, r = {}",
            c.slope_coefficient(),
            c.r_slope()
        );
    }

    let beta = 30f64.to_radians().cos();
    println!("total potential at x_e = 0.4, 30 deg from the cone: {:.5}", total_potential(0.4, 1.0, &[(&c, beta)]));
    Ok(())
}
