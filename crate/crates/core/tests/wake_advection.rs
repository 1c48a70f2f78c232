//! Upwind wake transport against the exact shifted profile.

mod oracles;

use fowfsim::frame::{TurbineGeometry, Vector2};
use fowfsim::wake::{init_wake, step_wake, RotorCondition, WakeForcing, WakeParams};

use oracles::advection::{bump, bump_mass, refinement, D, SPEED};

#[test]
fn profile_translates_at_first_order() {
    let (coarse, fine) = refinement();
    let ratio = coarse / fine;
    let mass = bump_mass();
    assert!(
        coarse < 0.15 * mass,
        "coarse error {coarse} against mass {mass}"
    );
    println!("L1 error {coarse:.3} -> {fine:.3}, refinement ratio {ratio:.3}");
    assert!((1.8..2.5).contains(&ratio), "refinement ratio {ratio}");
}

#[test]
fn unit_courant_number_is_exact() {
    // Upwind with Courant number 1 is the exact shift by one node per step.
    let params = WakeParams {
        expansion_rate: 0.0,
        ..WakeParams::default()
    };
    let cond = RotorCondition {
        free_stream_rel: Vector2::new(SPEED, 0.0),
        rotor_speed: SPEED,
        induction: 0.3,
        yaw_deg: 0.0,
    };
    let turbine = TurbineGeometry {
        rotor_diameter: D,
        hub_height: 90.0,
        index: 0,
    };
    let mut grid = init_wake(&turbine, &params, &cond).unwrap();
    for j in 0..grid.len() {
        grid.yw[j] = bump(grid.x_node(j));
    }
    let start = grid.yw.clone();
    let forcing = WakeForcing {
        free_stream: Vector2::new(SPEED, 0.0),
        free_stream_accel: Vector2::ZERO,
        platform_velocity: Vector2::ZERO,
        platform_accel: Vector2::ZERO,
    };
    let dt = grid.dx / SPEED;
    for _ in 0..8 {
        step_wake(&mut grid, &forcing, dt).unwrap();
    }
    for j in 8..grid.len() {
        assert!((grid.yw[j] - start[j - 8]).abs() < 1e-12, "node {j}");
    }
}
