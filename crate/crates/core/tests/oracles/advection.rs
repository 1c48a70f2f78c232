//! Wake transport against the method of characteristics. With every source
//! term switched off, a lateral centerline profile is carried downstream at
//! the relative free-stream speed.

use fowfsim::frame::{TurbineGeometry, Vector2};
use fowfsim::wake::{init_wake, step_wake, RotorCondition, WakeForcing, WakeParams};

pub const D: f64 = 126.0;
pub const SPEED: f64 = 14.0;
const COURANT: f64 = 0.5;
const TRAVEL: f64 = 4.0 * D;

pub fn bump(x: f64) -> f64 {
    let s = (x - 5.0 * D) / (2.0 * D);
    10.0 * (-s * s).exp()
}

/// Exact solution: the initial profile shifted by `shift`, with the zero
/// boundary value carried in behind it.
fn exact(x: f64, shift: f64) -> f64 {
    if x < shift {
        0.0
    } else {
        bump(x - shift)
    }
}

/// L1 error of the advected profile after it has travelled `TRAVEL`.
pub fn advection_error(spacing_diameters: f64) -> f64 {
    let params = WakeParams {
        spacing_diameters,
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
    let forcing = WakeForcing {
        free_stream: Vector2::new(SPEED, 0.0),
        free_stream_accel: Vector2::ZERO,
        platform_velocity: Vector2::ZERO,
        platform_accel: Vector2::ZERO,
    };
    let dt = COURANT * grid.dx / SPEED;
    let steps = (TRAVEL / (SPEED * dt)).round() as usize;
    for _ in 0..steps {
        step_wake(&mut grid, &forcing, dt).unwrap();
    }
    let shift = SPEED * dt * steps as f64;
    (0..grid.len())
        .map(|j| (grid.yw[j] - exact(grid.x_node(j), shift)).abs() * grid.dx)
        .sum()
}

/// Bump integral, the scale the L1 errors are judged against.
pub fn bump_mass() -> f64 {
    10.0 * 2.0 * D * std::f64::consts::PI.sqrt()
}

/// L1 errors on the coarse and the halved grid.
pub fn refinement() -> (f64, f64) {
    (advection_error(0.25), advection_error(0.125))
}
