//! Farm-level reference frame, shared value types and rotor kinematics.
//!
//! The global frame has `x` along the mean free-stream direction and `y`
//! crosswind to the left. Yaw angles are measured counterclockwise from `x`
//! and are carried in degrees at every interface.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Planar vector, used for both positions (m) and velocities (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector2 {
    pub x: f64,
    pub y: f64,
}

impl Vector2 {
    pub const ZERO: Vector2 = Vector2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vector2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Angle of the vector from `x`, in degrees.
    pub fn angle_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    /// Unit vector in the same direction, or `x` for the zero vector.
    pub fn unit_or_x(self) -> Vector2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vector2::new(1.0, 0.0)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vector2 {
    type Output = Vector2;
    fn add(self, o: Vector2) -> Vector2 {
        Vector2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vector2 {
    fn add_assign(&mut self, o: Vector2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vector2 {
    type Output = Vector2;
    fn sub(self, o: Vector2) -> Vector2 {
        Vector2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vector2 {
    fn sub_assign(&mut self, o: Vector2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vector2 {
    type Output = Vector2;
    fn mul(self, s: f64) -> Vector2 {
        Vector2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vector2 {
    type Output = Vector2;
    fn neg(self) -> Vector2 {
        Vector2::new(-self.x, -self.y)
    }
}

/// Planar platform position and velocity in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlatformState {
    pub position: Vector2,
    pub velocity: Vector2,
}

impl PlatformState {
    pub fn at(position: Vector2) -> Self {
        Self {
            position,
            velocity: Vector2::ZERO,
        }
    }
}

/// Saturation interval and symmetric rate limit of one actuator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLimit {
    pub min: f64,
    pub max: f64,
    /// Maximum absolute rate of change per second.
    pub rate: f64,
}

impl ActuatorLimit {
    pub fn saturate(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }

    /// Saturates `target` and limits the change from `previous` over `dt`.
    pub fn apply(&self, previous: f64, target: f64, dt: f64) -> f64 {
        let max_step = self.rate * dt;
        let stepped = previous + (target - previous).clamp(-max_step, max_step);
        self.saturate(stepped)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }
}

/// Collective blade pitch saturation and rate limit (deg, deg/s).
pub const PITCH_LIMIT: ActuatorLimit = ActuatorLimit {
    min: -30.0,
    max: 0.0,
    rate: 8.0,
};

/// Generator torque saturation and rate limit (N·m, N·m/s).
pub const TORQUE_LIMIT: ActuatorLimit = ActuatorLimit {
    min: 0.0,
    max: 47_402.0,
    rate: 15_000.0,
};

/// Nacelle yaw saturation and rate limit (deg, deg/s).
pub const YAW_LIMIT: ActuatorLimit = ActuatorLimit {
    min: -60.0,
    max: 60.0,
    rate: 0.3,
};

/// Admissible generator speed band when grid-connected, rpm.
pub const GENERATOR_SPEED_MIN_RPM: f64 = 669.3;
pub const GENERATOR_SPEED_MAX_RPM: f64 = 1173.7;

pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * std::f64::consts::PI / 30.0
}

pub fn rad_s_to_rpm(w: f64) -> f64 {
    w * 30.0 / std::f64::consts::PI
}

/// Effective control inputs of one turbine.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInputs {
    /// Collective blade pitch, degrees.
    pub blade_pitch: f64,
    /// Generator torque, N·m.
    pub generator_torque: f64,
    /// Nacelle yaw from `x`, degrees.
    pub nacelle_yaw: f64,
}

impl ControlInputs {
    pub fn within_saturation(&self) -> bool {
        PITCH_LIMIT.contains(self.blade_pitch)
            && TORQUE_LIMIT.contains(self.generator_torque)
            && YAW_LIMIT.contains(self.nacelle_yaw)
    }

    /// Applies every saturation and rate limit relative to `previous`.
    pub fn limited(&self, previous: &ControlInputs, dt: f64) -> ControlInputs {
        ControlInputs {
            blade_pitch: PITCH_LIMIT.apply(previous.blade_pitch, self.blade_pitch, dt),
            generator_torque: TORQUE_LIMIT.apply(
                previous.generator_torque,
                self.generator_torque,
                dt,
            ),
            nacelle_yaw: YAW_LIMIT.apply(previous.nacelle_yaw, self.nacelle_yaw, dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineGeometry {
    pub rotor_diameter: f64,
    pub hub_height: f64,
    pub index: usize,
}

/// Ordered farm: upstream to downstream along `x` at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmLayout {
    pub turbines: Vec<TurbineGeometry>,
    pub initial: Vec<PlatformState>,
    /// Neutral (unloaded) mooring position of each platform.
    pub mooring_origin: Vec<Vector2>,
}

impl FarmLayout {
    pub fn len(&self) -> usize {
        self.turbines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turbines.is_empty()
    }
}

/// Incident wind seen by a moving rotor: `V - v`.
pub fn relative_wind(effective_wind: Vector2, platform_velocity: Vector2) -> Vector2 {
    effective_wind - platform_velocity
}

/// Wind speed projected on the rotor normal: `|V_rel| cos(γ - θ_rel)`.
pub fn projected_speed(relative_wind: Vector2, yaw_deg: f64) -> f64 {
    let speed = relative_wind.norm();
    if speed == 0.0 {
        return 0.0;
    }
    let theta = relative_wind.y.atan2(relative_wind.x);
    speed * (yaw_deg.to_radians() - theta).cos()
}

pub fn rotor_normal(yaw_deg: f64) -> Vector2 {
    let (s, c) = yaw_deg.to_radians().sin_cos();
    Vector2::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relative_wind_examples() {
        let w = Vector2::new(14.0, 0.0);
        assert_eq!(relative_wind(w, Vector2::ZERO), w);
        assert_eq!(relative_wind(w, w), Vector2::ZERO);
        assert_eq!(
            relative_wind(Vector2::new(14.0, 2.0), Vector2::new(1.0, -1.0)),
            Vector2::new(13.0, 3.0)
        );
    }

    #[test]
    fn projected_speed_examples() {
        assert!((projected_speed(Vector2::new(14.0, 0.0), 0.0) - 14.0).abs() < 1e-12);
        assert!((projected_speed(Vector2::new(14.0, 0.0), 60.0) - 7.0).abs() < 1e-12);
        assert!((projected_speed(Vector2::new(0.0, 10.0), 90.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rotor_normal_examples() {
        let n = rotor_normal(0.0);
        assert!((n.x - 1.0).abs() < 1e-15 && n.y.abs() < 1e-15);
        let n = rotor_normal(90.0);
        assert!(n.x.abs() < 1e-15 && (n.y - 1.0).abs() < 1e-15);
        let n = rotor_normal(30.0);
        assert!((n.x - 0.866_025_403_784).abs() < 1e-9 && (n.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rate_limited_yaw_step() {
        let prev = ControlInputs::default();
        let cmd = ControlInputs {
            nacelle_yaw: 10.0,
            ..prev
        };
        let out = cmd.limited(&prev, 1.0);
        assert!((out.nacelle_yaw - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projected_speed_bounded(x in -30.0..30.0f64, y in -30.0..30.0f64, yaw in -60.0..60.0f64) {
            let v = Vector2::new(x, y);
            prop_assert!(projected_speed(v, yaw) <= v.norm() + 1e-12);
            prop_assert!((projected_speed(v, v.angle_deg()) - v.norm()).abs() < 1e-9);
        }

        #[test]
        fn rotor_normal_is_unit(yaw in -360.0..360.0f64) {
            prop_assert!((rotor_normal(yaw).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn relative_wind_round_trip(ax in -1e3..1e3f64, ay in -1e3..1e3f64, bx in -1e3..1e3f64, by in -1e3..1e3f64) {
            let a = Vector2::new(ax, ay);
            let b = Vector2::new(bx, by);
            let r = relative_wind(a, b) + b;
            // (a - b) + b is exact only up to rounding
            prop_assert!((r.x - a.x).abs() <= 1e-12 * a.x.abs().max(b.x.abs()).max(1.0));
            prop_assert!((r.y - a.y).abs() <= 1e-12 * a.y.abs().max(b.y.abs()).max(1.0));
        }
    }
}
