//! Constant-power generator torque law.
//!
//! The generator draws `τ_g = P / (η_g ω_g)`. When the rotor cannot supply
//! the demanded power at zero pitch, the demand falls back to the available
//! power scaled by a proportional speed term, which pins the generator speed
//! to its setpoint instead of letting it drift.

use crate::aero::AeroParams;
use crate::frame::{rpm_to_rad_s, GENERATOR_SPEED_MIN_RPM, TORQUE_LIMIT};
use crate::params::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulatorConfig {
    pub efficiency: f64,
    pub gear_ratio: f64,
    /// Generator speed setpoint, rad/s.
    pub speed_setpoint: f64,
    pub speed_gain: f64,
}

impl RegulatorConfig {
    pub fn from_params(p: &PhysicalParams) -> Self {
        Self {
            efficiency: p.drivetrain.generator_efficiency,
            gear_ratio: p.drivetrain.gear_ratio,
            speed_setpoint: p.generator_speed_setpoint(),
            speed_gain: p.operating.speed_feedback_gain,
        }
    }
}

/// Electrical power the rotor could deliver at zero pitch, W.
pub fn available_power(
    aero: &AeroParams,
    cfg: &RegulatorConfig,
    generator_speed: f64,
    normal_speed: f64,
) -> f64 {
    let rotor_speed = generator_speed / cfg.gear_ratio;
    cfg.efficiency * aero.torque(rotor_speed, normal_speed, 0.0) * rotor_speed
}

/// Electrical power the generator is asked to deliver.
pub fn power_demand(
    target: f64,
    available: f64,
    generator_speed: f64,
    cfg: &RegulatorConfig,
) -> f64 {
    let err = (generator_speed - cfg.speed_setpoint) / cfg.speed_setpoint;
    let fallback = available * (1.0 + cfg.speed_gain * err);
    target.min(fallback).max(0.0)
}

/// Generator speed below which the torque command is held, rad/s.
pub fn speed_floor() -> f64 {
    rpm_to_rad_s(0.95 * GENERATOR_SPEED_MIN_RPM)
}

/// Saturated generator torque that delivers `power` at `generator_speed`.
/// Below [`speed_floor`] the division uses the floor speed.
pub fn torque_command(power: f64, generator_speed: f64, efficiency: f64) -> f64 {
    TORQUE_LIMIT.saturate(power / (efficiency * generator_speed.max(speed_floor())))
}

/// Full law: demand from `target` and the measured rotor inflow, then torque.
pub fn regulate(
    aero: &AeroParams,
    cfg: &RegulatorConfig,
    target: f64,
    generator_speed: f64,
    normal_speed: f64,
) -> f64 {
    let avail = available_power(aero, cfg, generator_speed, normal_speed);
    torque_command(
        power_demand(target, avail, generator_speed, cfg),
        generator_speed,
        cfg.efficiency,
    )
}
