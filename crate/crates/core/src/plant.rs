//! Planar platform dynamics, the two-mass drivetrain and electrical power.
//!
//! The platform moves in surge and sway under rotor thrust, quadratic
//! viscous drag, linear radiation damping and catenary mooring. Positions are
//! advanced with semi-implicit Euler. The drivetrain is sub-stepped with RK4.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::aero::{thrust_coefficient_from_induction, thrust_force, AeroParams};
use crate::error::{Error, Result};
use crate::frame::{projected_speed, relative_wind, ControlInputs, PlatformState, Vector2};
use crate::mooring::MooringSystem;
use crate::params::{DrivetrainParams, HydroParams, PhysicalParams};

/// Largest drivetrain sub-step, s.
pub const DRIVETRAIN_SUBSTEP: f64 = 0.05;

/// Quadratic viscous drag `-½ Σ(C_d A) ρ_w |v| v`.
pub fn hydro_drag(hydro: &HydroParams, velocity: Vector2) -> Vector2 {
    velocity * (-0.5 * hydro.drag_sum * hydro.water_density * velocity.norm())
}

/// Viscous drag plus linear radiation damping.
pub fn hydro_force(hydro: &HydroParams, velocity: Vector2) -> Vector2 {
    hydro_drag(hydro, velocity) - velocity * hydro.linear_damping
}

/// `(F_a + F_h + F_m) / (m + m_a)`.
pub fn platform_acceleration(
    thrust: Vector2,
    hydro: Vector2,
    mooring: Vector2,
    params: &HydroParams,
) -> Vector2 {
    (thrust + hydro + mooring) * (1.0 / params.total_mass())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DrivetrainState {
    /// Low-speed shaft speed, rad/s.
    pub rotor_speed: f64,
    /// High-speed shaft speed, rad/s.
    pub generator_speed: f64,
    /// Low-speed shaft twist, rad.
    pub shaft_twist: f64,
}

impl DrivetrainState {
    /// Steady state at `generator_speed` transmitting `generator_torque`.
    pub fn steady(params: &DrivetrainParams, generator_speed: f64, generator_torque: f64) -> Self {
        Self {
            rotor_speed: generator_speed / params.gear_ratio,
            generator_speed,
            shaft_twist: generator_torque * params.gear_ratio / params.shaft_stiffness,
        }
    }

    fn derivative(&self, p: &DrivetrainParams, aero_torque: f64, gen_torque: f64) -> [f64; 3] {
        let shaft = p.shaft_stiffness * self.shaft_twist
            + p.shaft_damping * (self.rotor_speed - self.generator_speed / p.gear_ratio);
        [
            (aero_torque - shaft) / p.rotor_inertia,
            (shaft / p.gear_ratio - gen_torque) / p.generator_inertia,
            self.rotor_speed - self.generator_speed / p.gear_ratio,
        ]
    }

    fn offset(&self, d: [f64; 3], h: f64) -> Self {
        Self {
            rotor_speed: self.rotor_speed + h * d[0],
            generator_speed: self.generator_speed + h * d[1],
            shaft_twist: self.shaft_twist + h * d[2],
        }
    }
}

/// One RK4 step of the two-mass drivetrain under constant torques.
pub fn drivetrain_step(
    state: &DrivetrainState,
    params: &DrivetrainParams,
    aero_torque: f64,
    gen_torque: f64,
    dt: f64,
) -> DrivetrainState {
    let k1 = state.derivative(params, aero_torque, gen_torque);
    let k2 = state
        .offset(k1, 0.5 * dt)
        .derivative(params, aero_torque, gen_torque);
    let k3 = state
        .offset(k2, 0.5 * dt)
        .derivative(params, aero_torque, gen_torque);
    let k4 = state
        .offset(k3, dt)
        .derivative(params, aero_torque, gen_torque);
    let mix = [0, 1, 2].map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
    state.offset(mix, dt)
}

/// Electrical power `τ_g ω_g η_g`, W.
pub fn power_output(generator_torque: f64, generator_speed: f64, efficiency: f64) -> f64 {
    generator_torque * generator_speed * efficiency
}

pub fn farm_power(powers: &[f64]) -> f64 {
    powers.iter().sum()
}

/// How rotor forces and power are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RotorModel {
    /// Coefficient table, drivetrain and generator.
    Full,
    /// Fixed axial induction with power at the table's best `C_p`.
    FixedInduction(f64),
}

/// Shared, immutable inputs of every turbine plant.
#[derive(Debug)]
pub struct PlantEnv {
    pub params: PhysicalParams,
    pub aero: AeroParams,
    pub mooring: Arc<MooringSystem>,
    best_power_coefficient: f64,
}

impl PlantEnv {
    pub fn new(params: PhysicalParams) -> Result<Self> {
        let aero = params.aero()?;
        let mooring = Arc::new(MooringSystem::from_layout(&params.mooring)?);
        let best_power_coefficient = aero.table.max_power_coefficient();
        Ok(Self {
            params,
            aero,
            mooring,
            best_power_coefficient,
        })
    }

    /// Rated-capped power available from a rotor-normal wind speed.
    pub fn available_power(&self, normal_speed: f64) -> f64 {
        let v = normal_speed.max(0.0);
        let p = self.params.drivetrain.generator_efficiency
            * 0.5
            * self.aero.air_density
            * self.aero.rotor_area()
            * self.best_power_coefficient
            * v
            * v
            * v;
        p.min(self.params.operating.rated_power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantOutput {
    pub thrust: Vector2,
    pub acceleration: Vector2,
    pub relative_wind: Vector2,
    pub normal_speed: f64,
    pub thrust_coefficient: f64,
    pub induction: f64,
    pub power: f64,
    /// Thrust too weak against mooring to move the platform further.
    pub repositioning_infeasible: bool,
}

#[derive(Debug, Clone)]
pub struct TurbinePlant {
    pub index: usize,
    /// Neutral mooring position in the farm frame.
    pub origin: Vector2,
    pub platform: PlatformState,
    pub drivetrain: DrivetrainState,
    pub applied: ControlInputs,
    pub model: RotorModel,
}

impl TurbinePlant {
    pub fn new(index: usize, origin: Vector2, platform: PlatformState, model: RotorModel) -> Self {
        Self {
            index,
            origin,
            platform,
            drivetrain: DrivetrainState::default(),
            applied: ControlInputs::default(),
            model,
        }
    }

    pub fn mooring_force(&self, env: &PlantEnv) -> Result<Vector2> {
        env.mooring.net_force(self.platform.position - self.origin)
    }

    /// Rotor forces at the current state without advancing it.
    pub fn rotor_output(&self, env: &PlantEnv, wind: Vector2) -> PlantOutput {
        let v_rel = relative_wind(wind, self.platform.velocity);
        let yaw = self.applied.nacelle_yaw;
        let vn = projected_speed(v_rel, yaw);
        let (ct, power) = match self.model {
            RotorModel::Full => (
                env.aero.thrust_coefficient(
                    self.drivetrain.rotor_speed,
                    vn,
                    self.applied.blade_pitch,
                ),
                crate::plant::power_output(
                    self.applied.generator_torque,
                    self.drivetrain.generator_speed,
                    env.params.drivetrain.generator_efficiency,
                ),
            ),
            RotorModel::FixedInduction(a) => (
                thrust_coefficient_from_induction(a),
                env.available_power(vn),
            ),
        };
        let induction = match self.model {
            RotorModel::FixedInduction(a) => a,
            RotorModel::Full => crate::aero::induction_from_thrust_coefficient(ct),
        };
        PlantOutput {
            thrust: thrust_force(&env.aero, v_rel, yaw, ct),
            acceleration: Vector2::ZERO,
            relative_wind: v_rel,
            normal_speed: vn,
            thrust_coefficient: ct,
            induction,
            power,
            repositioning_infeasible: false,
        }
    }

    /// Applies `command` through the actuator limits and advances one step.
    pub fn step(
        &mut self,
        env: &PlantEnv,
        wind: Vector2,
        command: &ControlInputs,
        dt: f64,
    ) -> Result<PlantOutput> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "plant step dt must be positive, got {dt}"
            )));
        }
        self.applied = command.limited(&self.applied, dt);
        let mut out = self.rotor_output(env, wind);

        if self.model == RotorModel::Full {
            let n = (dt / DRIVETRAIN_SUBSTEP).ceil().max(1.0) as usize;
            let h = dt / n as f64;
            for _ in 0..n {
                let tau_a = env.aero.torque(
                    self.drivetrain.rotor_speed,
                    out.normal_speed,
                    self.applied.blade_pitch,
                );
                self.drivetrain = drivetrain_step(
                    &self.drivetrain,
                    &env.params.drivetrain,
                    tau_a,
                    self.applied.generator_torque,
                    h,
                );
            }
            out.power = power_output(
                self.applied.generator_torque,
                self.drivetrain.generator_speed,
                env.params.drivetrain.generator_efficiency,
            );
        }

        let f_m = self.mooring_force(env)?;
        let f_h = hydro_force(&env.params.hydro, self.platform.velocity);
        let acc = platform_acceleration(out.thrust, f_h, f_m, &env.params.hydro);
        self.platform.velocity += acc * dt;
        self.platform.position += self.platform.velocity * dt;
        out.acceleration = acc;
        out.repositioning_infeasible = out.thrust.norm() < 0.05 * f_m.norm();
        Ok(out)
    }
}

/// Rotor power `½ ρ A C_p V³` for a given coefficient, used in tests and reports.
pub fn rotor_power(diameter: f64, air_density: f64, cp: f64, speed: f64) -> f64 {
    0.5 * air_density * 0.25 * PI * diameter * diameter * cp * speed.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{rpm_to_rad_s, PITCH_LIMIT, YAW_LIMIT};

    fn dt_params() -> DrivetrainParams {
        PhysicalParams::default().drivetrain
    }

    #[test]
    fn hydro_drag_example() {
        let h = HydroParams {
            water_density: 1025.0,
            drag_sum: 1000.0,
            mass: 1.0,
            added_mass: 0.0,
            linear_damping: 0.0,
        };
        let f = hydro_drag(&h, Vector2::new(0.5, 0.0));
        assert_eq!(f, Vector2::new(-128125.0, 0.0));
        let f = hydro_drag(&h, Vector2::new(-0.5, 0.0));
        assert_eq!(f, Vector2::new(128125.0, 0.0));
    }

    #[test]
    fn acceleration_example() {
        let h = PhysicalParams::default().hydro;
        let a = platform_acceleration(Vector2::new(1.45e5, 0.0), Vector2::ZERO, Vector2::ZERO, &h);
        assert!((a.x - 0.01).abs() < 1e-12 && a.y == 0.0);
    }

    #[test]
    fn balanced_drivetrain_stays_put() {
        let p = dt_params();
        let wg = rpm_to_rad_s(1173.7);
        let tg = 43_094.0;
        let s = DrivetrainState::steady(&p, wg, tg);
        let next = drivetrain_step(&s, &p, tg * p.gear_ratio, tg, 0.01);
        assert!((next.rotor_speed - s.rotor_speed).abs() < 1e-12);
        assert!((next.generator_speed - s.generator_speed).abs() < 1e-9);
    }

    #[test]
    fn rated_power_example() {
        let p = power_output(43_094.0, rpm_to_rad_s(1173.7), 0.944);
        assert!((p - 5.0e6).abs() < 0.01 * 5.0e6, "{p}");
    }

    #[test]
    fn stiff_shaft_spins_up_rotor() {
        let p = dt_params();
        let s = DrivetrainState::default();
        let t = 1.0e6;
        let dt = 1e-3;
        let next = drivetrain_step(&s, &p, t, 0.0, dt);
        let expect = t * dt / p.rotor_inertia;
        assert!((next.rotor_speed - expect).abs() < 1e-3 * expect);
    }

    #[test]
    fn actuator_limits_hold_for_any_command() {
        let env = PlantEnv::new(PhysicalParams::default()).unwrap();
        let mut plant =
            TurbinePlant::new(0, Vector2::ZERO, PlatformState::default(), RotorModel::Full);
        plant.drivetrain =
            DrivetrainState::steady(&env.params.drivetrain, rpm_to_rad_s(1000.0), 30_000.0);
        let wild = ControlInputs {
            blade_pitch: 45.0,
            generator_torque: 1e9,
            nacelle_yaw: -200.0,
        };
        let before = plant.applied;
        plant
            .step(&env, Vector2::new(10.0, 0.0), &wild, 0.5)
            .unwrap();
        assert!(plant.applied.within_saturation());
        assert!(
            (plant.applied.nacelle_yaw - before.nacelle_yaw).abs() <= YAW_LIMIT.rate * 0.5 + 1e-12
        );
        assert!(plant.applied.blade_pitch <= PITCH_LIMIT.max);
    }

    #[test]
    fn calm_water_platform_converges_to_neutral() {
        let env = PlantEnv::new(PhysicalParams::default()).unwrap();
        let start = PlatformState {
            position: Vector2::new(20.0, -15.0),
            velocity: Vector2::new(0.3, 0.1),
        };
        let mut plant = TurbinePlant::new(0, Vector2::ZERO, start, RotorModel::FixedInduction(0.3));
        for _ in 0..4000 {
            plant
                .step(&env, Vector2::ZERO, &ControlInputs::default(), 0.5)
                .unwrap();
        }
        assert!(
            plant.platform.velocity.norm() < 1e-3,
            "{:?}",
            plant.platform
        );
        let f = plant.mooring_force(&env).unwrap();
        assert!(f.norm() < 1e3, "{f:?}");
    }

    #[test]
    fn fixed_induction_power_caps_at_rated() {
        let env = PlantEnv::new(PhysicalParams::default()).unwrap();
        assert_eq!(env.available_power(25.0), 5.0e6);
        let low = env.available_power(8.0);
        let cp = env.aero.table.max_power_coefficient();
        let expect = 0.944 * rotor_power(126.0, 1.225, cp, 8.0);
        assert!((low - expect).abs() < 1e-6 * expect);
    }
}
