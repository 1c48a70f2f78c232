//! Per-turbine control: MPC for blade pitch and nacelle yaw, the
//! constant-power law for generator torque.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{
    projected_speed, relative_wind, ControlInputs, FarmLayout, PlatformState, Vector2, PITCH_LIMIT,
    TORQUE_LIMIT, YAW_LIMIT,
};
use crate::mpc::{ConstraintSet, MpcConfig, MpcController, MpcModel, MpcReference};
use crate::plant::{DrivetrainState, PlantEnv, RotorModel, TurbinePlant};
use crate::predictive::{
    idx, EquilibriumPoint, PredictiveModel, ReducedState, Region, StateVector,
};
use crate::regulator::{self, RegulatorConfig};
use crate::sim::{steady_field, ControlContext, ControlDiagnostic, FarmControl};

/// Relative headroom band around the rated point for switching regions.
const REGION_HYSTERESIS: f64 = 0.03;

/// Integral gain from sway error to the yaw reference, deg per m·s. The
/// equilibrium yaw holds the platform at the target only under the inflow
/// it was solved for, so the reference drifts to remove the steady offset.
const YAW_INTEGRAL_GAIN: f64 = 0.001;
/// Sway error beyond which the yaw reference is frozen, so the long transit
/// to a new target does not wind it up, m.
const YAW_INTEGRAL_BAND: f64 = 10.0;

/// What one turbine is asked to do over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbinePlan {
    /// Sway held before `start_delay`, relative to the mooring neutral point.
    pub initial_y: f64,
    /// Sway target after `start_delay`.
    pub target_y: f64,
    pub start_delay: f64,
    /// Electrical power demand, W.
    pub power_target: f64,
}

#[derive(Debug, Clone)]
pub struct TurbineController {
    pub index: usize,
    pub plan: TurbinePlan,
    pub mpc: MpcController,
    pub regulator: RegulatorConfig,
    pub sample_time: f64,
    previous: ControlInputs,
    /// Yaw the MPC input penalty pulls toward, deg. Integrates sway error
    /// and carries over region switches.
    yaw_reference: f64,
}

impl TurbineController {
    pub fn previous(&self) -> ControlInputs {
        self.previous
    }

    /// Operating region from the rotor headroom, with a hysteresis band so
    /// gusts near rated do not flip the linearization every sample.
    fn region(&self, env: &PlantEnv, generator_speed: f64, normal_speed: f64) -> Region {
        let avail =
            regulator::available_power(&env.aero, &self.regulator, generator_speed, normal_speed);
        let headroom =
            regulator::power_demand(f64::INFINITY, avail, generator_speed, &self.regulator)
                / self.plan.power_target.max(1.0);
        match self.mpc.region() {
            Region::PowerLimited if headroom > 1.0 + REGION_HYSTERESIS => Region::PitchRegulated,
            Region::PitchRegulated
                if headroom < 1.0 - REGION_HYSTERESIS && self.previous.blade_pitch.abs() < 0.5 =>
            {
                Region::PowerLimited
            }
            r => r,
        }
    }

    /// One control step: torque from the regulator, pitch and yaw from the
    /// MPC, every channel limited against the previous emitted command.
    pub fn step(
        &mut self,
        env: &PlantEnv,
        plant: &TurbinePlant,
        wind: Vector2,
        time: f64,
    ) -> (ControlInputs, ControlDiagnostic) {
        let repositioning = time >= self.plan.start_delay;
        let target = if repositioning {
            self.plan.target_y
        } else {
            self.plan.initial_y
        };
        let w_g = plant.drivetrain.generator_speed;
        let v_n = projected_speed(
            relative_wind(wind, plant.platform.velocity),
            plant.applied.nacelle_yaw,
        );
        let region = self.region(env, w_g, v_n);
        let retarget = self.mpc.target_y() != target;
        if retarget || self.mpc.region() != region {
            // every plan target was linearized at build time
            let _ = self.mpc.select(target, region);
        }
        if retarget {
            self.yaw_reference = self.mpc.active().equilibrium.inputs.nacelle_yaw;
        }
        let torque = if w_g < regulator::speed_floor() {
            self.previous.generator_torque
        } else {
            regulator::regulate(&env.aero, &self.regulator, self.plan.power_target, w_g, v_n)
        };

        let x = ReducedState::from_plant(plant, &self.mpc.active().equilibrium.state);
        let y = plant.platform.position.y - plant.origin.y;
        let error = target - y;
        if error.abs() < YAW_INTEGRAL_BAND {
            self.yaw_reference = YAW_LIMIT
                .saturate(self.yaw_reference + YAW_INTEGRAL_GAIN * self.sample_time * error);
        }
        let eq = &self.mpc.active().equilibrium;
        let reference = MpcReference {
            output_shift: [0.0, target - eq.state[idx::Y], 0.0],
            inputs: [eq.inputs.blade_pitch, self.yaw_reference],
        };
        let mpc = self.mpc.step(&x, wind, &self.previous, &reference);
        let raw = ControlInputs {
            blade_pitch: mpc.inputs.blade_pitch,
            generator_torque: TORQUE_LIMIT.saturate(torque),
            nacelle_yaw: mpc.inputs.nacelle_yaw,
        };
        let cmd = raw.limited(&self.previous, self.sample_time);
        self.previous = cmd;
        (
            cmd,
            ControlDiagnostic {
                cost: mpc.cost,
                active_mask: mpc.active_mask,
                degraded: mpc.degraded,
                target_y: target,
                yaw_reference: self.yaw_reference,
                power_target: self.plan.power_target,
            },
        )
    }
}

/// MPC control for the whole farm. Turbines are stepped in parallel; each
/// controller only touches its own state.
pub struct FarmMpcControl {
    pub controllers: Vec<TurbineController>,
}

impl FarmControl for FarmMpcControl {
    fn command(
        &mut self,
        ctx: &ControlContext<'_>,
    ) -> Result<Vec<(ControlInputs, ControlDiagnostic)>> {
        Ok(self
            .controllers
            .par_iter_mut()
            .map(|c| {
                c.step(
                    ctx.env,
                    &ctx.plants[c.index],
                    ctx.effective[c.index],
                    ctx.time,
                )
            })
            .collect())
    }
}

/// Gains of the baseline pitch governor on relative generator speed error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorGains {
    /// Pitch per unit relative speed error, deg.
    pub proportional: f64,
    /// Pitch rate per unit relative speed error, deg/s.
    pub integral: f64,
}

impl Default for GovernorGains {
    fn default() -> Self {
        Self {
            proportional: 60.0,
            integral: 20.0,
        }
    }
}

/// Fixed-yaw turbine: constant-power torque and a PI pitch governor.
#[derive(Debug, Clone)]
pub struct GovernorController {
    pub index: usize,
    pub power_target: f64,
    pub regulator: RegulatorConfig,
    pub gains: GovernorGains,
    pub sample_time: f64,
    previous: ControlInputs,
    last_error: f64,
}

impl GovernorController {
    pub fn step(
        &mut self,
        env: &PlantEnv,
        plant: &TurbinePlant,
        wind: Vector2,
    ) -> (ControlInputs, ControlDiagnostic) {
        let w_g = plant.drivetrain.generator_speed;
        let v_n = projected_speed(
            relative_wind(wind, plant.platform.velocity),
            plant.applied.nacelle_yaw,
        );
        let torque = if w_g < regulator::speed_floor() {
            self.previous.generator_torque
        } else {
            regulator::regulate(&env.aero, &self.regulator, self.power_target, w_g, v_n)
        };
        let error = (w_g - self.regulator.speed_setpoint) / self.regulator.speed_setpoint;
        // velocity form, so pitch saturation needs no separate anti-windup
        let pitch = self.previous.blade_pitch
            - self.gains.proportional * (error - self.last_error)
            - self.gains.integral * self.sample_time * error;
        self.last_error = error;
        let raw = ControlInputs {
            blade_pitch: PITCH_LIMIT.saturate(pitch),
            generator_torque: TORQUE_LIMIT.saturate(torque),
            nacelle_yaw: 0.0,
        };
        let cmd = raw.limited(&self.previous, self.sample_time);
        self.previous = cmd;
        (
            cmd,
            ControlDiagnostic {
                power_target: self.power_target,
                ..ControlDiagnostic::default()
            },
        )
    }
}

/// Farm without repositioning: every turbine holds zero yaw.
pub struct FarmGovernorControl {
    pub controllers: Vec<GovernorController>,
}

impl FarmControl for FarmGovernorControl {
    fn command(
        &mut self,
        ctx: &ControlContext<'_>,
    ) -> Result<Vec<(ControlInputs, ControlDiagnostic)>> {
        Ok(self
            .controllers
            .iter_mut()
            .map(|c| c.step(ctx.env, &ctx.plants[c.index], ctx.effective[c.index]))
            .collect())
    }
}

/// Governor controllers started from the zero-sway operating point of each
/// turbine under the steady inflow of the whole farm.
pub fn build_governors(
    env: &PlantEnv,
    layout: &FarmLayout,
    power_targets: &[f64],
    mean_wind: Vector2,
    gains: GovernorGains,
    sample_time: f64,
) -> Result<(FarmGovernorControl, Vec<(ControlInputs, DrivetrainState)>)> {
    if power_targets.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "{} power targets for {} turbines",
            power_targets.len(),
            layout.len()
        )));
    }
    let a = env.params.operating.episode_induction;
    let zero = vec![0.0; layout.len()];
    let (points, _) = farm_operating_points(env, layout, &zero, power_targets, mean_wind, a)?;
    let reg = RegulatorConfig::from_params(&env.params);
    let mut controllers = Vec::with_capacity(layout.len());
    let mut initial = Vec::with_capacity(layout.len());
    for (i, eq) in points.iter().enumerate() {
        let inputs = ControlInputs {
            nacelle_yaw: 0.0,
            ..eq.inputs
        };
        let drivetrain = DrivetrainState::steady(
            &env.params.drivetrain,
            eq.state[idx::GENERATOR],
            eq.inputs.generator_torque,
        );
        controllers.push(GovernorController {
            index: i,
            power_target: power_targets[i],
            regulator: reg,
            gains,
            sample_time,
            previous: inputs,
            last_error: 0.0,
        });
        initial.push((inputs, drivetrain));
    }
    Ok((FarmGovernorControl { controllers }, initial))
}

/// Controllers plus the initial plant conditions they were built around.
pub struct ControlSetup {
    pub control: FarmMpcControl,
    pub initial: Vec<(ControlInputs, DrivetrainState)>,
    /// Equilibria at the hold and target positions.
    pub hold: Vec<EquilibriumPoint>,
    pub target: Vec<EquilibriumPoint>,
}

fn wrap_turbine(i: usize) -> impl Fn(Error) -> Error + Copy {
    move |e| Error::Step {
        step: 0,
        turbine: i,
        source: Box::new(e),
    }
}

/// Operating points of every turbine at sways `ys`, each under the steady
/// inflow left by the operating points upstream. The first pass assumes a
/// fixed induction and zero yaw; each later pass rebuilds the wakes from
/// the previous operating points, so one pass per turbine resolves the
/// whole upstream chain.
fn farm_operating_points(
    env: &PlantEnv,
    layout: &FarmLayout,
    ys: &[f64],
    power_targets: &[f64],
    free: Vector2,
    induction: f64,
) -> Result<(Vec<EquilibriumPoint>, Vec<Vector2>)> {
    let n = layout.len();
    let mut points: Option<Vec<EquilibriumPoint>> = None;
    let mut inflow = Vec::new();
    for _ in 0..n.max(1) {
        let plants: Vec<TurbinePlant> = (0..n)
            .map(|i| {
                let origin = layout.mooring_origin[i];
                match &points {
                    None => {
                        let pos = Vector2::new(layout.initial[i].position.x, origin.y + ys[i]);
                        TurbinePlant::new(
                            i,
                            origin,
                            PlatformState::at(pos),
                            RotorModel::FixedInduction(induction),
                        )
                    }
                    Some(eq) => {
                        let e = &eq[i];
                        let pos = origin + Vector2::new(e.state[idx::X], e.state[idx::Y]);
                        let mut p =
                            TurbinePlant::new(i, origin, PlatformState::at(pos), RotorModel::Full);
                        p.applied = e.inputs;
                        p.drivetrain = DrivetrainState::steady(
                            &env.params.drivetrain,
                            e.state[idx::GENERATOR],
                            e.inputs.generator_torque,
                        );
                        p
                    }
                }
            })
            .collect();
        inflow = steady_field(env, layout, &plants, free)?.1;
        let solved: Result<Vec<EquilibriumPoint>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let model = PredictiveModel::new(env);
                let guess = match &points {
                    Some(eq) => eq[i].state,
                    None => {
                        let mut g = StateVector::zeros();
                        g[idx::X] = layout.initial[i].position.x - layout.mooring_origin[i].x;
                        g
                    }
                };
                model
                    .operating_point(ys[i], inflow[i], power_targets[i], &guess)
                    .map_err(wrap_turbine(i))
            })
            .collect();
        points = Some(solved?);
    }
    Ok((points.expect("at least one pass"), inflow))
}

/// Controller, initial plant state, and hold and target operating points.
type BuiltTurbine = (
    TurbineController,
    (ControlInputs, DrivetrainState),
    EquilibriumPoint,
    EquilibriumPoint,
);

/// Linearizes every turbine at its hold and target positions under the
/// steady inflow of each configuration.
pub fn build_controllers(
    env: &PlantEnv,
    layout: &FarmLayout,
    plans: &[TurbinePlan],
    mean_wind: Vector2,
    config: MpcConfig,
    constraints: ConstraintSet,
) -> Result<ControlSetup> {
    if plans.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "{} turbine plans for {} turbines",
            plans.len(),
            layout.len()
        )));
    }
    let a = env.params.operating.episode_induction;
    let hold_y: Vec<f64> = plans.iter().map(|p| p.initial_y).collect();
    let target_y: Vec<f64> = plans.iter().map(|p| p.target_y).collect();
    let power: Vec<f64> = plans.iter().map(|p| p.power_target).collect();
    let (hold_points, hold_wind) =
        farm_operating_points(env, layout, &hold_y, &power, mean_wind, a)?;
    let (target_points, target_wind) =
        farm_operating_points(env, layout, &target_y, &power, mean_wind, a)?;
    let reg = RegulatorConfig::from_params(&env.params);

    let built: Vec<Result<BuiltTurbine>> = (0..layout.len())
        .into_par_iter()
        .map(|i| {
            let model = PredictiveModel::new(env);
            let plan = plans[i];
            let wrap = wrap_turbine(i);
            let hold = hold_points[i].clone();
            let target = target_points[i].clone();
            let mut mpc = MpcController::new(
                MpcModel::new(&model, hold.clone(), config, constraints).map_err(wrap)?,
            );
            let linearize = |eq: EquilibriumPoint| MpcModel::new(&model, eq, config, constraints);
            mpc.add_model(linearize(target.clone()).map_err(wrap)?);
            for (y, wind, eq) in [
                (plan.initial_y, hold_wind[i], &hold),
                (plan.target_y, target_wind[i], &target),
            ] {
                if !mpc.has_model(y, Region::PitchRegulated) {
                    let pr = model
                        .pitch_regulated_point(y, wind, plan.power_target, &eq.state)
                        .map_err(wrap)?;
                    mpc.add_model(linearize(pr).map_err(wrap)?);
                }
                if !mpc.has_model(y, Region::PowerLimited) {
                    let pl = model
                        .power_limited_point(y, wind, plan.power_target, &eq.state)
                        .map_err(wrap)?;
                    mpc.add_model(linearize(pl).map_err(wrap)?);
                }
            }
            mpc.select(plan.initial_y, hold.region).map_err(wrap)?;
            let drivetrain = DrivetrainState::steady(
                &env.params.drivetrain,
                hold.state[idx::GENERATOR],
                hold.inputs.generator_torque,
            );
            let ctl = TurbineController {
                index: i,
                plan,
                mpc,
                regulator: reg,
                sample_time: config.sample_time,
                previous: hold.inputs,
                yaw_reference: hold.inputs.nacelle_yaw,
            };
            Ok((ctl, (hold.inputs, drivetrain), hold, target))
        })
        .collect();

    let mut controllers = Vec::new();
    let mut initial = Vec::new();
    let mut holds = Vec::new();
    let mut targets = Vec::new();
    for b in built {
        let (c, init, h, t) = b?;
        controllers.push(c);
        initial.push(init);
        holds.push(h);
        targets.push(t);
    }
    Ok(ControlSetup {
        control: FarmMpcControl { controllers },
        initial,
        hold: holds,
        target: targets,
    })
}
