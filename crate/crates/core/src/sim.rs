//! Time-stepping farm simulator.
//!
//! Each step samples the free stream, evaluates the effective inflow of every
//! turbine from the current wake field, queries the controllers (every
//! `control_every` steps), advances the platforms and drivetrains, then
//! advances every wake grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{ControlInputs, FarmLayout, PlatformState, Vector2};
use crate::plant::{PlantEnv, PlantOutput, RotorModel, TurbinePlant};
use crate::wake::{
    effective_velocity, init_wake, step_wake, RotorCondition, WakeFieldSnapshot, WakeForcing,
    WakeGrid,
};
use crate::wind::{WindSample, WindSeries};

pub const DEFAULT_DT: f64 = 0.5;

/// Per-turbine diagnostic emitted by a controller at a control step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ControlDiagnostic {
    pub cost: f64,
    /// Bit 0..2: surge, sway, generator-speed bound active in the prediction.
    pub active_mask: u8,
    pub degraded: bool,
    pub target_y: f64,
    /// Yaw the MPC input penalty pulls toward, deg.
    pub yaw_reference: f64,
    pub power_target: f64,
}

pub struct ControlContext<'a> {
    pub time: f64,
    pub env: &'a PlantEnv,
    pub plants: &'a [TurbinePlant],
    pub effective: &'a [Vector2],
    pub free_stream: WindSample,
}

pub trait FarmControl {
    fn command(
        &mut self,
        ctx: &ControlContext<'_>,
    ) -> Result<Vec<(ControlInputs, ControlDiagnostic)>>;
}

/// Commands that never change; used for calm-water and open-loop checks.
pub struct HoldInputs(pub Vec<ControlInputs>);

impl FarmControl for HoldInputs {
    fn command(
        &mut self,
        _ctx: &ControlContext<'_>,
    ) -> Result<Vec<(ControlInputs, ControlDiagnostic)>> {
        Ok(self
            .0
            .iter()
            .map(|u| (*u, ControlDiagnostic::default()))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurbineRecord {
    pub position: Vector2,
    pub velocity: Vector2,
    pub applied: ControlInputs,
    pub commanded: ControlInputs,
    pub effective_wind: Vector2,
    pub normal_speed: f64,
    pub power: f64,
    pub generator_speed: f64,
    pub thrust: Vector2,
    pub repositioning_infeasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub time: f64,
    pub free_stream: Vector2,
    pub turbines: Vec<TurbineRecord>,
    pub farm_power: f64,
    /// Present on control steps only.
    pub diagnostics: Option<Vec<ControlDiagnostic>>,
}

pub struct FarmSimulator<'e> {
    pub env: &'e PlantEnv,
    pub layout: FarmLayout,
    pub plants: Vec<TurbinePlant>,
    pub wakes: Vec<WakeGrid>,
    wind: &'e WindSeries,
    pub dt: f64,
    pub control_every: usize,
    time: f64,
    steps: usize,
    commands: Vec<ControlInputs>,
}

fn rotor_condition(
    plant: &TurbinePlant,
    out: &PlantOutput,
    free_stream: Vector2,
) -> RotorCondition {
    RotorCondition {
        free_stream_rel: free_stream - plant.platform.velocity,
        rotor_speed: out.relative_wind.norm(),
        induction: out.induction.clamp(0.0, 0.49),
        yaw_deg: plant.applied.nacelle_yaw,
    }
}

/// Turbine indices sorted from most upstream to most downstream.
pub fn upstream_order(positions: &[PlatformState], free_stream: Vector2) -> Vec<usize> {
    let n = free_stream.unit_or_x();
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| {
        positions[a]
            .position
            .dot(n)
            .total_cmp(&positions[b].position.dot(n))
            .then(a.cmp(&b))
    });
    order
}

/// Steady wake field for the given plants, built upstream first so each
/// rotor sees the wakes already in place. Returns grids and inflows.
pub fn steady_field(
    env: &PlantEnv,
    layout: &FarmLayout,
    plants: &[TurbinePlant],
    free_stream: Vector2,
) -> Result<(Vec<WakeGrid>, Vec<Vector2>)> {
    let positions: Vec<PlatformState> = plants.iter().map(|p| p.platform).collect();
    let mut grids: Vec<Option<WakeGrid>> = vec![None; plants.len()];
    let mut inflow = vec![free_stream; plants.len()];
    for i in upstream_order(&positions, free_stream) {
        let placeholder = init_wake(
            &layout.turbines[i],
            &env.params.wake,
            &RotorCondition {
                free_stream_rel: free_stream,
                rotor_speed: free_stream.norm(),
                induction: 0.0,
                yaw_deg: 0.0,
            },
        )?;
        let snapshot = WakeFieldSnapshot {
            grids: grids
                .iter()
                .map(|g| g.clone().unwrap_or_else(|| placeholder.clone()))
                .collect(),
            timestamp: 0.0,
        };
        inflow[i] = effective_velocity(&snapshot, i, &positions, free_stream);
        let out = plants[i].rotor_output(env, inflow[i]);
        let cond = rotor_condition(&plants[i], &out, free_stream);
        grids[i] = Some(init_wake(&layout.turbines[i], &env.params.wake, &cond)?);
    }
    Ok((
        grids
            .into_iter()
            .map(|g| g.expect("every grid built"))
            .collect(),
        inflow,
    ))
}

impl<'e> FarmSimulator<'e> {
    /// Plants start at the layout's initial states with `initial` inputs
    /// applied, drivetrains as given, and a steady wake field.
    pub fn new(
        env: &'e PlantEnv,
        layout: FarmLayout,
        wind: &'e WindSeries,
        model: RotorModel,
        initial: &[(ControlInputs, crate::plant::DrivetrainState)],
    ) -> Result<Self> {
        if layout.is_empty() {
            return Err(Error::InvalidInput("farm has no turbines".into()));
        }
        if initial.len() != layout.len()
            || layout.initial.len() != layout.len()
            || layout.mooring_origin.len() != layout.len()
        {
            return Err(Error::Dimension(format!(
                "layout has {} turbines but {} initial states, {} origins and {} initial inputs",
                layout.len(),
                layout.initial.len(),
                layout.mooring_origin.len(),
                initial.len()
            )));
        }
        let plants: Vec<TurbinePlant> = (0..layout.len())
            .map(|i| {
                let mut p =
                    TurbinePlant::new(i, layout.mooring_origin[i], layout.initial[i], model);
                p.applied = initial[i].0;
                p.drivetrain = initial[i].1;
                p
            })
            .collect();
        let free = wind.sample(0.0)?.velocity;
        let (wakes, _) = steady_field(env, &layout, &plants, free)?;
        Ok(Self {
            env,
            layout,
            commands: plants.iter().map(|p| p.applied).collect(),
            plants,
            wakes,
            wind,
            dt: DEFAULT_DT,
            control_every: 2,
            time: 0.0,
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> Vec<PlatformState> {
        self.plants.iter().map(|p| p.platform).collect()
    }

    pub fn effective_winds(&mut self, free_stream: Vector2) -> Vec<Vector2> {
        let positions = self.positions();
        let snapshot = WakeFieldSnapshot {
            grids: std::mem::take(&mut self.wakes),
            timestamp: self.time,
        };
        let eff = (0..self.plants.len())
            .map(|i| effective_velocity(&snapshot, i, &positions, free_stream))
            .collect();
        self.wakes = snapshot.grids;
        eff
    }

    pub fn step(&mut self, control: &mut dyn FarmControl) -> Result<StepRecord> {
        let wrap = |step: usize, turbine: usize| {
            move |e: Error| Error::Step {
                step,
                turbine,
                source: Box::new(e),
            }
        };
        let sample = self.wind.sample(self.time).map_err(wrap(self.steps, 0))?;
        let free = sample.velocity;
        let effective = self.effective_winds(free);

        let mut diagnostics = None;
        if self.steps.is_multiple_of(self.control_every) {
            let ctx = ControlContext {
                time: self.time,
                env: self.env,
                plants: &self.plants,
                effective: &effective,
                free_stream: sample,
            };
            let cmds = control.command(&ctx).map_err(wrap(self.steps, 0))?;
            if cmds.len() != self.plants.len() {
                return Err(Error::Dimension(format!(
                    "controller returned {} commands for {} turbines",
                    cmds.len(),
                    self.plants.len()
                )));
            }
            self.commands = cmds.iter().map(|c| c.0).collect();
            diagnostics = Some(cmds.into_iter().map(|c| c.1).collect());
        }

        let mut turbines = Vec::with_capacity(self.plants.len());
        for (i, plant) in self.plants.iter_mut().enumerate() {
            let out = plant
                .step(self.env, effective[i], &self.commands[i], self.dt)
                .map_err(wrap(self.steps, i))?;
            let cond = rotor_condition(plant, &out, free);
            let grid = &mut self.wakes[i];
            grid.set_boundary(&cond).map_err(wrap(self.steps, i))?;
            let forcing = WakeForcing {
                free_stream: free,
                free_stream_accel: sample.acceleration,
                platform_velocity: plant.platform.velocity,
                platform_accel: out.acceleration,
            };
            step_wake(grid, &forcing, self.dt).map_err(wrap(self.steps, i))?;
            turbines.push(TurbineRecord {
                position: plant.platform.position,
                velocity: plant.platform.velocity,
                applied: plant.applied,
                commanded: self.commands[i],
                effective_wind: effective[i],
                normal_speed: out.normal_speed,
                power: out.power,
                generator_speed: plant.drivetrain.generator_speed,
                thrust: out.thrust,
                repositioning_infeasible: out.repositioning_infeasible,
            });
        }
        let farm_power =
            crate::plant::farm_power(&turbines.iter().map(|t| t.power).collect::<Vec<_>>());
        self.steps += 1;
        self.time = self.steps as f64 * self.dt;
        Ok(StepRecord {
            time: self.time,
            free_stream: free,
            turbines,
            farm_power,
            diagnostics,
        })
    }

    /// Runs until `duration` and returns every step record.
    pub fn run(&mut self, control: &mut dyn FarmControl, duration: f64) -> Result<Vec<StepRecord>> {
        let n = (duration / self.dt).round() as usize;
        let mut out = Vec::with_capacity(n);
        while self.steps < n {
            out.push(self.step(control)?);
        }
        Ok(out)
    }
}
