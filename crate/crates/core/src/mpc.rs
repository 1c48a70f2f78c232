//! Linear MPC for platform repositioning.
//!
//! Each target position gets its own linearization. The prediction matrices,
//! Hessian and constraint matrix depend only on that model and are built once;
//! a control step only refreshes the linear term and the bounds.
//!
//! Decision vector: `N_m` input moves `Δu = (Δβ, Δγ)` followed by one slack
//! per output for the soft output box.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{rpm_to_rad_s, ControlInputs, Vector2, PITCH_LIMIT, YAW_LIMIT};
use crate::predictive::{
    discretize, EquilibriumPoint, LinearModel, PredictiveModel, ReducedState, Region, INPUT_DIM,
    INPUT_SCALE, OUTPUT_DIM, OUTPUT_STATES, STATE_DIM, STATE_SCALE, WIND_SCALE,
};
use crate::qp::{self, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    /// Controller sample time, s.
    pub sample_time: f64,
    /// Output weights on surge, sway and generator speed (normalized units).
    pub output_weight: [f64; OUTPUT_DIM],
    /// Weights on pitch and yaw moves.
    pub move_weight: [f64; INPUT_DIM],
    /// Weights on pitch and yaw distance from their operating-point values.
    pub input_weight: [f64; INPUT_DIM],
    pub slack_weight: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            prediction_horizon: 40,
            control_horizon: 10,
            sample_time: 1.0,
            output_weight: [1.0, 1.0, 0.1],
            move_weight: [10.0, 50.0],
            input_weight: [1.0, 5.0],
            slack_weight: 1e4,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.control_horizon == 0 || self.control_horizon > self.prediction_horizon {
            errs.push(format!(
                "mpc.control_horizon must be in [1, prediction_horizon = {}], got {}",
                self.prediction_horizon, self.control_horizon
            ));
        }
        if !(self.sample_time > 0.0) {
            errs.push(format!(
                "mpc.sample_time must be positive, got {}",
                self.sample_time
            ));
        }
        let weights = self
            .output_weight
            .iter()
            .chain(&self.move_weight)
            .chain(&self.input_weight);
        if weights.clone().any(|w| !(*w >= 0.0)) || self.slack_weight <= 0.0 {
            errs.push("mpc weights must be non-negative and slack_weight positive".into());
        }
        if self.move_weight.iter().any(|w| *w <= 0.0) {
            errs.push("mpc.move_weight must be positive so the QP Hessian is definite".into());
        }
        errs
    }
}

/// Physical output bounds. Surge and sway are relative to the mooring neutral point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSet {
    pub surge: [f64; 2],
    pub sway: [f64; 2],
    pub generator_speed_rpm: [f64; 2],
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            surge: [0.0, 150.0],
            sway: [-130.0, 130.0],
            generator_speed_rpm: [
                crate::frame::GENERATOR_SPEED_MIN_RPM,
                crate::frame::GENERATOR_SPEED_MAX_RPM,
            ],
        }
    }
}

impl ConstraintSet {
    fn physical(&self) -> [[f64; 2]; OUTPUT_DIM] {
        [
            self.surge,
            self.sway,
            [
                rpm_to_rad_s(self.generator_speed_rpm[0]),
                rpm_to_rad_s(self.generator_speed_rpm[1]),
            ],
        ]
    }
}

/// One linearization with its precomputed QP structure.
#[derive(Debug, Clone)]
pub struct MpcModel {
    pub equilibrium: EquilibriumPoint,
    pub discrete: LinearModel,
    config: MpcConfig,
    constraints: ConstraintSet,
    /// Free response to the initial state, `3N_p × 15`.
    phi: DMatrix<f64>,
    /// Free response to the held previous input.
    psi_u: DMatrix<f64>,
    /// Response to a constant wind disturbance.
    psi_d: DMatrix<f64>,
    /// Response to the input moves, `3N_p × 2N_m`.
    gamma: DMatrix<f64>,
    /// `ΣT_kᵀ S T_k` cross term with the previous input, `2N_m × 2`.
    input_cross: DMatrix<f64>,
    input_const: DMatrix<f64>,
    hessian: DMatrix<f64>,
    a_ineq: DMatrix<f64>,
}

/// Targets for one MPC step in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcReference {
    /// Offset of the tracked outputs from the model equilibrium.
    pub output_shift: [f64; OUTPUT_DIM],
    /// Pitch and yaw the input penalty pulls toward, deg.
    pub inputs: [f64; INPUT_DIM],
}

impl MpcReference {
    /// Track the equilibrium of `model` exactly.
    pub fn equilibrium(model: &MpcModel) -> Self {
        Self {
            output_shift: [0.0; OUTPUT_DIM],
            inputs: [
                model.equilibrium.inputs.blade_pitch,
                model.equilibrium.inputs.nacelle_yaw,
            ],
        }
    }
}

/// Outcome of one MPC step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcStep {
    pub inputs: ControlInputs,
    pub cost: f64,
    /// Bit `r` set when output bound `r` is active somewhere in the horizon.
    pub active_mask: u8,
    pub degraded: bool,
}

impl MpcModel {
    pub fn target_y(&self) -> f64 {
        self.equilibrium.target_y
    }

    pub fn new(
        model: &PredictiveModel<'_>,
        equilibrium: EquilibriumPoint,
        config: MpcConfig,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let cont = model.linearize(&equilibrium)?;
        let discrete = discretize(&cont, config.sample_time);
        Ok(Self::from_discrete(
            equilibrium,
            discrete,
            config,
            constraints,
        ))
    }

    pub fn from_discrete(
        equilibrium: EquilibriumPoint,
        discrete: LinearModel,
        config: MpcConfig,
        constraints: ConstraintSet,
    ) -> Self {
        let np = config.prediction_horizon;
        let nm = config.control_horizon;
        let (n, m, p) = (STATE_DIM, INPUT_DIM, OUTPUT_DIM);
        let (a, b, e, c) = (&discrete.a, &discrete.b, &discrete.e, &discrete.c);

        // step_resp[k] = Σ_{i<k} A^i B, and likewise for E.
        let mut apow = DMatrix::<f64>::identity(n, n);
        let mut step_b = vec![DMatrix::zeros(n, m)];
        let mut step_e = vec![DMatrix::zeros(n, e.ncols())];
        let mut phi = DMatrix::zeros(p * np, n);
        for k in 1..=np {
            step_b.push(&step_b[k - 1] + &apow * b);
            step_e.push(&step_e[k - 1] + &apow * e);
            apow = a * &apow;
            phi.view_mut((p * (k - 1), 0), (p, n))
                .copy_from(&(c * &apow));
        }
        let mut psi_u = DMatrix::zeros(p * np, m);
        let mut psi_d = DMatrix::zeros(p * np, e.ncols());
        let mut gamma = DMatrix::zeros(p * np, m * nm);
        for k in 1..=np {
            psi_u
                .view_mut((p * (k - 1), 0), (p, m))
                .copy_from(&(c * &step_b[k]));
            psi_d
                .view_mut((p * (k - 1), 0), (p, e.ncols()))
                .copy_from(&(c * &step_e[k]));
            for j in 0..nm.min(k) {
                gamma
                    .view_mut((p * (k - 1), m * j), (p, m))
                    .copy_from(&(c * &step_b[k - j]));
            }
        }

        let nz = m * nm + p;
        let q_bar = DMatrix::from_fn(p * np, 1, |i, _| config.output_weight[i % p]);
        let gq = DMatrix::from_fn(m * nm, p * np, |i, j| gamma[(j, i)] * q_bar[j]);

        let mut hess = DMatrix::zeros(nz, nz);
        hess.view_mut((0, 0), (m * nm, m * nm))
            .copy_from(&(&gq * &gamma));
        for j in 0..nm {
            for r in 0..m {
                hess[(m * j + r, m * j + r)] += config.move_weight[r];
            }
        }
        // Input at step k is u_prev + Σ_{j ≤ min(k, N_m - 1)} Δu_j.
        let mut input_cross = DMatrix::zeros(m * nm, m);
        let mut input_const = DMatrix::zeros(m, m);
        for k in 0..np {
            let last = k.min(nm - 1);
            for r in 0..m {
                let s = config.input_weight[r];
                input_const[(r, r)] += s;
                for j1 in 0..=last {
                    input_cross[(m * j1 + r, r)] += s;
                    for j2 in 0..=last {
                        hess[(m * j1 + r, m * j2 + r)] += s;
                    }
                }
            }
        }
        for r in 0..p {
            hess[(m * nm + r, m * nm + r)] = config.slack_weight;
        }
        hess *= 2.0;

        // Rows: input box (2·m·N_m), move box (2·m·N_m), output box (2·p·N_p), slack ≥ 0 (p).
        let rows = 4 * m * nm + 2 * p * np + p;
        let mut g = DMatrix::zeros(rows, nz);
        let mut row = 0;
        for k in 0..nm {
            for r in 0..m {
                for j in 0..=k {
                    g[(row, m * j + r)] = 1.0;
                    g[(row + 1, m * j + r)] = -1.0;
                }
                row += 2;
            }
        }
        for j in 0..nm {
            for r in 0..m {
                g[(row, m * j + r)] = 1.0;
                g[(row + 1, m * j + r)] = -1.0;
                row += 2;
            }
        }
        for k in 0..np {
            for r in 0..p {
                for col in 0..m * nm {
                    g[(row, col)] = gamma[(p * k + r, col)];
                    g[(row + 1, col)] = -gamma[(p * k + r, col)];
                }
                g[(row, m * nm + r)] = -1.0;
                g[(row + 1, m * nm + r)] = -1.0;
                row += 2;
            }
        }
        for r in 0..p {
            g[(row, m * nm + r)] = -1.0;
            row += 1;
        }

        Self {
            equilibrium,
            discrete,
            config,
            constraints,
            phi,
            psi_u,
            psi_d,
            gamma,
            input_cross,
            input_const,
            hessian: hess,
            a_ineq: g,
        }
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    fn scaled_input(&self, u: &ControlInputs) -> DVector<f64> {
        DVector::from_vec(vec![
            (u.blade_pitch - self.equilibrium.inputs.blade_pitch) / INPUT_SCALE[0],
            (u.nacelle_yaw - self.equilibrium.inputs.nacelle_yaw) / INPUT_SCALE[1],
        ])
    }

    fn scaled_state(&self, x: &ReducedState) -> DVector<f64> {
        DVector::from_fn(STATE_DIM, |i, _| {
            (x.0[i] - self.equilibrium.state[i]) / STATE_SCALE[i]
        })
    }

    fn scaled_wind(&self, wind: Vector2) -> DVector<f64> {
        let d = wind - self.equilibrium.wind;
        DVector::from_vec(vec![d.x / WIND_SCALE, d.y / WIND_SCALE])
    }

    /// Predicted scaled outputs with the inputs held at `u_prev`.
    pub fn free_response(
        &self,
        x: &ReducedState,
        wind: Vector2,
        u_prev: &ControlInputs,
    ) -> DVector<f64> {
        &self.phi * self.scaled_state(x)
            + &self.psi_u * self.scaled_input(u_prev)
            + &self.psi_d * self.scaled_wind(wind)
    }

    /// Assembles the QP for one step and returns it with the constant part of the cost.
    pub fn build_qp(
        &self,
        x: &ReducedState,
        wind: Vector2,
        u_prev: &ControlInputs,
        reference: &MpcReference,
    ) -> Result<(QpProblem, f64)> {
        let np = self.config.prediction_horizon;
        let nm = self.config.control_horizon;
        let (m, p) = (INPUT_DIM, OUTPUT_DIM);
        let free = self.free_response(x, wind, u_prev);
        let err: Vec<f64> = (0..p * np)
            .map(|j| free[j] - reference.output_shift[j % p] / STATE_SCALE[OUTPUT_STATES[j % p]])
            .collect();
        let mu = self.scaled_input(u_prev);
        let mu_ref = DVector::from_fn(m, |r, _| {
            let prev = [u_prev.blade_pitch, u_prev.nacelle_yaw][r];
            (prev - reference.inputs[r]) / INPUT_SCALE[r]
        });
        let nz = m * nm + p;

        let mut g = DVector::zeros(nz);
        let mut lin = DVector::zeros(m * nm);
        for i in 0..m * nm {
            lin[i] = err
                .iter()
                .enumerate()
                .map(|(j, e)| self.gamma[(j, i)] * self.config.output_weight[j % p] * e)
                .sum();
        }
        lin += &self.input_cross * &mu_ref;
        g.rows_mut(0, m * nm).copy_from(&(lin * 2.0));

        let constant = (0..p * np)
            .map(|j| self.config.output_weight[j % p] * err[j] * err[j])
            .sum::<f64>()
            + mu_ref.dot(&(&self.input_const * &mu_ref));

        let limits = [PITCH_LIMIT, YAW_LIMIT];
        let eq_u = [
            self.equilibrium.inputs.blade_pitch,
            self.equilibrium.inputs.nacelle_yaw,
        ];
        let out_bounds = self.constraints.physical();
        let rows = self.a_ineq.nrows();
        let mut h = DVector::zeros(rows);
        let mut row = 0;
        for _ in 0..nm {
            for r in 0..m {
                let hi = (limits[r].max - eq_u[r]) / INPUT_SCALE[r] - mu[r];
                let lo = (limits[r].min - eq_u[r]) / INPUT_SCALE[r] - mu[r];
                h[row] = hi.max(0.0);
                h[row + 1] = (-lo).max(0.0);
                row += 2;
            }
        }
        for _ in 0..nm {
            for r in 0..m {
                let step = limits[r].rate * self.config.sample_time / INPUT_SCALE[r];
                h[row] = step;
                h[row + 1] = step;
                row += 2;
            }
        }
        for k in 0..np {
            for r in 0..p {
                let s = OUTPUT_STATES[r];
                let y_eq = self.equilibrium.state[s];
                let hi = (out_bounds[r][1] - y_eq) / STATE_SCALE[s];
                let lo = (out_bounds[r][0] - y_eq) / STATE_SCALE[s];
                h[row] = hi - free[p * k + r];
                h[row + 1] = free[p * k + r] - lo;
                row += 2;
            }
        }
        debug_assert_eq!(row + p, rows);
        let problem = QpProblem::new(self.hessian.clone(), g, self.a_ineq.clone(), h)?;
        Ok((problem, constant))
    }

    fn active_mask(&self, lambda: &DVector<f64>) -> u8 {
        let start = 4 * INPUT_DIM * self.config.control_horizon;
        let mut mask = 0u8;
        for k in 0..self.config.prediction_horizon {
            for r in 0..OUTPUT_DIM {
                let row = start + 2 * (OUTPUT_DIM * k + r);
                if lambda[row] > 1e-6 || lambda[row + 1] > 1e-6 {
                    mask |= 1 << r;
                }
            }
        }
        mask
    }
}

/// Per-turbine MPC with a bank of models keyed by target sway.
#[derive(Debug, Clone)]
pub struct MpcController {
    models: Vec<MpcModel>,
    active: usize,
    pub degraded_steps: usize,
}

impl MpcController {
    pub fn new(model: MpcModel) -> Self {
        Self {
            models: vec![model],
            active: 0,
            degraded_steps: 0,
        }
    }

    fn find(&self, target_y: f64, region: Region) -> Option<usize> {
        self.models
            .iter()
            .position(|m| m.target_y() == target_y && m.equilibrium.region == region)
    }

    pub fn has_model(&self, target_y: f64, region: Region) -> bool {
        self.find(target_y, region).is_some()
    }

    /// Adds a linearization unless one with the same target and region exists.
    pub fn add_model(&mut self, model: MpcModel) {
        if !self.has_model(model.target_y(), model.equilibrium.region) {
            self.models.push(model);
        }
    }

    /// Switches to the linearization at `target_y` for `region`, or to any
    /// linearization at `target_y` when that region was not built.
    pub fn select(&mut self, target_y: f64, region: Region) -> Result<()> {
        let k = self
            .find(target_y, region)
            .or_else(|| self.models.iter().position(|m| m.target_y() == target_y))
            .ok_or_else(|| {
                Error::InvalidInput(format!("no model linearized at sway {target_y} m"))
            })?;
        self.active = k;
        Ok(())
    }

    pub fn active(&self) -> &MpcModel {
        &self.models[self.active]
    }

    pub fn target_y(&self) -> f64 {
        self.models[self.active].target_y()
    }

    pub fn region(&self) -> Region {
        self.models[self.active].equilibrium.region
    }

    /// One MPC step. Returns pitch and yaw; torque is left at `u_prev`.
    pub fn step(
        &mut self,
        x: &ReducedState,
        wind: Vector2,
        u_prev: &ControlInputs,
        reference: &MpcReference,
    ) -> MpcStep {
        let model = &self.models[self.active];
        let solved = model
            .build_qp(x, wind, u_prev, reference)
            .and_then(|(p, c)| qp::solve(&p).map(|s| (s, c)));
        match solved {
            Ok((sol, constant)) => {
                let du = sol.z.rows(0, INPUT_DIM);
                let inputs = ControlInputs {
                    blade_pitch: PITCH_LIMIT.saturate(u_prev.blade_pitch + du[0] * INPUT_SCALE[0]),
                    generator_torque: u_prev.generator_torque,
                    nacelle_yaw: YAW_LIMIT.saturate(u_prev.nacelle_yaw + du[1] * INPUT_SCALE[1]),
                };
                MpcStep {
                    inputs,
                    cost: sol.objective + constant,
                    active_mask: model.active_mask(&sol.lambda),
                    degraded: false,
                }
            }
            Err(_) => {
                self.degraded_steps += 1;
                MpcStep {
                    inputs: *u_prev,
                    cost: f64::NAN,
                    active_mask: 0,
                    degraded: true,
                }
            }
        }
    }
}
