//! Nonlinear reduced-order turbine model used for prediction.
//!
//! The state holds the six rigid-body platform DOFs, their rates, and the
//! rotor speed, generator speed and shaft twist of a two-mass drivetrain.
//! Heave, roll, pitch and yaw restore linearly. Surge and sway see rotor
//! thrust, viscous drag and the exact catenary mooring.
//!
//! Everything downstream of [`PredictiveModel::linearize`] works in scaled
//! coordinates (see [`STATE_SCALE`]) so that Jacobians and the QP are well
//! conditioned.

use nalgebra::{DMatrix, DVector, SVector};

use crate::aero::thrust_force;
use crate::error::{Error, Result};
use crate::frame::{projected_speed, ControlInputs, Vector2};
use crate::plant::{hydro_force, PlantEnv, TurbinePlant};
use crate::regulator::{self, RegulatorConfig};

pub const STATE_DIM: usize = 15;
/// Manipulated inputs seen by the MPC: blade pitch and nacelle yaw.
pub const INPUT_DIM: usize = 2;
pub const DISTURBANCE_DIM: usize = 2;
/// Outputs: surge, sway, generator speed.
pub const OUTPUT_DIM: usize = 3;

pub type StateVector = SVector<f64, STATE_DIM>;

pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const HEAVE: usize = 2;
    pub const ROLL: usize = 3;
    pub const PITCH: usize = 4;
    pub const YAW: usize = 5;
    pub const VX: usize = 6;
    pub const VY: usize = 7;
    pub const ROTOR: usize = 12;
    pub const GENERATOR: usize = 13;
    pub const TWIST: usize = 14;
    /// Rate index of position index `k` (for `k < 6`).
    pub const fn rate(k: usize) -> usize {
        k + 6
    }
}

/// Scale of each state in the normalized coordinates.
pub const STATE_SCALE: [f64; STATE_DIM] = [
    100.0, 100.0, 10.0, 0.1, 0.1, 0.1, 1.0, 1.0, 1.0, 0.01, 0.01, 0.01, 0.1, 10.0, 0.01,
];
/// Scale of blade pitch and nacelle yaw, degrees.
pub const INPUT_SCALE: [f64; INPUT_DIM] = [10.0, 10.0];
pub const WIND_SCALE: f64 = 10.0;
pub const OUTPUT_STATES: [usize; OUTPUT_DIM] = [idx::X, idx::Y, idx::GENERATOR];

const TRIM_TOLERANCE: f64 = 1e-10;
const TRIM_MAX_ITER: usize = 200;
const JACOBIAN_STEP: f64 = 1e-6;

/// Reduced 15-state vector, positions relative to the mooring neutral point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState(pub StateVector);

impl ReducedState {
    /// Measured states from the plant; unmeasured DOFs are taken from `fill`.
    pub fn from_plant(plant: &TurbinePlant, fill: &StateVector) -> Self {
        let mut x = *fill;
        let rel = plant.platform.position - plant.origin;
        x[idx::X] = rel.x;
        x[idx::Y] = rel.y;
        x[idx::VX] = plant.platform.velocity.x;
        x[idx::VY] = plant.platform.velocity.y;
        x[idx::ROTOR] = plant.drivetrain.rotor_speed;
        x[idx::GENERATOR] = plant.drivetrain.generator_speed;
        x[idx::TWIST] = plant.drivetrain.shaft_twist;
        Self(x)
    }

    pub fn normalized(&self) -> StateVector {
        StateVector::from_fn(|i, _| self.0[i] / STATE_SCALE[i])
    }

    pub fn from_normalized(z: &StateVector) -> Self {
        Self(StateVector::from_fn(|i, _| z[i] * STATE_SCALE[i]))
    }
}

/// How generator torque is chosen inside the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorqueLaw {
    /// Torque is an external input.
    Open,
    /// The constant-power regulator with this electrical demand, W.
    Regulated(f64),
}

/// Available-to-demand ratio required before a pitch-regulated point is solved.
const PITCH_MARGIN: f64 = 1.02;

/// Which actuator holds generator speed at an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Demand is met; blade pitch trims the rotor to the speed setpoint.
    PitchRegulated,
    /// Demand exceeds the available power; pitch is at zero.
    PowerLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub state: StateVector,
    pub inputs: ControlInputs,
    pub wind: Vector2,
    pub law: TorqueLaw,
    pub region: Region,
    /// Sway the point was solved for, relative to the mooring neutral point.
    pub target_y: f64,
    /// Infinity norm of the scaled residual.
    pub residual: f64,
}

/// Continuous or discrete linear model in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearModel {
    pub fn spectral_radius(&self) -> f64 {
        self.a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_real_eigenvalue(&self) -> f64 {
        self.a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub struct PredictiveModel<'a> {
    pub env: &'a PlantEnv,
    pub regulator: RegulatorConfig,
}

impl<'a> PredictiveModel<'a> {
    pub fn new(env: &'a PlantEnv) -> Self {
        Self {
            env,
            regulator: RegulatorConfig::from_params(&env.params),
        }
    }

    fn hub_inflow(&self, x: &StateVector, wind: Vector2) -> Vector2 {
        let h = self.env.params.body.thrust_arm;
        let hub_velocity = Vector2::new(
            x[idx::VX] + h * x[idx::rate(idx::PITCH)],
            x[idx::VY] - h * x[idx::rate(idx::ROLL)],
        );
        wind - hub_velocity
    }

    /// Nacelle yaw is measured from the farm `x` axis, not from the hull.
    fn rotor_heading(&self, _x: &StateVector, yaw_deg: f64) -> f64 {
        yaw_deg
    }

    /// Rotor-normal inflow speed for a state and nacelle yaw.
    pub fn normal_speed(&self, x: &StateVector, yaw_deg: f64, wind: Vector2) -> f64 {
        projected_speed(self.hub_inflow(x, wind), self.rotor_heading(x, yaw_deg))
    }

    /// Inputs with generator torque filled in according to `law`.
    pub fn resolve_inputs(
        &self,
        x: &StateVector,
        u: &ControlInputs,
        wind: Vector2,
        law: TorqueLaw,
    ) -> ControlInputs {
        match law {
            TorqueLaw::Open => *u,
            TorqueLaw::Regulated(target) => {
                let vn = self.normal_speed(x, u.nacelle_yaw, wind);
                ControlInputs {
                    generator_torque: regulator::regulate(
                        &self.env.aero,
                        &self.regulator,
                        target,
                        x[idx::GENERATOR],
                        vn,
                    ),
                    ..*u
                }
            }
        }
    }

    /// `dX/dt = f(X, u, v)` in physical units.
    pub fn state_derivative(
        &self,
        x: &StateVector,
        u: &ControlInputs,
        wind: Vector2,
    ) -> Result<StateVector> {
        let p = &self.env.params;
        let body = &p.body;
        let h = body.thrust_arm;

        let v_rel = self.hub_inflow(x, wind);
        let heading = self.rotor_heading(x, u.nacelle_yaw);
        let vn = projected_speed(v_rel, heading);
        let rotor_speed = x[idx::ROTOR];
        let ct = self
            .env
            .aero
            .thrust_coefficient(rotor_speed, vn, u.blade_pitch);
        let thrust = thrust_force(&self.env.aero, v_rel, heading, ct);
        let tau_aero = self.env.aero.torque(rotor_speed, vn, u.blade_pitch);

        let vel = Vector2::new(x[idx::VX], x[idx::VY]);
        let (f_moor, m_moor) = self
            .env
            .mooring
            .force_and_moment_exact(Vector2::new(x[idx::X], x[idx::Y]), x[idx::YAW])?;
        let f_hydro = hydro_force(&p.hydro, vel);
        let mass = p.hydro.total_mass();

        let mut dx = StateVector::zeros();
        for k in 0..6 {
            dx[k] = x[idx::rate(k)];
        }
        dx[idx::VX] = (thrust.x + f_hydro.x + f_moor.x) / mass;
        dx[idx::VY] = (thrust.y + f_hydro.y + f_moor.y) / mass;
        dx[idx::rate(idx::HEAVE)] = (-body.heave_stiffness * x[idx::HEAVE]
            - body.heave_damping * x[idx::rate(idx::HEAVE)])
            / body.heave_mass;
        dx[idx::rate(idx::ROLL)] = (-body.roll_stiffness * x[idx::ROLL]
            - body.roll_damping * x[idx::rate(idx::ROLL)]
            - thrust.y * h)
            / body.roll_inertia;
        dx[idx::rate(idx::PITCH)] = (-body.pitch_stiffness * x[idx::PITCH]
            - body.pitch_damping * x[idx::rate(idx::PITCH)]
            + thrust.x * h)
            / body.pitch_inertia;
        dx[idx::rate(idx::YAW)] =
            (m_moor - body.yaw_stiffness * x[idx::YAW] - body.yaw_damping * x[idx::rate(idx::YAW)])
                / body.yaw_inertia;

        let d = &p.drivetrain;
        let shaft = d.shaft_stiffness * x[idx::TWIST]
            + d.shaft_damping * (rotor_speed - x[idx::GENERATOR] / d.gear_ratio);
        dx[idx::ROTOR] = (tau_aero - shaft) / d.rotor_inertia;
        dx[idx::GENERATOR] = (shaft / d.gear_ratio - u.generator_torque) / d.generator_inertia;
        dx[idx::TWIST] = rotor_speed - x[idx::GENERATOR] / d.gear_ratio;
        Ok(dx)
    }

    fn scaled_derivative(
        &self,
        z: &StateVector,
        u: &ControlInputs,
        wind: Vector2,
        law: TorqueLaw,
    ) -> Result<StateVector> {
        let x = ReducedState::from_normalized(z).0;
        let u = self.resolve_inputs(&x, u, wind, law);
        let dx = self.state_derivative(&x, &u, wind)?;
        Ok(StateVector::from_fn(|i, _| dx[i] / STATE_SCALE[i]))
    }

    /// Solves `f(X, u0, v0) = 0` for `X` with torque as a fixed input.
    pub fn trim(
        &self,
        u0: &ControlInputs,
        wind: Vector2,
        guess: &StateVector,
    ) -> Result<EquilibriumPoint> {
        let z0 =
            DVector::from_iterator(STATE_DIM, ReducedState(*guess).normalized().iter().copied());
        let (z, residual) = levenberg_marquardt(
            |z| {
                let s = StateVector::from_iterator(z.iter().copied());
                self.scaled_derivative(&s, u0, wind, TorqueLaw::Open)
                    .map(|d| DVector::from_iterator(STATE_DIM, d.iter().copied()))
            },
            z0,
        )?;
        let state = ReducedState::from_normalized(&StateVector::from_iterator(z.iter().copied())).0;
        Ok(EquilibriumPoint {
            state,
            inputs: *u0,
            wind,
            law: TorqueLaw::Open,
            region: Region::PitchRegulated,
            target_y: state[idx::Y],
            residual,
        })
    }

    /// Equilibrium holding sway at `target_y` under the regulated torque law,
    /// with generator speed at its setpoint.
    pub fn operating_point(
        &self,
        target_y: f64,
        wind: Vector2,
        demand: f64,
        guess: &StateVector,
    ) -> Result<EquilibriumPoint> {
        let limited =
            self.solve_operating_point(target_y, wind, Region::PowerLimited, demand, guess, 0.0)?;
        let delivered = regulator::power_demand(
            f64::INFINITY,
            regulator::available_power(
                &self.env.aero,
                &self.regulator,
                limited.state[idx::GENERATOR],
                self.normal_speed(&limited.state, limited.inputs.nacelle_yaw, wind),
            ),
            limited.state[idx::GENERATOR],
            &self.regulator,
        );
        if delivered <= demand {
            return Ok(limited);
        }
        self.solve_operating_point(
            target_y,
            wind,
            Region::PitchRegulated,
            demand,
            &limited.state,
            limited.inputs.nacelle_yaw,
        )
    }

    /// Power-limited operating point at `target_y`. When the rotor can meet
    /// `demand` at `wind`, the wind is lowered along its direction until it
    /// falls short, so the point sits at zero pitch below rated.
    pub fn power_limited_point(
        &self,
        target_y: f64,
        wind: Vector2,
        demand: f64,
        guess: &StateVector,
    ) -> Result<EquilibriumPoint> {
        let mut w = wind;
        let mut g = *guess;
        for _ in 0..8 {
            let limited =
                self.solve_operating_point(target_y, w, Region::PowerLimited, demand, &g, 0.0)?;
            let avail = self.headroom_power(&limited, w);
            if avail * PITCH_MARGIN < demand {
                return Ok(limited);
            }
            w = w * ((demand / (PITCH_MARGIN * avail)).cbrt() / 1.01);
            g = limited.state;
        }
        Err(Error::Infeasible(format!(
            "no power-limited operating point at sway {target_y} m"
        )))
    }

    /// Electrical power available at zero pitch at an operating point.
    fn headroom_power(&self, eq: &EquilibriumPoint, wind: Vector2) -> f64 {
        regulator::available_power(
            &self.env.aero,
            &self.regulator,
            eq.state[idx::GENERATOR],
            self.normal_speed(&eq.state, eq.inputs.nacelle_yaw, wind),
        )
    }

    /// Pitch-regulated operating point at `target_y`. When the rotor cannot
    /// meet `demand` at `wind`, the wind is raised along its direction until
    /// it can, so the linearization carries the pitch-to-speed path.
    pub fn pitch_regulated_point(
        &self,
        target_y: f64,
        wind: Vector2,
        demand: f64,
        guess: &StateVector,
    ) -> Result<EquilibriumPoint> {
        let mut w = wind;
        let mut g = *guess;
        for _ in 0..8 {
            let limited =
                self.solve_operating_point(target_y, w, Region::PowerLimited, demand, &g, 0.0)?;
            let avail = self.headroom_power(&limited, w);
            if avail > PITCH_MARGIN * demand {
                return self.solve_operating_point(
                    target_y,
                    w,
                    Region::PitchRegulated,
                    demand,
                    &limited.state,
                    limited.inputs.nacelle_yaw,
                );
            }
            w = w * ((PITCH_MARGIN * demand / avail.max(1.0)).cbrt() * 1.01);
            g = limited.state;
        }
        Err(Error::Infeasible(format!(
            "no pitch-regulated operating point at sway {target_y} m"
        )))
    }

    fn solve_operating_point(
        &self,
        target_y: f64,
        wind: Vector2,
        region: Region,
        demand: f64,
        guess: &StateVector,
        yaw_guess: f64,
    ) -> Result<EquilibriumPoint> {
        let law = match region {
            Region::PowerLimited => TorqueLaw::Regulated(f64::INFINITY),
            Region::PitchRegulated => TorqueLaw::Regulated(demand),
        };
        let mut g = *guess;
        g[idx::GENERATOR] = self.regulator.speed_setpoint;
        g[idx::ROTOR] = self.regulator.speed_setpoint / self.env.params.drivetrain.gear_ratio;
        let pitch_guess = if region == Region::PitchRegulated {
            -2.0
        } else {
            0.0
        };
        let mut z0 = DVector::zeros(STATE_DIM + INPUT_DIM);
        let zs = ReducedState(g).normalized();
        for i in 0..STATE_DIM {
            z0[i] = zs[i];
        }
        z0[STATE_DIM] = pitch_guess / INPUT_SCALE[0];
        z0[STATE_DIM + 1] = yaw_guess / INPUT_SCALE[1];

        let setpoint = self.regulator.speed_setpoint;
        let residual = |z: &DVector<f64>| -> Result<DVector<f64>> {
            let s = StateVector::from_iterator(z.rows(0, STATE_DIM).iter().copied());
            let u = ControlInputs {
                blade_pitch: z[STATE_DIM] * INPUT_SCALE[0],
                generator_torque: 0.0,
                nacelle_yaw: z[STATE_DIM + 1] * INPUT_SCALE[1],
            };
            let d = self.scaled_derivative(&s, &u, wind, law)?;
            let mut r = DVector::zeros(STATE_DIM + INPUT_DIM);
            for i in 0..STATE_DIM {
                r[i] = d[i];
            }
            r[STATE_DIM] = (s[idx::Y] * STATE_SCALE[idx::Y] - target_y) / STATE_SCALE[idx::Y];
            r[STATE_DIM + 1] = match region {
                Region::PowerLimited => z[STATE_DIM],
                Region::PitchRegulated => {
                    (s[idx::GENERATOR] * STATE_SCALE[idx::GENERATOR] - setpoint)
                        / STATE_SCALE[idx::GENERATOR]
                }
            };
            Ok(r)
        };
        let (z, res) = levenberg_marquardt(residual, z0)?;
        let state = ReducedState::from_normalized(&StateVector::from_iterator(
            z.rows(0, STATE_DIM).iter().copied(),
        ))
        .0;
        let raw = ControlInputs {
            blade_pitch: z[STATE_DIM] * INPUT_SCALE[0],
            generator_torque: 0.0,
            nacelle_yaw: z[STATE_DIM + 1] * INPUT_SCALE[1],
        };
        if raw.blade_pitch > 1e-6 || raw.blade_pitch < crate::frame::PITCH_LIMIT.min {
            return Err(Error::Infeasible(format!(
                "operating point at y = {target_y:.1} m needs blade pitch {:.2} deg",
                raw.blade_pitch
            )));
        }
        let inputs = self.resolve_inputs(&state, &raw, wind, law);
        Ok(EquilibriumPoint {
            state,
            inputs,
            wind,
            law,
            region,
            target_y,
            residual: res,
        })
    }

    /// Central-difference Jacobians at an equilibrium, in normalized units.
    /// With a regulated torque law the regulator is part of the dynamics and
    /// `B` covers blade pitch and nacelle yaw only.
    pub fn linearize(&self, eq: &EquilibriumPoint) -> Result<LinearModel> {
        self.linearize_with_step(eq, JACOBIAN_STEP)
    }

    /// As [`Self::linearize`] with normalized step `h` on every coordinate.
    pub fn linearize_with_step(&self, eq: &EquilibriumPoint, h: f64) -> Result<LinearModel> {
        let z0 = ReducedState(eq.state).normalized();
        let n = STATE_DIM + INPUT_DIM + DISTURBANCE_DIM;
        let mut p0 = DVector::zeros(n);
        for i in 0..STATE_DIM {
            p0[i] = z0[i];
        }
        p0[STATE_DIM] = eq.inputs.blade_pitch / INPUT_SCALE[0];
        p0[STATE_DIM + 1] = eq.inputs.nacelle_yaw / INPUT_SCALE[1];
        p0[STATE_DIM + 2] = eq.wind.x / WIND_SCALE;
        p0[STATE_DIM + 3] = eq.wind.y / WIND_SCALE;
        let f = |p: &DVector<f64>| -> Result<DVector<f64>> {
            let z = StateVector::from_iterator(p.rows(0, STATE_DIM).iter().copied());
            let u = ControlInputs {
                blade_pitch: p[STATE_DIM] * INPUT_SCALE[0],
                generator_torque: eq.inputs.generator_torque,
                nacelle_yaw: p[STATE_DIM + 1] * INPUT_SCALE[1],
            };
            let w = Vector2::new(p[STATE_DIM + 2], p[STATE_DIM + 3]) * WIND_SCALE;
            Ok(DVector::from_iterator(
                STATE_DIM,
                self.scaled_derivative(&z, &u, w, eq.law)?.iter().copied(),
            ))
        };
        let j = central_jacobian(f, &p0, h)?;
        Ok(LinearModel {
            a: j.columns(0, STATE_DIM).into_owned(),
            b: j.columns(STATE_DIM, INPUT_DIM).into_owned(),
            e: j.columns(STATE_DIM + INPUT_DIM, DISTURBANCE_DIM)
                .into_owned(),
            c: output_matrix(),
        })
    }
}

/// Central-difference Jacobian of `f` at `x0` with step `h` on every
/// coordinate.
pub fn central_jacobian<F>(f: F, x0: &DVector<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut cols = Vec::with_capacity(x0.len());
    for j in 0..x0.len() {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;
        cols.push((f(&xp)? - f(&xm)?) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    if cols.iter().any(|c| c.len() != rows) {
        return Err(Error::Dimension(
            "function output length changed between evaluations".into(),
        ));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Selects surge, sway and generator speed from the normalized state.
pub fn output_matrix() -> DMatrix<f64> {
    let mut c = DMatrix::zeros(OUTPUT_DIM, STATE_DIM);
    for (r, &k) in OUTPUT_STATES.iter().enumerate() {
        c[(r, k)] = 1.0;
    }
    c
}

/// Zero-order-hold discretization through one augmented matrix exponential.
pub fn discretize(model: &LinearModel, ts: f64) -> LinearModel {
    let n = model.a.nrows();
    let m = model.b.ncols();
    let d = model.e.ncols();
    let mut big = DMatrix::zeros(n + m + d, n + m + d);
    big.view_mut((0, 0), (n, n)).copy_from(&(&model.a * ts));
    big.view_mut((0, n), (n, m)).copy_from(&(&model.b * ts));
    big.view_mut((0, n + m), (n, d)).copy_from(&(&model.e * ts));
    let ex = big.exp();
    LinearModel {
        a: ex.view((0, 0), (n, n)).into_owned(),
        b: ex.view((0, n), (n, m)).into_owned(),
        e: ex.view((0, n + m), (n, d)).into_owned(),
        c: model.c.clone(),
    }
}

/// Damped Gauss-Newton with a finite-difference Jacobian. Returns the root
/// and the infinity norm of its residual.
fn levenberg_marquardt<F>(residual: F, z0: DVector<f64>) -> Result<(DVector<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = z0.len();
    let mut z = z0;
    let mut r = residual(&z)?;
    let mut cost = r.norm_squared();
    let mut mu = 1e-8;
    for _ in 0..TRIM_MAX_ITER {
        if r.amax() < TRIM_TOLERANCE {
            return Ok((z, r.amax()));
        }
        let m = r.len();
        let mut jac = DMatrix::zeros(m, n);
        for j in 0..n {
            let h = JACOBIAN_STEP * (1.0 + z[j].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let col = (residual(&zp)? - residual(&zm)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &r;
        let mut accepted = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += mu * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = lhs.lu().solve(&(-&grad)) else {
                mu *= 10.0;
                continue;
            };
            let trial = &z + &step;
            let rt = match residual(&trial) {
                Ok(v) => v,
                Err(_) => {
                    mu *= 10.0;
                    continue;
                }
            };
            let ct = rt.norm_squared();
            if ct < cost {
                z = trial;
                r = rt;
                cost = ct;
                mu = (mu / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if r.amax() < TRIM_TOLERANCE * 1e3 {
        return Ok((z, r.amax()));
    }
    Err(Error::TrimDiverged {
        iterations: TRIM_MAX_ITER,
        residual: r.amax(),
    })
}
