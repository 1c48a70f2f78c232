//! Reference checks on the predictive model: analytic derivatives, the
//! convergence order of its finite-difference Jacobian, and a force balance
//! recomputed outside the model at solved operating points.

use nalgebra::{DMatrix, DVector};

use fowfsim::aero::thrust_force;
use fowfsim::frame::{rotor_normal, Vector2};
use fowfsim::params::PhysicalParams;
use fowfsim::plant::PlantEnv;
use fowfsim::predictive::{
    central_jacobian, idx, EquilibriumPoint, PredictiveModel, Region, StateVector, STATE_SCALE,
};

pub fn env() -> PlantEnv {
    PlantEnv::new(PhysicalParams::default()).unwrap()
}

pub fn operating_point(env: &PlantEnv, y: f64, wind: Vector2) -> EquilibriumPoint {
    let model = PredictiveModel::new(env);
    let mut guess = StateVector::zeros();
    guess[idx::X] = 84.0;
    model
        .operating_point(y, wind, env.params.operating.rated_power, &guess)
        .unwrap()
}

/// Largest entry error of `central_jacobian` on a smooth map with known
/// derivatives.
pub fn analytic_jacobian_error() -> f64 {
    let f = |x: &DVector<f64>| -> fowfsim::Result<DVector<f64>> {
        Ok(DVector::from_vec(vec![
            x[0] * x[0] * x[1] + 3.0 * x[2],
            x[0].sin() * x[2],
            x[1].exp() - x[0] * x[2],
        ]))
    };
    let x: DVector<f64> = DVector::from_vec(vec![0.7, -0.3, 1.9]);
    let exact = DMatrix::from_row_slice(
        3,
        3,
        &[
            2.0 * x[0] * x[1],
            x[0] * x[0],
            3.0,
            x[0].cos() * x[2],
            0.0,
            x[0].sin(),
            -x[2],
            x[1].exp(),
            -x[0],
        ],
    );
    (central_jacobian(f, &x, 1e-5).unwrap() - exact).amax()
}

/// Errors of the model Jacobian at steps `h, h/2, h/4` against a step of
/// `h/64`, at a pitch-regulated point.
///
/// Quadratic drag |v| v is only once differentiable at rest, so its central
/// difference carries an exact first-order term -½ ρ C_d A h / m on the
/// velocity diagonal. That term is removed, leaving the smooth part.
pub fn model_jacobian_errors() -> [f64; 3] {
    let env = env();
    let eq = operating_point(&env, 40.0, Vector2::new(14.0, 0.0));
    assert_eq!(eq.region, Region::PitchRegulated);
    let model = PredictiveModel::new(&env);
    let hydro = &env.params.hydro;
    let drag_bias = |h: f64, k: usize| {
        -0.5 * hydro.water_density * hydro.drag_sum * h * STATE_SCALE[k] / hydro.total_mass()
    };
    let stack = |h: f64| {
        let m = model.linearize_with_step(&eq, h).unwrap();
        let mut j = DMatrix::zeros(m.a.nrows(), m.a.ncols() + m.b.ncols() + m.e.ncols());
        j.view_mut((0, 0), m.a.shape()).copy_from(&m.a);
        j.view_mut((0, m.a.ncols()), m.b.shape()).copy_from(&m.b);
        j.view_mut((0, m.a.ncols() + m.b.ncols()), m.e.shape())
            .copy_from(&m.e);
        for k in [idx::VX, idx::VY] {
            j[(k, k)] -= drag_bias(h, k);
        }
        j
    };
    let h = 4e-3;
    let reference = stack(h / 64.0);
    [h, h / 2.0, h / 4.0].map(|s| (stack(s) - &reference).amax())
}

/// Worst results over operating points at three sway targets: the scaled
/// trim residual, the translational imbalance of rotor thrust and mooring
/// force as an acceleration, and the relative shaft torque imbalance.
pub fn trim_balance() -> (f64, f64, f64) {
    let env = env();
    let wind = Vector2::new(14.0, 0.0);
    let (mut residual, mut imbalance, mut torque) = (0.0_f64, 0.0_f64, 0.0_f64);
    for y in [-60.0, 0.0, 60.0] {
        let eq = operating_point(&env, y, wind);
        assert!((eq.state[idx::Y] - y).abs() < 1e-4);
        residual = residual.max(eq.residual);

        let s = &eq.state;
        let vn = wind.dot(rotor_normal(eq.inputs.nacelle_yaw));
        let ct = env
            .aero
            .thrust_coefficient(s[idx::ROTOR], vn, eq.inputs.blade_pitch);
        let thrust = thrust_force(&env.aero, wind, eq.inputs.nacelle_yaw, ct);
        let (moor, _) = env
            .mooring
            .force_and_moment_exact(Vector2::new(s[idx::X], s[idx::Y]), s[idx::YAW])
            .unwrap();
        imbalance = imbalance.max((thrust + moor).norm() / env.params.hydro.total_mass());

        let aero = env.aero.torque(s[idx::ROTOR], vn, eq.inputs.blade_pitch);
        let gen = eq.inputs.generator_torque * env.params.drivetrain.gear_ratio;
        torque = torque.max((aero - gen).abs() / aero.abs());
    }
    (residual, imbalance, torque)
}
