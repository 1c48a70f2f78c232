//! Dynamic wake transport and multi-wake superposition.
//!
//! Each turbine owns a 1-D grid along its downstream axis, carried in the
//! turbine's translating frame. Three transport equations are advanced with
//! first-order upwind differences and explicit Euler in time:
//!
//! ```text
//! ∂v_w/∂t + c ∂v_w/∂x = (dV∞/dt − dv/dt) + (2 k_t / D_w)(V∞ − v − v_w)
//! ∂y_w/∂t + c ∂y_w/∂x = v_w,y
//! ∂D_w/∂t + c ∂D_w/∂x = k_t              with c = U∞ − v_x
//! ```
//!
//! The radial profile around the centerline is Gaussian with σ = D_w / 4 and
//! overlapping wakes combine by root-sum-square of their deficits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{PlatformState, TurbineGeometry, Vector2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WakeParams {
    /// Grid spacing as a fraction of rotor diameter.
    pub spacing_diameters: f64,
    /// Downstream extent of every grid, in rotor diameters.
    pub length_diameters: f64,
    /// Temporal wake expansion rate k_t, m/s.
    pub expansion_rate: f64,
    /// Gaussian σ as a fraction of the local wake diameter.
    pub sigma_fraction: f64,
    /// Multiplier on the skewed-wake lateral velocity at the rotor plane.
    pub deflection_gain: f64,
}

impl Default for WakeParams {
    fn default() -> Self {
        Self {
            spacing_diameters: 0.25,
            length_diameters: 16.0,
            expansion_rate: 0.5,
            sigma_fraction: 0.38,
            deflection_gain: 1.0,
        }
    }
}

/// Rotor-plane state that sets the wake inflow boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorCondition {
    /// Free stream seen in the turbine frame, `V∞ − v`.
    pub free_stream_rel: Vector2,
    /// `|V_rel|` at the rotor.
    pub rotor_speed: f64,
    pub induction: f64,
    pub yaw_deg: f64,
}

impl RotorCondition {
    pub fn thrust_coefficient(&self) -> f64 {
        4.0 * self.induction * (1.0 - self.induction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct NodeValue {
    vw: Vector2,
    yw: f64,
    dw: f64,
}

/// Skewed-wake lateral velocity at the rotor plane (Jiménez-type).
///
/// `−½ C_t |V_rel| cos²γ' sinγ' / (1 + a)` with γ' the rotor-to-wind
/// misalignment; opposite in sign to the misalignment.
pub fn deflection_velocity(cond: &RotorCondition, gain: f64) -> f64 {
    let misalign = cond.yaw_deg.to_radians() - cond.free_stream_rel.y.atan2(cond.free_stream_rel.x);
    let (s, c) = misalign.sin_cos();
    -gain * 0.5 * cond.thrust_coefficient() * cond.rotor_speed * c * c * s / (1.0 + cond.induction)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WakeGrid {
    pub owner: usize,
    pub rotor_diameter: f64,
    pub dx: f64,
    /// Centerline velocity in the turbine frame.
    pub vw: Vec<Vector2>,
    /// Centerline offset from the turbine's downstream axis.
    pub yw: Vec<f64>,
    pub dw: Vec<f64>,
    pub expansion_rate: f64,
    pub sigma_fraction: f64,
    deflection_gain: f64,
    boundary: NodeValue,
}

impl WakeGrid {
    pub fn len(&self) -> usize {
        self.vw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vw.is_empty()
    }

    pub fn x_max(&self) -> f64 {
        (self.len() - 1) as f64 * self.dx
    }

    pub fn x_node(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    /// Recomputes the rotor-plane boundary from the current rotor state.
    pub fn set_boundary(&mut self, cond: &RotorCondition) -> Result<()> {
        self.boundary = boundary_value(cond, self.rotor_diameter, self.deflection_gain)?;
        Ok(())
    }

    /// Streamwise deficit at node `j` relative to the free stream in the turbine frame.
    fn node_deficit(&self, j: usize, free_stream_rel: Vector2) -> f64 {
        let n = free_stream_rel.unit_or_x();
        (free_stream_rel - self.vw[j]).dot(n)
    }

    /// Linear interpolation of (deficit, y_w, D_w) at `x_hat`.
    fn interpolate(&self, x_hat: f64, free_stream_rel: Vector2) -> Result<(f64, f64, f64)> {
        let xmax = self.x_max();
        if !(x_hat >= 0.0 && x_hat <= xmax) {
            return Err(Error::OutOfRange {
                t: x_hat,
                duration: xmax,
            });
        }
        let s = x_hat / self.dx;
        let j = (s.floor() as usize).min(self.len() - 2);
        let f = s - j as f64;
        let lerp = |a: f64, b: f64| a + (b - a) * f;
        Ok((
            lerp(
                self.node_deficit(j, free_stream_rel),
                self.node_deficit(j + 1, free_stream_rel),
            ),
            lerp(self.yw[j], self.yw[j + 1]),
            lerp(self.dw[j], self.dw[j + 1]),
        ))
    }

    /// Gaussian deficit at a global point, given the owner's current state.
    pub fn deficit_at(
        &self,
        owner: &PlatformState,
        point: Vector2,
        free_stream: Vector2,
    ) -> Option<f64> {
        let n = free_stream.unit_or_x();
        let rel = point - owner.position;
        let x_hat = rel.dot(n);
        if x_hat < 0.0 || x_hat > self.x_max() {
            return None;
        }
        let lateral = rel.x * -n.y + rel.y * n.x;
        let (deficit, yw, dw) = self.interpolate(x_hat, free_stream - owner.velocity).ok()?;
        let sigma = self.sigma_fraction * dw;
        let r = lateral - yw;
        Some(deficit * (-r * r / (2.0 * sigma * sigma)).exp())
    }

    /// Lateral offset of the centerline from the owner at `x_hat`, and local D_w.
    pub fn centerline(&self, x_hat: f64) -> Option<(f64, f64)> {
        self.interpolate(x_hat, Vector2::new(1.0, 0.0))
            .ok()
            .map(|(_, y, d)| (y, d))
    }
}

fn boundary_value(cond: &RotorCondition, rotor_diameter: f64, gain: f64) -> Result<NodeValue> {
    if !(0.0..0.5).contains(&cond.induction) {
        return Err(Error::InvalidInput(format!(
            "axial induction {} outside [0, 0.5)",
            cond.induction
        )));
    }
    let n = cond.free_stream_rel.unit_or_x();
    let lateral = Vector2::new(-n.y, n.x);
    let deficit = 2.0 * cond.induction * cond.rotor_speed;
    let v_lat = deflection_velocity(cond, gain);
    Ok(NodeValue {
        vw: cond.free_stream_rel - n * deficit + lateral * v_lat,
        yw: 0.0,
        dw: rotor_diameter,
    })
}

/// Builds a grid holding the discrete steady solution for the given rotor state.
pub fn init_wake(
    turbine: &TurbineGeometry,
    params: &WakeParams,
    cond: &RotorCondition,
) -> Result<WakeGrid> {
    if !(turbine.rotor_diameter > 0.0) {
        return Err(Error::InvalidInput(
            "rotor diameter must be positive".into(),
        ));
    }
    let dx = params.spacing_diameters * turbine.rotor_diameter;
    let n = (params.length_diameters / params.spacing_diameters).round() as usize + 1;
    let boundary = boundary_value(cond, turbine.rotor_diameter, params.deflection_gain)?;
    let mut grid = WakeGrid {
        owner: turbine.index,
        rotor_diameter: turbine.rotor_diameter,
        dx,
        vw: vec![boundary.vw; n],
        yw: vec![0.0; n],
        dw: vec![turbine.rotor_diameter; n],
        expansion_rate: params.expansion_rate,
        sigma_fraction: params.sigma_fraction,
        deflection_gain: params.deflection_gain,
        boundary,
    };
    let c = cond.free_stream_rel.x.max(1e-3);
    let k = params.expansion_rate;
    let free = cond.free_stream_rel;
    for j in 1..n {
        let dw = grid.dw[j - 1] + k * dx / c;
        // c (δ_j − δ_{j−1}) / dx = −(2k/D_j) δ_j
        let prev_def = free - grid.vw[j - 1];
        let def = prev_def * (1.0 / (1.0 + 2.0 * k * dx / (c * dw)));
        let vw = free - def;
        grid.dw[j] = dw;
        grid.vw[j] = vw;
        grid.yw[j] = grid.yw[j - 1] + dx * vw.y / c;
    }
    Ok(grid)
}

/// Inputs to one explicit wake step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WakeForcing {
    pub free_stream: Vector2,
    pub free_stream_accel: Vector2,
    pub platform_velocity: Vector2,
    pub platform_accel: Vector2,
}

/// Largest admissible time step for the current advection speed.
pub fn max_stable_dt(grid: &WakeGrid, forcing: &WakeForcing) -> f64 {
    let c = (forcing.free_stream.x - forcing.platform_velocity.x).abs();
    if c == 0.0 {
        f64::INFINITY
    } else {
        grid.dx / c
    }
}

/// One explicit upwind step of the three transport equations.
pub fn step_wake(grid: &mut WakeGrid, forcing: &WakeForcing, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let c = forcing.free_stream.x - forcing.platform_velocity.x;
    if c < 0.0 {
        return Err(Error::InvalidInput(format!(
            "negative advection speed {c} m/s"
        )));
    }
    let max_dt = max_stable_dt(grid, forcing);
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt });
    }
    let courant = c * dt / grid.dx;
    let k = grid.expansion_rate;
    let free_rel = forcing.free_stream - forcing.platform_velocity;
    let accel = forcing.free_stream_accel - forcing.platform_accel;
    // sweep downstream-to-upstream so j−1 still holds the old value
    for j in (1..grid.len()).rev() {
        let dw = grid.dw[j];
        let vw = grid.vw[j];
        let src_v = accel + (free_rel - vw) * (2.0 * k / dw);
        grid.vw[j] = vw - (vw - grid.vw[j - 1]) * courant + src_v * dt;
        grid.yw[j] = grid.yw[j] - courant * (grid.yw[j] - grid.yw[j - 1]) + dt * vw.y;
        grid.dw[j] = dw - courant * (dw - grid.dw[j - 1]) + dt * k;
    }
    grid.vw[0] = grid.boundary.vw;
    grid.yw[0] = grid.boundary.yw;
    grid.dw[0] = grid.boundary.dw;
    Ok(())
}

/// Gaussian wake velocity at downstream distance `x_hat` and global lateral
/// coordinate `y_global`; `owner_y` is the owner's current lateral position.
pub fn gaussian_velocity(
    grid: &WakeGrid,
    owner: &PlatformState,
    x_hat: f64,
    y_global: f64,
    free_stream: Vector2,
) -> Result<Vector2> {
    let n = free_stream.unit_or_x();
    let (deficit, yw, dw) = grid.interpolate(x_hat, free_stream - owner.velocity)?;
    let sigma = grid.sigma_fraction * dw;
    let r = y_global - (owner.position.y + yw);
    Ok(free_stream - n * (deficit * (-r * r / (2.0 * sigma * sigma)).exp()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WakeFieldSnapshot {
    pub grids: Vec<WakeGrid>,
    pub timestamp: f64,
}

// 7-point Gauss-Legendre nodes and weights on [-1, 1].
const GL7: [(f64, f64); 7] = [
    (0.0, 0.417_959_183_673_469_4),
    (-0.405_845_151_377_397_2, 0.381_830_050_505_118_9),
    (0.405_845_151_377_397_2, 0.381_830_050_505_118_9),
    (-0.741_531_185_599_394_4, 0.279_705_391_489_276_7),
    (0.741_531_185_599_394_4, 0.279_705_391_489_276_7),
    (-0.949_107_912_342_758_5, 0.129_484_966_168_869_7),
    (0.949_107_912_342_758_5, 0.129_484_966_168_869_7),
];

/// Rotor-averaged deficit of `grid` over a disc of diameter `diameter`
/// centered at `center`, by quadrature across the lateral diameter.
pub fn rotor_averaged_deficit(
    grid: &WakeGrid,
    owner: &PlatformState,
    center: Vector2,
    diameter: f64,
    free_stream: Vector2,
) -> Option<f64> {
    let n = free_stream.unit_or_x();
    let lateral = Vector2::new(-n.y, n.x);
    let mut acc = 0.0;
    for (xi, w) in GL7 {
        let p = center + lateral * (0.5 * diameter * xi);
        acc += 0.5 * w * grid.deficit_at(owner, p, free_stream)?;
    }
    Some(acc)
}

/// Upstream set of `target`: turbines strictly upstream along the wind
/// direction, ties broken by index.
pub fn upstream_set(
    target: usize,
    positions: &[PlatformState],
    free_stream: Vector2,
) -> Vec<usize> {
    let n = free_stream.unit_or_x();
    let s_t = positions[target].position.dot(n);
    (0..positions.len())
        .filter(|&q| {
            let s_q = positions[q].position.dot(n);
            q != target && (s_q < s_t || (s_q == s_t && q < target))
        })
        .collect()
}

/// Effective incident velocity on `target` via root-sum-square superposition.
pub fn effective_velocity(
    snapshot: &WakeFieldSnapshot,
    target: usize,
    positions: &[PlatformState],
    free_stream: Vector2,
) -> Vector2 {
    let n = free_stream.unit_or_x();
    let speed = free_stream.norm();
    let diameter = snapshot.grids[target].rotor_diameter;
    let sum_sq: f64 = upstream_set(target, positions, free_stream)
        .into_iter()
        .filter_map(|q| {
            rotor_averaged_deficit(
                &snapshot.grids[q],
                &positions[q],
                positions[target].position,
                diameter,
                free_stream,
            )
        })
        .map(|d| d.max(0.0).powi(2))
        .sum();
    n * (speed - sum_sq.sqrt()).clamp(0.0, speed)
}

/// Area fraction of the target disc inside the owner's wake edge (±2σ).
pub fn wake_overlap_fraction(
    grid: &WakeGrid,
    owner: &PlatformState,
    target_center: Vector2,
    target_diameter: f64,
    free_stream: Vector2,
) -> f64 {
    let n = free_stream.unit_or_x();
    let rel = target_center - owner.position;
    let x_hat = rel.dot(n);
    let Some((yw, dw)) = (if x_hat >= 0.0 {
        grid.centerline(x_hat)
    } else {
        None
    }) else {
        return 0.0;
    };
    let lateral = rel.x * -n.y + rel.y * n.x;
    let edge = 2.0 * grid.sigma_fraction * dw;
    circle_overlap_fraction(0.5 * target_diameter, edge, (lateral - yw).abs())
}

/// Fraction of circle 1 (radius r1) covered by circle 2 (radius r2) at center distance d.
pub fn circle_overlap_fraction(r1: f64, r2: f64, d: f64) -> f64 {
    use std::f64::consts::PI;
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r2 - r1).max(0.0) {
        return 1.0;
    }
    if d <= r1 - r2 {
        return (r2 * r2) / (r1 * r1);
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
        .clamp(-1.0, 1.0)
        .acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
        .clamp(-1.0, 1.0)
        .acos();
    let tri = 0.5
        * ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
            .max(0.0)
            .sqrt();
    (r1 * r1 * a1 + r2 * r2 * a2 - tri) / (PI * r1 * r1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Superposed wind speed sampled on a regular grid, row-major in y then x.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub spec: FieldSpec,
    pub speeds: Vec<f64>,
}

impl VelocityField {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.speeds[iy * self.spec.nx + ix]
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.spec;
        writeln!(
            out,
            "# nx ny x_min x_max y_min y_max (m); speeds m/s row-major by y"
        )?;
        writeln!(
            out,
            "{} {} {} {} {} {}",
            s.nx, s.ny, s.x_min, s.x_max, s.y_min, s.y_max
        )?;
        for iy in 0..s.ny {
            let row: Vec<String> = (0..s.nx)
                .map(|ix| format!("{:.6}", self.at(ix, iy)))
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

pub fn sample_field(
    snapshot: &WakeFieldSnapshot,
    positions: &[PlatformState],
    free_stream: Vector2,
    spec: FieldSpec,
) -> Result<VelocityField> {
    if spec.nx < 2 || spec.ny < 2 || !(spec.x_max > spec.x_min) || !(spec.y_max > spec.y_min) {
        return Err(Error::InvalidInput(
            "field spec needs a non-degenerate box and >= 2x2 resolution".into(),
        ));
    }
    let speed = free_stream.norm();
    let mut speeds = Vec::with_capacity(spec.nx * spec.ny);
    for iy in 0..spec.ny {
        let y = spec.y_min + (spec.y_max - spec.y_min) * iy as f64 / (spec.ny - 1) as f64;
        for ix in 0..spec.nx {
            let x = spec.x_min + (spec.x_max - spec.x_min) * ix as f64 / (spec.nx - 1) as f64;
            let p = Vector2::new(x, y);
            let sum_sq: f64 = snapshot
                .grids
                .iter()
                .zip(positions)
                .filter_map(|(g, owner)| g.deficit_at(owner, p, free_stream))
                .map(|d| d.max(0.0).powi(2))
                .sum();
            speeds.push((speed - sum_sq.sqrt()).clamp(0.0, speed));
        }
    }
    Ok(VelocityField { spec, speeds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(i: usize) -> TurbineGeometry {
        TurbineGeometry {
            rotor_diameter: 126.0,
            hub_height: 90.0,
            index: i,
        }
    }

    fn cond(a: f64, yaw: f64) -> RotorCondition {
        RotorCondition {
            free_stream_rel: Vector2::new(14.0, 0.0),
            rotor_speed: 14.0,
            induction: a,
            yaw_deg: yaw,
        }
    }

    fn forcing(u: f64) -> WakeForcing {
        WakeForcing {
            free_stream: Vector2::new(u, 0.0),
            free_stream_accel: Vector2::ZERO,
            platform_velocity: Vector2::ZERO,
            platform_accel: Vector2::ZERO,
        }
    }

    #[test]
    fn init_examples() {
        let p = WakeParams::default();
        let g = init_wake(&geom(0), &p, &cond(0.0, 0.0)).unwrap();
        assert!(g
            .vw
            .iter()
            .all(|v| (v.x - 14.0).abs() < 1e-12 && v.y.abs() < 1e-12));
        for j in 1..g.len() {
            let expected = 126.0 + p.expansion_rate * g.x_node(j) / 14.0;
            assert!((g.dw[j] - expected).abs() < 1e-9);
        }

        let g = init_wake(&geom(0), &p, &cond(0.3, 0.0)).unwrap();
        assert!((14.0 - g.vw[0].x - 8.4).abs() < 1e-12);

        let g = init_wake(&geom(0), &p, &cond(0.3, 20.0)).unwrap();
        let ct: f64 = 0.84;
        let g20 = 20f64.to_radians();
        let closed = -0.5 * ct * 14.0 * g20.cos().powi(2) * g20.sin() / 1.3;
        assert!(g.vw[0].y < 0.0);
        assert!((g.vw[0].y - closed).abs() < 1e-12);

        assert!(init_wake(&geom(0), &p, &cond(0.5, 0.0)).is_err());
    }

    #[test]
    fn uniform_diameter_grows_by_kt_dt() {
        let p = WakeParams {
            expansion_rate: 0.05,
            ..Default::default()
        };
        let mut g = init_wake(&geom(0), &p, &cond(0.0, 0.0)).unwrap();
        g.dw.iter_mut().for_each(|d| *d = 200.0);
        let f = forcing(3.0);
        step_wake(&mut g, &f, 10.0).unwrap();
        for j in 1..g.len() {
            assert!((g.dw[j] - 200.5).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_when_all_terms_vanish() {
        let p = WakeParams {
            expansion_rate: 0.0,
            ..Default::default()
        };
        let mut g = init_wake(&geom(0), &p, &cond(0.3, 10.0)).unwrap();
        let before = g.clone();
        let f = WakeForcing {
            free_stream: Vector2::new(2.0, 0.0),
            free_stream_accel: Vector2::ZERO,
            platform_velocity: Vector2::new(2.0, 0.0),
            platform_accel: Vector2::ZERO,
        };
        step_wake(&mut g, &f, 0.5).unwrap();
        // y_w still integrates the lateral wake velocity
        assert_eq!(g.vw, before.vw);
        assert_eq!(g.dw, before.dw);
    }

    #[test]
    fn cfl_violation_names_admissible_dt() {
        let mut g = init_wake(&geom(0), &WakeParams::default(), &cond(0.3, 0.0)).unwrap();
        match step_wake(&mut g, &forcing(14.0), 3.0) {
            Err(Error::Cfl { max_dt, .. }) => assert!((max_dt - 31.5 / 14.0).abs() < 1e-12),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn steady_init_is_a_fixed_point() {
        let p = WakeParams::default();
        let c = cond(0.3, 15.0);
        let mut g = init_wake(&geom(0), &p, &c).unwrap();
        let before = g.clone();
        for _ in 0..50 {
            step_wake(&mut g, &forcing(14.0), 0.5).unwrap();
        }
        for j in 0..g.len() {
            assert!((g.vw[j] - before.vw[j]).norm() < 1e-9);
            assert!((g.yw[j] - before.yw[j]).abs() < 1e-9);
            assert!((g.dw[j] - before.dw[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_profile() {
        let g = init_wake(&geom(0), &WakeParams::default(), &cond(0.3, 0.0)).unwrap();
        let owner = PlatformState::default();
        let free = Vector2::new(14.0, 0.0);
        let x = 10.0 * g.dx;
        let center = gaussian_velocity(&g, &owner, x, 0.0, free).unwrap();
        assert!((center.x - g.vw[10].x).abs() < 1e-12);
        let sigma = WakeParams::default().sigma_fraction * g.dw[10];
        let deficit = 14.0 - g.vw[10].x;
        let at_sigma = gaussian_velocity(&g, &owner, x, sigma, free).unwrap();
        assert!(((14.0 - at_sigma.x) / deficit - (-0.5f64).exp()).abs() < 1e-12);
        let far = gaussian_velocity(&g, &owner, x, 5.0 * sigma, free).unwrap();
        assert!((14.0 - far.x) < 0.01 * deficit);
        assert!(gaussian_velocity(&g, &owner, g.x_max() + 1.0, 0.0, free).is_err());
    }

    fn snapshot_with(deficits: &[f64]) -> (WakeFieldSnapshot, Vec<PlatformState>) {
        // flat grids with a huge diameter so the rotor average equals the centerline deficit
        let p = WakeParams {
            expansion_rate: 0.0,
            ..Default::default()
        };
        let mut grids = Vec::new();
        let mut pos = Vec::new();
        for (i, d) in deficits.iter().enumerate() {
            let mut g = init_wake(&geom(i), &p, &cond(0.0, 0.0)).unwrap();
            g.vw.iter_mut().for_each(|v| v.x = 14.0 - d);
            g.dw.iter_mut().for_each(|w| *w = 1e7);
            grids.push(g);
            pos.push(PlatformState::at(Vector2::new(100.0 * i as f64, 0.0)));
        }
        let mut g = init_wake(&geom(deficits.len()), &p, &cond(0.0, 0.0)).unwrap();
        g.dw.iter_mut().for_each(|w| *w = 1e7);
        grids.push(g);
        pos.push(PlatformState::at(Vector2::new(
            100.0 * deficits.len() as f64,
            0.0,
        )));
        (
            WakeFieldSnapshot {
                grids,
                timestamp: 0.0,
            },
            pos,
        )
    }

    #[test]
    fn superposition_examples() {
        let free = Vector2::new(14.0, 0.0);
        let (snap, pos) = snapshot_with(&[]);
        assert_eq!(effective_velocity(&snap, 0, &pos, free), free);

        let (snap, pos) = snapshot_with(&[3.0]);
        let v = effective_velocity(&snap, 1, &pos, free);
        assert!((v.x - 11.0).abs() < 1e-9);

        let (snap, pos) = snapshot_with(&[3.0, 3.0]);
        let v = effective_velocity(&snap, 2, &pos, free);
        assert!((v.x - (14.0 - 18f64.sqrt())).abs() < 1e-9);
        assert!((v.x - 9.757).abs() < 1e-3);
    }

    #[test]
    fn single_wake_equals_rotor_average() {
        let p = WakeParams::default();
        let g0 = init_wake(&geom(0), &p, &cond(0.3, 0.0)).unwrap();
        let g1 = init_wake(&geom(1), &p, &cond(0.3, 0.0)).unwrap();
        let pos = vec![
            PlatformState::at(Vector2::new(0.0, 0.0)),
            PlatformState::at(Vector2::new(882.0, 30.0)),
        ];
        let free = Vector2::new(14.0, 0.0);
        let snap = WakeFieldSnapshot {
            grids: vec![g0.clone(), g1],
            timestamp: 0.0,
        };
        let avg = rotor_averaged_deficit(&g0, &pos[0], pos[1].position, 126.0, free).unwrap();
        let v = effective_velocity(&snap, 1, &pos, free);
        assert!((v.x - (14.0 - avg)).abs() < 1e-12);
        // rotor average never exceeds the centerline deficit
        let centerline = 14.0
            - gaussian_velocity(&g0, &pos[0], 882.0, g0.centerline(882.0).unwrap().0, free)
                .unwrap()
                .x;
        assert!(avg <= centerline + 1e-12);
    }

    #[test]
    fn upstream_ties_broken_by_index() {
        let pos = vec![
            PlatformState::at(Vector2::new(0.0, 0.0)),
            PlatformState::at(Vector2::new(0.0, 200.0)),
        ];
        let free = Vector2::new(14.0, 0.0);
        assert_eq!(upstream_set(1, &pos, free), vec![0]);
        assert!(upstream_set(0, &pos, free).is_empty());
    }

    #[test]
    fn overlap_fraction_limits() {
        assert_eq!(circle_overlap_fraction(1.0, 1.0, 3.0), 0.0);
        assert_eq!(circle_overlap_fraction(1.0, 2.0, 0.5), 1.0);
        let half = circle_overlap_fraction(1.0, 1.0, 0.0);
        assert!((half - 1.0).abs() < 1e-12);
        let f = circle_overlap_fraction(1.0, 1.0, 1.0);
        // lens area of two unit circles at unit distance
        let lens = 2.0 * std::f64::consts::PI / 3.0 - 3f64.sqrt() / 2.0;
        assert!((f - lens / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn field_far_upstream_is_free_stream() {
        let p = WakeParams::default();
        let g = init_wake(&geom(0), &p, &cond(0.3, 0.0)).unwrap();
        let snap = WakeFieldSnapshot {
            grids: vec![g],
            timestamp: 0.0,
        };
        let pos = vec![PlatformState::at(Vector2::new(1000.0, 0.0))];
        let free = Vector2::new(14.0, 0.0);
        let spec = FieldSpec {
            x_min: 0.0,
            x_max: 900.0,
            y_min: -200.0,
            y_max: 200.0,
            nx: 10,
            ny: 5,
        };
        let field = sample_field(&snap, &pos, free, spec).unwrap();
        assert!(field.speeds.iter().all(|s| *s == 14.0));
        assert!(sample_field(&snap, &pos, free, FieldSpec { nx: 1, ..spec }).is_err());
    }

    #[test]
    fn centerline_recovers_monotonically() {
        let p = WakeParams::default();
        let g = init_wake(&geom(0), &p, &cond(0.3, 0.0)).unwrap();
        let snap = WakeFieldSnapshot {
            grids: vec![g],
            timestamp: 0.0,
        };
        let pos = vec![PlatformState::default()];
        let spec = FieldSpec {
            x_min: 10.0,
            x_max: 1900.0,
            y_min: -1.0,
            y_max: 1.0,
            nx: 60,
            ny: 3,
        };
        let field = sample_field(&snap, &pos, Vector2::new(14.0, 0.0), spec).unwrap();
        for ix in 1..spec.nx {
            assert!(field.at(ix, 1) >= field.at(ix - 1, 1) - 1e-12);
        }
    }

    #[test]
    fn symmetric_layout_gives_symmetric_field() {
        let p = WakeParams::default();
        let g0 = init_wake(&geom(0), &p, &cond(0.3, 0.0)).unwrap();
        let g1 = init_wake(&geom(1), &p, &cond(0.3, 0.0)).unwrap();
        let snap = WakeFieldSnapshot {
            grids: vec![g0, g1],
            timestamp: 0.0,
        };
        let pos = vec![
            PlatformState::at(Vector2::new(0.0, 150.0)),
            PlatformState::at(Vector2::new(0.0, -150.0)),
        ];
        let spec = FieldSpec {
            x_min: 0.0,
            x_max: 1500.0,
            y_min: -400.0,
            y_max: 400.0,
            nx: 31,
            ny: 41,
        };
        let field = sample_field(&snap, &pos, Vector2::new(14.0, 0.0), spec).unwrap();
        for iy in 0..spec.ny {
            for ix in 0..spec.nx {
                assert!((field.at(ix, iy) - field.at(ix, spec.ny - 1 - iy)).abs() < 1e-9);
            }
        }
    }
}
