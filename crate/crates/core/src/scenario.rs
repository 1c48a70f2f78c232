//! Scenario configuration, orchestration of full runs, and run metrics.
//!
//! A run synthesizes the wind, optionally searches for a layout, simulates
//! the farm in closed loop, and writes time series, diagnostics, velocity
//! field snapshots and a metrics summary into its output directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::{build_controllers, build_governors, GovernorGains, TurbinePlan};
use crate::error::{Error, Result};
use crate::farm::{
    allocate_power, optimize_layout, EpisodeSpec, Objective, SearchBounds, SearchOptions,
    SearchResult, Setpoints,
};
use crate::frame::{FarmLayout, PlatformState, TurbineGeometry, Vector2};
use crate::mpc::{ConstraintSet, MpcConfig};
use crate::params::PhysicalParams;
use crate::plant::{PlantEnv, RotorModel};
use crate::sim::{FarmControl, FarmSimulator, StepRecord};
use crate::wake::{sample_field, FieldSpec, VelocityField, WakeFieldSnapshot};
use crate::wind::{synthesize, WindSeries, WindSpec};

/// Bundled presets, selectable as `preset:<name>` wherever a path is accepted.
pub const PRESETS: [(&str, &str); 3] = [
    ("scenario1", include_str!("../presets/scenario1.cfg")),
    ("scenario2", include_str!("../presets/scenario2.cfg")),
    ("baseline", include_str!("../presets/baseline.cfg")),
];

/// Row of identical turbines along the mean wind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub turbines: usize,
    /// Distance between mooring neutral points, in rotor diameters.
    pub spacing_diameters: f64,
    /// Initial surge of every platform from its neutral point, m.
    pub initial_surge: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            turbines: 3,
            spacing_diameters: 7.0,
            initial_surge: 84.0,
        }
    }
}

impl LayoutConfig {
    /// Rotor geometry comes from the physical parameters.
    pub fn build(&self, params: &PhysicalParams) -> FarmLayout {
        let spacing = self.spacing_diameters * params.rotor.diameter;
        FarmLayout {
            turbines: (0..self.turbines)
                .map(|i| TurbineGeometry {
                    rotor_diameter: params.rotor.diameter,
                    hub_height: params.rotor.hub_height,
                    index: i,
                })
                .collect(),
            initial: (0..self.turbines)
                .map(|i| {
                    PlatformState::at(Vector2::new(spacing * i as f64 + self.initial_surge, 0.0))
                })
                .collect(),
            mooring_origin: (0..self.turbines)
                .map(|i| Vector2::new(spacing * i as f64, 0.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    pub mean_speed: f64,
    /// Direction the wind blows toward, measured from +x, deg.
    pub direction_deg: f64,
    pub turbulence_intensity: f64,
    pub integral_length_scale: f64,
    pub sample_dt: f64,
    pub seed: u64,
    pub lateral_turbulence: bool,
}

impl Default for WindConfig {
    fn default() -> Self {
        let c = WindSpec::case_study(7);
        Self {
            mean_speed: c.mean_velocity.norm(),
            direction_deg: 0.0,
            turbulence_intensity: c.turbulence_intensity,
            integral_length_scale: c.integral_length_scale,
            sample_dt: c.sample_dt,
            seed: c.seed,
            lateral_turbulence: c.lateral_turbulence,
        }
    }
}

impl WindConfig {
    pub fn mean_velocity(&self) -> Vector2 {
        let (s, c) = self.direction_deg.to_radians().sin_cos();
        Vector2::new(c, s) * self.mean_speed
    }

    /// Wind spec covering `duration` plus one sample of margin.
    pub fn spec(&self, duration: f64) -> WindSpec {
        WindSpec {
            mean_velocity: self.mean_velocity(),
            turbulence_intensity: self.turbulence_intensity,
            integral_length_scale: self.integral_length_scale,
            duration: duration + self.sample_dt,
            sample_dt: self.sample_dt,
            seed: self.seed,
            lateral_turbulence: self.lateral_turbulence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Maximize,
    Track,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Farm power target in tracking mode, W.
    pub target_power: f64,
    pub repositioning: bool,
    /// Time each turbine holds its initial position before moving, s.
    pub delays: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
    /// Left out of the config echo so reruns into other directories match.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Physical parameter file; the bundled file when absent.
    pub parameters: Option<PathBuf>,
    /// Times at which velocity field snapshots are written, s.
    pub field_times: Vec<f64>,
    /// Lateral targets used instead of a search when given, m.
    pub targets: Option<Vec<f64>>,
    /// Lateral error band that defines settling, m.
    pub settle_band: f64,
    /// Time the error must stay inside the band to count as settled, s.
    pub settle_dwell: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Maximize,
            target_power: 13e6,
            repositioning: true,
            delays: Vec::new(),
            duration: 3600.0,
            dt: 0.5,
            output_dir: PathBuf::from("runs/default"),
            parameters: None,
            field_times: vec![0.0, 3500.0],
            targets: None,
            settle_band: 5.0,
            settle_dwell: 300.0,
        }
    }
}

/// Score used by the search in maximize mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaximizeObjective {
    ProjectedSpeed,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub objective: MaximizeObjective,
    pub episode_duration: f64,
    pub induction: f64,
    pub window_fraction: f64,
    pub overlap_weight: f64,
    pub initial_mesh: f64,
    pub min_mesh: f64,
    pub budget: usize,
    /// Cap on the lateral search range, m.
    pub bound_cap: f64,
    /// Tracking-mode yaw penalty, MW per deg².
    pub yaw_penalty: f64,
    /// Tracking-mode availability reserve as a fraction of the target.
    pub headroom: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let s = SearchOptions::default();
        Self {
            objective: MaximizeObjective::ProjectedSpeed,
            episode_duration: 2000.0,
            induction: 0.3,
            window_fraction: 0.25,
            overlap_weight: 0.1,
            initial_mesh: s.initial_mesh,
            min_mesh: s.min_mesh,
            budget: s.budget,
            bound_cap: 120.0,
            yaw_penalty: 1e-3,
            headroom: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn options(&self) -> SearchOptions {
        SearchOptions {
            initial_mesh: self.initial_mesh,
            min_mesh: self.min_mesh,
            budget: self.budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ScenarioConfig {
    pub layout: LayoutConfig,
    pub wind: WindConfig,
    #[serde(rename = "scenario")]
    pub run: RunConfig,
    pub search: SearchConfig,
    pub mpc: MpcConfig,
    pub constraints: ConstraintSet,
    /// Where the config was read from, for the run log.
    #[serde(skip)]
    pub source: String,
}

const SECTIONS: [&str; 6] = ["layout", "wind", "scenario", "search", "mpc", "constraints"];

fn section<T: for<'de> Deserialize<'de> + Default>(
    table: &toml::Table,
    name: &str,
    errs: &mut Vec<String>,
) -> T {
    match table.get(name) {
        None => T::default(),
        Some(v) => match v.clone().try_into::<T>() {
            Ok(t) => t,
            Err(e) => {
                errs.push(format!("[{name}] {}", e.message().trim()));
                T::default()
            }
        },
    }
}

impl ScenarioConfig {
    /// Parses config text, filling defaults. Every section is checked and
    /// all problems are reported together.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: source.to_string(),
            message: e.message().trim().to_string(),
        })?;
        let mut errs = Vec::new();
        for key in table.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                errs.push(format!(
                    "unknown section [{key}]; expected one of {}",
                    SECTIONS.join(", ")
                ));
            }
        }
        let cfg = Self {
            layout: section(&table, "layout", &mut errs),
            wind: section(&table, "wind", &mut errs),
            run: section(&table, "scenario", &mut errs),
            search: section(&table, "search", &mut errs),
            mpc: section(&table, "mpc", &mut errs),
            constraints: section(&table, "constraints", &mut errs),
            source: source.to_string(),
        };
        errs.extend(cfg.problems());
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Every semantic problem with the config.
    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let l = &self.layout;
        if l.turbines == 0 {
            errs.push("layout.turbines must be at least 1".into());
        }
        if !(l.spacing_diameters > 0.0) {
            errs.push(format!(
                "layout.spacing_diameters must be positive, got {}",
                l.spacing_diameters
            ));
        }
        if !l.initial_surge.is_finite() {
            errs.push("layout.initial_surge must be finite".into());
        }

        let r = &self.run;
        if !(r.dt > 0.0) {
            errs.push(format!("scenario.dt must be positive, got {}", r.dt));
        }
        if !(r.duration > 0.0) {
            errs.push(format!(
                "scenario.duration must be positive, got {}",
                r.duration
            ));
        }
        if r.dt > 0.0 && r.duration > 0.0 && !is_multiple(r.duration, r.dt) {
            errs.push(format!(
                "scenario.duration ({}) is not a multiple of scenario.dt ({})",
                r.duration, r.dt
            ));
        }
        if r.dt > 0.0 && !is_multiple(self.mpc.sample_time, r.dt) {
            errs.push(format!(
                "mpc.sample_time ({}) is not a multiple of scenario.dt ({})",
                self.mpc.sample_time, r.dt
            ));
        }
        if !r.delays.is_empty() && r.delays.len() != l.turbines {
            errs.push(format!(
                "scenario.delays has {} entries for {} turbines",
                r.delays.len(),
                l.turbines
            ));
        }
        if r.delays.iter().any(|d| !(*d >= 0.0)) {
            errs.push(format!(
                "scenario.delays must be non-negative, got {:?}",
                r.delays
            ));
        }
        if !(r.settle_band > 0.0) || !(r.settle_dwell >= 0.0) {
            errs.push(format!(
                "scenario.settle_band ({}) must be positive and scenario.settle_dwell ({}) non-negative",
                r.settle_band, r.settle_dwell
            ));
        }
        if let Some(t) = &r.targets {
            if t.len() != l.turbines {
                errs.push(format!(
                    "scenario.targets has {} entries for {} turbines",
                    t.len(),
                    l.turbines
                ));
            }
        }
        if r.mode == Mode::Track && !(r.target_power > 0.0) {
            errs.push(format!(
                "scenario.target_power must be positive in track mode, got {}",
                r.target_power
            ));
        }
        if r.field_times
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= r.duration))
        {
            errs.push(format!(
                "scenario.field_times must lie in [0, {}], got {:?}",
                r.duration, r.field_times
            ));
        }

        let w = &self.wind;
        if let Err(e) = w.spec(r.duration.max(w.sample_dt)).validate() {
            errs.push(format!("[wind] {e}"));
        }

        let s = &self.search;
        if !(s.induction > 0.0 && s.induction < 0.5) {
            errs.push(format!(
                "search.induction must be in (0, 0.5), got {}",
                s.induction
            ));
        }
        if !(s.window_fraction > 0.0 && s.window_fraction <= 1.0) {
            errs.push(format!(
                "search.window_fraction must be in (0, 1], got {}",
                s.window_fraction
            ));
        }
        if !(s.episode_duration > 0.0) {
            errs.push(format!(
                "search.episode_duration must be positive, got {}",
                s.episode_duration
            ));
        }
        if !(s.min_mesh > 0.0 && s.initial_mesh >= s.min_mesh) {
            errs.push(format!(
                "search mesh sizes must satisfy 0 < min_mesh ({}) <= initial_mesh ({})",
                s.min_mesh, s.initial_mesh
            ));
        }
        if s.budget == 0 {
            errs.push("search.budget must be at least 1".into());
        }
        if !(s.bound_cap > 0.0) {
            errs.push(format!(
                "search.bound_cap must be positive, got {}",
                s.bound_cap
            ));
        }
        if !(s.yaw_penalty >= 0.0) || !(s.headroom >= 0.0) || !(s.overlap_weight >= 0.0) {
            errs.push("search.yaw_penalty, search.headroom and search.overlap_weight must be non-negative".into());
        }
        errs.extend(self.mpc.validate());
        errs
    }

    /// Reads a config from a path, or a bundled preset named `preset:<name>`.
    pub fn load(path: &str) -> Result<Self> {
        if let Some(name) = path.strip_prefix("preset:") {
            let text = PRESETS
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "unknown preset {name}; available: {}",
                        PRESETS.map(|p| p.0).join(", ")
                    ))
                })?;
            return Self::parse(text, path);
        }
        let text = fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        match &self.run.parameters {
            None => Ok(PhysicalParams::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                PhysicalParams::parse(&text).map_err(|e| match e {
                    Error::Parse { message, .. } => Error::Parse {
                        path: p.display().to_string(),
                        message,
                    },
                    other => other,
                })
            }
        }
    }

    pub fn delays(&self) -> Vec<f64> {
        if self.run.delays.is_empty() {
            vec![0.0; self.layout.turbines]
        } else {
            self.run.delays.clone()
        }
    }

    /// The config as TOML, as echoed into every run directory.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn is_multiple(value: f64, step: f64) -> bool {
    let n = (value / step).round();
    n >= 1.0 && (value - n * step).abs() <= 1e-9 * value.abs().max(1.0)
}

/// Shorthand used by the CLI and tests.
pub fn load_config(path: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path)
}

/// Lateral targets and power demands chosen before the closed-loop run.
#[derive(Debug, Clone)]
pub struct LayoutPlan {
    pub targets: Vec<f64>,
    pub power_targets: Vec<f64>,
    pub search: Option<SearchResult>,
}

/// Velocity field sampled at a time, s.
pub type FieldSnapshot = (f64, VelocityField);

/// Everything a run produces before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub plan: LayoutPlan,
    pub records: Vec<StepRecord>,
    pub fields: Vec<FieldSnapshot>,
    pub metrics: RunMetrics,
    /// Physical constants with their source notes.
    pub provenance: Vec<String>,
    /// Wall-clock seconds spent in the search and in the simulation.
    pub search_seconds: f64,
    pub simulation_seconds: f64,
}

/// Shared setup of a run: parameters, plant environment, layout and wind.
pub struct RunContext {
    pub params: PhysicalParams,
    pub env: PlantEnv,
    pub layout: FarmLayout,
    pub wind: Arc<WindSeries>,
}

impl RunContext {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let params = cfg.physical_params()?;
        let env = PlantEnv::new(params.clone())?;
        let layout = cfg.layout.build(&params);
        let span = cfg.run.duration.max(cfg.search.episode_duration);
        let wind = Arc::new(synthesize(&cfg.wind.spec(span))?);
        Ok(Self {
            params,
            env,
            layout,
            wind,
        })
    }

    fn rated(&self) -> f64 {
        self.params.operating.rated_power
    }

    fn episode(&self, cfg: &ScenarioConfig) -> EpisodeSpec {
        let s = &cfg.search;
        let mut e = EpisodeSpec::new(self.wind.clone(), Some(cfg.wind.seed));
        e.duration = s.episode_duration;
        e.induction = s.induction;
        e.window_fraction = s.window_fraction;
        e.overlap_weight = s.overlap_weight;
        e
    }

    fn objective(&self, cfg: &ScenarioConfig) -> Objective {
        match (cfg.run.mode, cfg.search.objective) {
            (Mode::Track, _) => Objective::TrackPower {
                target: cfg.run.target_power,
                yaw_penalty: cfg.search.yaw_penalty,
                headroom: cfg.search.headroom,
            },
            (Mode::Maximize, MaximizeObjective::ProjectedSpeed) => {
                Objective::MaximizeProjectedSpeed
            }
            (Mode::Maximize, MaximizeObjective::Power) => Objective::MaximizePower,
        }
    }

    /// Chooses targets and power demands. Searches unless repositioning is
    /// off or the targets are fixed in the config.
    pub fn plan(&self, cfg: &ScenarioConfig) -> Result<LayoutPlan> {
        let n = self.layout.len();
        let rated = self.rated();
        if !cfg.run.repositioning {
            return Ok(LayoutPlan {
                targets: vec![0.0; n],
                power_targets: vec![rated; n],
                search: None,
            });
        }
        let objective = self.objective(cfg);
        let episode = self.episode(cfg);
        let (targets, available, search) = match &cfg.run.targets {
            Some(t) => {
                let e = crate::farm::evaluate_candidate(
                    &self.env,
                    &self.layout,
                    t,
                    &episode,
                    objective,
                )?;
                if !e.is_feasible() {
                    return Err(Error::Infeasible(format!(
                        "configured targets {t:?} are infeasible ({:?})",
                        e.feasibility
                    )));
                }
                let avail: Vec<f64> = e.metrics.iter().map(|m| m.power).collect();
                (t.clone(), avail, None)
            }
            None => {
                let bounds =
                    SearchBounds::from_mooring(&self.env, &self.layout, cfg.search.bound_cap);
                let r = optimize_layout(
                    &self.env,
                    &self.layout,
                    &vec![0.0; n],
                    &bounds,
                    objective,
                    &episode,
                    cfg.search.options(),
                )?;
                let avail: Vec<f64> = r.best.metrics.iter().map(|m| m.power).collect();
                (r.best.candidate.clone(), avail, Some(r))
            }
        };
        let power_targets = match cfg.run.mode {
            Mode::Maximize => vec![rated; n],
            Mode::Track => allocate_power(&available, cfg.run.target_power, rated)?,
        };
        Ok(LayoutPlan {
            targets,
            power_targets,
            search,
        })
    }

    /// Closed-loop run to `duration`, sampling the velocity field at each
    /// of `field_times`.
    pub fn simulate(
        &self,
        cfg: &ScenarioConfig,
        plan: &LayoutPlan,
        duration: f64,
        field_times: &[f64],
    ) -> Result<(Vec<StepRecord>, Vec<FieldSnapshot>)> {
        let mean = cfg.wind.mean_velocity();
        let ts = cfg.mpc.sample_time;
        let (mut control, initial): (Box<dyn FarmControl>, _) = if cfg.run.repositioning {
            let delays = cfg.delays();
            let plans: Vec<TurbinePlan> = (0..self.layout.len())
                .map(|i| TurbinePlan {
                    initial_y: 0.0,
                    target_y: plan.targets[i],
                    start_delay: delays[i],
                    power_target: plan.power_targets[i],
                })
                .collect();
            let setup = build_controllers(
                &self.env,
                &self.layout,
                &plans,
                mean,
                cfg.mpc,
                cfg.constraints,
            )?;
            (Box::new(setup.control), setup.initial)
        } else {
            let (c, init) = build_governors(
                &self.env,
                &self.layout,
                &plan.power_targets,
                mean,
                GovernorGains::default(),
                ts,
            )?;
            (Box::new(c), init)
        };
        let mut sim = FarmSimulator::new(
            &self.env,
            self.layout.clone(),
            &self.wind,
            RotorModel::Full,
            &initial,
        )?;
        sim.dt = cfg.run.dt;
        sim.control_every = (ts / cfg.run.dt).round() as usize;

        let spec = self.field_spec();
        let steps = (duration / cfg.run.dt).round() as usize;
        let mut fields = Vec::new();
        let mut pending: Vec<f64> = field_times.to_vec();
        pending.sort_by(f64::total_cmp);
        pending.dedup();
        let mut pending = pending.into_iter().peekable();
        let mut records = Vec::with_capacity(steps);
        for k in 0..=steps {
            let t = k as f64 * cfg.run.dt;
            while let Some(&ft) = pending.peek() {
                if ft > t + 0.5 * cfg.run.dt {
                    break;
                }
                pending.next();
                fields.push((ft, self.field_now(&mut sim, spec)?));
            }
            if k < steps {
                records.push(sim.step(control.as_mut())?);
            }
        }
        Ok((records, fields))
    }

    fn field_spec(&self) -> FieldSpec {
        let d = self.params.rotor.diameter;
        let last = self
            .layout
            .mooring_origin
            .iter()
            .map(|o| o.x)
            .fold(0.0, f64::max);
        let x_min = -2.0 * d;
        let x_max = last + 12.0 * d;
        FieldSpec {
            x_min,
            x_max,
            y_min: -4.0 * d,
            y_max: 4.0 * d,
            nx: ((x_max - x_min) / FIELD_RESOLUTION).round() as usize + 1,
            ny: (8.0 * d / FIELD_RESOLUTION).round() as usize + 1,
        }
    }

    fn field_now(&self, sim: &mut FarmSimulator<'_>, spec: FieldSpec) -> Result<VelocityField> {
        let free = self.wind.sample(sim.time())?.velocity;
        let snapshot = WakeFieldSnapshot {
            grids: sim.wakes.clone(),
            timestamp: sim.time(),
        };
        sample_field(&snapshot, &sim.positions(), free, spec)
    }
}

/// Grid spacing of written velocity fields, m.
const FIELD_RESOLUTION: f64 = 10.0;

/// Length of the moving window used to decide whether a power level is sustained, s.
pub const SUSTAIN_WINDOW: f64 = 300.0;

/// Synthesizes the wind, plans the layout, runs the closed loop and computes metrics.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let ctx = RunContext::new(cfg)?;
    let started = std::time::Instant::now();
    let plan = ctx.plan(cfg)?;
    let search_seconds = started.elapsed().as_secs_f64();
    let started = std::time::Instant::now();
    let (records, fields) = ctx.simulate(cfg, &plan, cfg.run.duration, &cfg.run.field_times)?;
    let simulation_seconds = started.elapsed().as_secs_f64();
    let metrics = RunMetrics::compute(cfg, &plan, &records)?;
    Ok(RunOutput {
        config: cfg.clone(),
        plan,
        records,
        fields,
        metrics,
        provenance: ctx.params.provenance_lines(),
        search_seconds,
        simulation_seconds,
    })
}

/// Velocity field at `t` of a run described by `cfg`, regenerated by
/// deterministic replay with the targets the run used.
pub fn replay_field(cfg: &ScenarioConfig, plan: &LayoutPlan, t: f64) -> Result<VelocityField> {
    if !(t >= 0.0 && t <= cfg.run.duration) || !(t == 0.0 || is_multiple(t, cfg.run.dt)) {
        return Err(Error::InvalidInput(format!(
            "field time {t} s must be a multiple of dt ({}) within [0, {}]",
            cfg.run.dt, cfg.run.duration
        )));
    }
    let ctx = RunContext::new(cfg)?;
    let (_, mut fields) = ctx.simulate(cfg, plan, t, &[t])?;
    fields
        .pop()
        .map(|f| f.1)
        .ok_or_else(|| Error::InvalidInput(format!("no field sampled at {t} s")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineRunMetrics {
    pub target_y: f64,
    pub start_delay: f64,
    pub power_target: f64,
    /// Time from the start of the move until the lateral error enters the
    /// settle band and dwells there, s. Absent when the turbine never settles.
    pub settle_time: Option<f64>,
    /// Lateral RMSE against the target from the settle instant onward, m.
    pub lateral_rmse: Option<f64>,
    pub mean_power: f64,
    /// Mean effective wind speed over the farm window, m/s.
    pub window_effective_speed: f64,
    pub generator_speed_min_rpm: f64,
    pub generator_speed_max_rpm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub duration: f64,
    pub dt: f64,
    pub repositioning: bool,
    pub mode: Mode,
    pub settle_band: f64,
    pub settle_dwell: f64,
    /// Start of the post-settle window: the latest turbine settle instant, s.
    pub window_start: f64,
    /// Trapezoidal integral of logged farm power, J.
    pub total_energy: f64,
    pub mean_farm_power: f64,
    /// Farm power target in tracking mode, W.
    pub power_target: Option<f64>,
    /// Farm power RMSE against the target over the post-settle window, W.
    pub power_tracking_rmse: Option<f64>,
    /// Largest mean farm power over any sustain window, W.
    pub peak_sustained_power: f64,
    pub saturation_violations: usize,
    pub rate_violations: usize,
    pub speed_band_violations: usize,
    pub degraded_steps: usize,
    pub infeasible_steps: usize,
    /// Gain against a paired baseline, %. Set only by a comparison.
    pub energy_gain_percent: Option<f64>,
    pub layout: LayoutConfig,
    pub wind: WindConfig,
    pub turbines: Vec<TurbineRunMetrics>,
}

/// Trapezoidal integral of `values` sampled at `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
        .sum()
}

/// First instant at or after `start` that opens a run of samples within
/// `band` of `target` lasting at least `dwell`, or lasting to the end of the
/// record.
pub fn settle_instant(
    times: &[f64],
    values: &[f64],
    target: f64,
    start: f64,
    band: f64,
    dwell: f64,
) -> Option<f64> {
    let mut entered: Option<f64> = None;
    for (t, v) in times.iter().zip(values) {
        if *t < start {
            continue;
        }
        if (v - target).abs() <= band {
            let t0 = *entered.get_or_insert(*t);
            if t - t0 >= dwell {
                return Some(t0);
            }
        } else {
            entered = None;
        }
    }
    entered
}

/// Largest mean of `values` over any window spanning `window` seconds.
pub fn peak_window_mean(times: &[f64], values: &[f64], window: f64) -> f64 {
    let n = times.len();
    if n == 0 {
        return 0.0;
    }
    let dt = if n > 1 { times[1] - times[0] } else { window };
    let len = ((window / dt).round() as usize).clamp(1, n);
    let mut sum: f64 = values[..len].iter().sum();
    let mut best = sum;
    for k in len..n {
        sum += values[k] - values[k - len];
        best = best.max(sum);
    }
    best / len as f64
}

fn rms(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

const LIMIT_TOLERANCE: f64 = 1e-9;

fn exceeds_rate(limit: &crate::frame::ActuatorLimit, previous: f64, next: f64, dt: f64) -> bool {
    (next - previous).abs() > limit.rate * dt * (1.0 + LIMIT_TOLERANCE) + LIMIT_TOLERANCE
}

impl RunMetrics {
    pub fn compute(
        cfg: &ScenarioConfig,
        plan: &LayoutPlan,
        records: &[StepRecord],
    ) -> Result<Self> {
        use crate::frame::{
            rad_s_to_rpm, GENERATOR_SPEED_MAX_RPM, GENERATOR_SPEED_MIN_RPM, PITCH_LIMIT,
            TORQUE_LIMIT, YAW_LIMIT,
        };
        if records.is_empty() {
            return Err(Error::InvalidInput("run produced no records".into()));
        }
        let n = records[0].turbines.len();
        let times: Vec<f64> = records.iter().map(|r| r.time).collect();
        let farm: Vec<f64> = records.iter().map(|r| r.farm_power).collect();
        let delays = if cfg.run.repositioning {
            cfg.delays()
        } else {
            vec![0.0; n]
        };
        let band = cfg.run.settle_band;

        let settle: Vec<Option<f64>> = (0..n)
            .map(|i| {
                let y: Vec<f64> = records.iter().map(|r| r.turbines[i].position.y).collect();
                settle_instant(
                    &times,
                    &y,
                    plan.targets[i],
                    delays[i],
                    band,
                    cfg.run.settle_dwell,
                )
            })
            .collect();
        let window_start = settle
            .iter()
            .map(|s| s.unwrap_or(cfg.run.duration))
            .fold(0.0, f64::max);
        let in_window = |t: f64| t >= window_start;

        let turbines = (0..n)
            .map(|i| {
                let rmse = settle[i].and_then(|s| {
                    rms(records
                        .iter()
                        .filter(|r| r.time >= s)
                        .map(|r| r.turbines[i].position.y - plan.targets[i]))
                });
                let speeds = records
                    .iter()
                    .map(|r| rad_s_to_rpm(r.turbines[i].generator_speed));
                let (lo, hi) = speeds.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                    (lo.min(w), hi.max(w))
                });
                TurbineRunMetrics {
                    target_y: plan.targets[i],
                    start_delay: delays[i],
                    power_target: plan.power_targets[i],
                    settle_time: settle[i].map(|s| s - delays[i]),
                    lateral_rmse: rmse,
                    mean_power: mean(records.iter().map(|r| r.turbines[i].power)),
                    window_effective_speed: mean(
                        records
                            .iter()
                            .filter(|r| in_window(r.time))
                            .map(|r| r.turbines[i].effective_wind.norm()),
                    ),
                    generator_speed_min_rpm: lo,
                    generator_speed_max_rpm: hi,
                }
            })
            .collect();

        let power_target = (cfg.run.mode == Mode::Track).then_some(cfg.run.target_power);
        let power_tracking_rmse = power_target.and_then(|p| {
            rms(records
                .iter()
                .filter(|r| in_window(r.time))
                .map(|r| r.farm_power - p))
        });

        let mut saturation = 0;
        let mut rate = 0;
        let mut band_violations = 0;
        let mut last_command: Option<(f64, Vec<crate::frame::ControlInputs>)> = None;
        for (k, r) in records.iter().enumerate() {
            for (i, t) in r.turbines.iter().enumerate() {
                if !t.applied.within_saturation() || !t.commanded.within_saturation() {
                    saturation += 1;
                }
                let rpm = rad_s_to_rpm(t.generator_speed);
                if !(GENERATOR_SPEED_MIN_RPM..=GENERATOR_SPEED_MAX_RPM).contains(&rpm) {
                    band_violations += 1;
                }
                if k > 0 {
                    let p = &records[k - 1].turbines[i].applied;
                    let a = &t.applied;
                    let dt = r.time - records[k - 1].time;
                    if exceeds_rate(&PITCH_LIMIT, p.blade_pitch, a.blade_pitch, dt)
                        || exceeds_rate(&TORQUE_LIMIT, p.generator_torque, a.generator_torque, dt)
                        || exceeds_rate(&YAW_LIMIT, p.nacelle_yaw, a.nacelle_yaw, dt)
                    {
                        rate += 1;
                    }
                }
            }
            if r.diagnostics.is_some() {
                let issued = r.time - cfg.run.dt;
                let cmds: Vec<_> = r.turbines.iter().map(|t| t.commanded).collect();
                if let Some((t0, prev)) = &last_command {
                    let dt = issued - t0;
                    for (p, a) in prev.iter().zip(&cmds) {
                        if exceeds_rate(&PITCH_LIMIT, p.blade_pitch, a.blade_pitch, dt)
                            || exceeds_rate(
                                &TORQUE_LIMIT,
                                p.generator_torque,
                                a.generator_torque,
                                dt,
                            )
                            || exceeds_rate(&YAW_LIMIT, p.nacelle_yaw, a.nacelle_yaw, dt)
                        {
                            rate += 1;
                        }
                    }
                }
                last_command = Some((issued, cmds));
            }
        }

        let degraded_steps = records
            .iter()
            .filter_map(|r| r.diagnostics.as_ref())
            .flatten()
            .filter(|d| d.degraded)
            .count();
        let infeasible_steps = records
            .iter()
            .flat_map(|r| &r.turbines)
            .filter(|t| t.repositioning_infeasible)
            .count();

        Ok(Self {
            seed: cfg.wind.seed,
            duration: cfg.run.duration,
            dt: cfg.run.dt,
            repositioning: cfg.run.repositioning,
            mode: cfg.run.mode,
            settle_band: band,
            settle_dwell: cfg.run.settle_dwell,
            window_start,
            total_energy: trapezoid(&times, &farm),
            mean_farm_power: mean(farm.iter().copied()),
            power_target,
            power_tracking_rmse,
            peak_sustained_power: peak_window_mean(&times, &farm, SUSTAIN_WINDOW),
            saturation_violations: saturation,
            rate_violations: rate,
            speed_band_violations: band_violations,
            degraded_steps,
            infeasible_steps,
            energy_gain_percent: None,
            layout: cfg.layout.clone(),
            wind: cfg.wind.clone(),
            turbines,
        })
    }
}

/// Metrics plus the effective-speed series needed to compare two runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub metrics: RunMetrics,
    pub times: Vec<f64>,
    /// Effective wind speed per record and turbine, m/s.
    pub effective_speed: Vec<Vec<f64>>,
}

impl RunSummary {
    pub fn from_output(out: &RunOutput) -> Self {
        Self {
            metrics: out.metrics.clone(),
            times: out.records.iter().map(|r| r.time).collect(),
            effective_speed: out
                .records
                .iter()
                .map(|r| r.turbines.iter().map(|t| t.effective_wind.norm()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub energy_with: f64,
    pub energy_without: f64,
    pub energy_gain_percent: f64,
    /// Start of the window the speed gains are averaged over, s.
    pub window_start: f64,
    pub effective_speed_with: Vec<f64>,
    pub effective_speed_without: Vec<f64>,
    pub effective_speed_gain_percent: Vec<f64>,
}

/// Energy and effective-speed gains of `with` over `without`. The speed
/// gains are averaged over the post-settle window of `with`.
pub fn compare_runs(with: &RunSummary, without: &RunSummary) -> Result<Comparison> {
    let (a, b) = (&with.metrics, &without.metrics);
    let mut errs = Vec::new();
    if a.seed != b.seed {
        errs.push(format!("wind seeds differ: {} vs {}", a.seed, b.seed));
    }
    if a.duration != b.duration || a.dt != b.dt {
        errs.push(format!(
            "durations or steps differ: {} s at {} s vs {} s at {} s",
            a.duration, a.dt, b.duration, b.dt
        ));
    }
    if a.wind != b.wind {
        errs.push("wind configurations differ".into());
    }
    if a.layout != b.layout {
        errs.push("layouts differ".into());
    }
    if with.times != without.times {
        errs.push("time axes differ".into());
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    if !(b.total_energy > 0.0) {
        return Err(Error::InvalidInput(format!(
            "baseline energy must be positive, got {}",
            b.total_energy
        )));
    }
    let window_start = a.window_start;
    let window_mean = |s: &RunSummary, i: usize| {
        mean(
            s.times
                .iter()
                .zip(&s.effective_speed)
                .filter(|(t, _)| **t >= window_start)
                .map(|(_, v)| v[i]),
        )
    };
    let n = a.turbines.len();
    let with_speed: Vec<f64> = (0..n).map(|i| window_mean(with, i)).collect();
    let without_speed: Vec<f64> = (0..n).map(|i| window_mean(without, i)).collect();
    Ok(Comparison {
        energy_with: a.total_energy,
        energy_without: b.total_energy,
        energy_gain_percent: (a.total_energy - b.total_energy) / b.total_energy * 100.0,
        window_start,
        effective_speed_gain_percent: with_speed
            .iter()
            .zip(&without_speed)
            .map(|(w, o)| (w - o) / o * 100.0)
            .collect(),
        effective_speed_with: with_speed,
        effective_speed_without: without_speed,
    })
}

/// File names inside a run directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const SETPOINTS: &str = "setpoints.toml";
    pub const METRICS: &str = "metrics.toml";
    pub const LOG: &str = "run.log";
    /// Wall-clock timings; the only file that differs between reruns.
    pub const TIMING: &str = "timing.log";
    pub const POSITIONS: &str = "positions.csv";
    pub const INPUTS: &str = "inputs.csv";
    pub const POWER: &str = "power.csv";
    pub const EFFECTIVE_SPEED: &str = "effective_speed.csv";
    pub const FARM: &str = "farm.csv";
    pub const DIAGNOSTICS: &str = "diagnostics.csv";
    pub const SEARCH_TRACE: &str = "search_trace.csv";

    pub fn field(t: f64) -> String {
        format!("field_t{t}.grid")
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes lateral targets and power demands as TOML.
pub fn write_setpoints(plan: &LayoutPlan, path: &Path) -> Result<()> {
    let text = toml::to_string(&Setpoints {
        lateral: plan.targets.clone(),
        power: plan.power_targets.clone(),
    })
    .expect("setpoints serialize");
    fs::write(path, text)?;
    Ok(())
}

pub fn write_search_trace<W: Write>(search: &SearchResult, mut out: W) -> Result<()> {
    let n = search.best.candidate.len();
    let cols: Vec<String> = (0..n).map(|i| format!("y{}_m", i + 1)).collect();
    writeln!(out, "iteration,mesh_m,{},score,feasibility", cols.join(","))?;
    for r in &search.trace {
        let c: Vec<String> = r.candidate.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            r.mesh,
            c.join(","),
            r.score,
            r.feasibility
        )?;
    }
    Ok(())
}

/// Writes every artifact of a run into `dir`, creating it if needed.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(files::CONFIG), out.config.to_toml())?;
    write_setpoints(&out.plan, &dir.join(files::SETPOINTS))?;
    fs::write(
        dir.join(files::METRICS),
        toml::to_string(&out.metrics).expect("metrics serialize"),
    )?;

    let mut log = create(dir, files::LOG)?;
    writeln!(log, "config: {}", out.config.source)?;
    writeln!(log, "seed: {}", out.config.wind.seed)?;
    writeln!(log, "targets_m: {:?}", out.plan.targets)?;
    writeln!(log, "power_targets_W: {:?}", out.plan.power_targets)?;
    for (i, t) in out.metrics.turbines.iter().enumerate() {
        match t.settle_time {
            Some(s) => writeln!(
                log,
                "turbine {}: settled {s} s after its start at {} s",
                i + 1,
                t.start_delay
            )?,
            None => writeln!(
                log,
                "turbine {}: did not settle within {} m",
                i + 1,
                out.metrics.settle_band
            )?,
        }
    }
    writeln!(
        log,
        "post-settle window starts at {} s (latest settle instant)",
        out.metrics.window_start
    )?;
    writeln!(log, "physical constants:")?;
    for line in &out.provenance {
        writeln!(log, "  {line}")?;
    }
    log.flush()?;

    let mut timing = create(dir, files::TIMING)?;
    writeln!(timing, "search_s = {}", out.search_seconds)?;
    writeln!(timing, "simulation_s = {}", out.simulation_seconds)?;
    if let Some(s) = &out.plan.search {
        writeln!(timing, "# evaluation wall times, s")?;
        for r in &s.trace {
            writeln!(timing, "{:?} {}", r.candidate, r.wall_time)?;
        }
        let mut trace = create(dir, files::SEARCH_TRACE)?;
        write_search_trace(s, &mut trace)?;
        trace.flush()?;
    }
    timing.flush()?;

    write_streams(&out.records, dir)?;
    for (t, f) in &out.fields {
        let mut w = create(dir, &files::field(*t))?;
        f.write_to(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn write_streams(records: &[StepRecord], dir: &Path) -> Result<()> {
    use crate::frame::rad_s_to_rpm;
    let mut pos = create(dir, files::POSITIONS)?;
    let mut inp = create(dir, files::INPUTS)?;
    let mut pow = create(dir, files::POWER)?;
    let mut eff = create(dir, files::EFFECTIVE_SPEED)?;
    let mut farm = create(dir, files::FARM)?;
    let mut diag = create(dir, files::DIAGNOSTICS)?;
    writeln!(pos, "time_s,turbine,x_m,y_m,vx_m_s,vy_m_s")?;
    writeln!(
        inp,
        "time_s,turbine,pitch_deg,torque_Nm,yaw_deg,cmd_pitch_deg,cmd_torque_Nm,cmd_yaw_deg"
    )?;
    writeln!(
        pow,
        "time_s,turbine,power_W,generator_speed_rpm,thrust_x_N,thrust_y_N"
    )?;
    writeln!(eff, "time_s,turbine,u_m_s,v_m_s,speed_m_s,normal_speed_m_s")?;
    writeln!(farm, "time_s,farm_power_W,free_u_m_s,free_v_m_s")?;
    writeln!(
        diag,
        "time_s,turbine,cost,active_mask,degraded,target_y_m,yaw_reference_deg,power_target_W"
    )?;
    for r in records {
        let t = r.time;
        for (i, x) in r.turbines.iter().enumerate() {
            let k = i + 1;
            writeln!(
                pos,
                "{t},{k},{},{},{},{}",
                x.position.x, x.position.y, x.velocity.x, x.velocity.y
            )?;
            let (a, c) = (&x.applied, &x.commanded);
            writeln!(
                inp,
                "{t},{k},{},{},{},{},{},{}",
                a.blade_pitch,
                a.generator_torque,
                a.nacelle_yaw,
                c.blade_pitch,
                c.generator_torque,
                c.nacelle_yaw
            )?;
            writeln!(
                pow,
                "{t},{k},{},{},{},{}",
                x.power,
                rad_s_to_rpm(x.generator_speed),
                x.thrust.x,
                x.thrust.y
            )?;
            writeln!(
                eff,
                "{t},{k},{},{},{},{}",
                x.effective_wind.x,
                x.effective_wind.y,
                x.effective_wind.norm(),
                x.normal_speed
            )?;
        }
        writeln!(
            farm,
            "{t},{},{},{}",
            r.farm_power, r.free_stream.x, r.free_stream.y
        )?;
        if let Some(d) = &r.diagnostics {
            for (i, d) in d.iter().enumerate() {
                writeln!(
                    diag,
                    "{t},{},{},{},{},{},{},{}",
                    i + 1,
                    d.cost,
                    d.active_mask,
                    u8::from(d.degraded),
                    d.target_y,
                    d.yaw_reference,
                    d.power_target
                )?;
            }
        }
    }
    for w in [&mut pos, &mut inp, &mut pow, &mut eff, &mut farm, &mut diag] {
        w.flush()?;
    }
    Ok(())
}

/// Config echo and setpoints of a finished run.
pub fn load_run_setup(dir: &Path) -> Result<(ScenarioConfig, LayoutPlan)> {
    let mut cfg = ScenarioConfig::parse(
        &read(dir, files::CONFIG)?,
        &dir.join(files::CONFIG).display().to_string(),
    )?;
    cfg.run.output_dir = dir.to_path_buf();
    let sp: Setpoints =
        toml::from_str(&read(dir, files::SETPOINTS)?).map_err(|e| Error::Parse {
            path: dir.join(files::SETPOINTS).display().to_string(),
            message: e.message().trim().to_string(),
        })?;
    Ok((
        cfg,
        LayoutPlan {
            targets: sp.lateral,
            power_targets: sp.power,
            search: None,
        },
    ))
}

/// Metrics and effective-speed series of a finished run.
pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    let parse_err = |name: &str, message: String| Error::Parse {
        path: dir.join(name).display().to_string(),
        message,
    };
    let metrics: RunMetrics = toml::from_str(&read(dir, files::METRICS)?)
        .map_err(|e| parse_err(files::METRICS, e.message().trim().to_string()))?;
    let n = metrics.turbines.len();
    let text = read(dir, files::EFFECTIVE_SPEED)?;
    let mut times = Vec::new();
    let mut speeds: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || {
            parse_err(
                files::EFFECTIVE_SPEED,
                format!("malformed line {}", line_no + 1),
            )
        };
        if fields.len() < 5 {
            return Err(bad());
        }
        let t: f64 = fields[0].parse().map_err(|_| bad())?;
        let k: usize = fields[1].parse().map_err(|_| bad())?;
        let v: f64 = fields[4].parse().map_err(|_| bad())?;
        if k == 1 {
            times.push(t);
            speeds.push(Vec::with_capacity(n));
        }
        match speeds.last_mut() {
            Some(row) if row.len() + 1 == k && k <= n => row.push(v),
            _ => return Err(bad()),
        }
    }
    if speeds.iter().any(|r| r.len() != n) {
        return Err(parse_err(
            files::EFFECTIVE_SPEED,
            format!("every record needs {n} turbines"),
        ));
    }
    Ok(RunSummary {
        metrics,
        times,
        effective_speed: speeds,
    })
}
