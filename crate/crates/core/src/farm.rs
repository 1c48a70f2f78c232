//! Layout optimization over per-turbine lateral targets.
//!
//! Candidates are scored by fixed-induction episodes in which a simple yaw
//! law steers each platform to its target. A generalized pattern search
//! polls the axis directions around the incumbent, evaluating every poll in
//! parallel.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aero::thrust_coefficient_from_induction;
use crate::error::{Error, Result};
use crate::frame::{ControlInputs, FarmLayout, Vector2, YAW_LIMIT};
use crate::plant::{DrivetrainState, PlantEnv, RotorModel};
use crate::sim::{ControlContext, ControlDiagnostic, FarmControl, FarmSimulator, StepRecord};
use crate::wake::wake_overlap_fraction;
use crate::wind::WindSeries;

/// Lateral targets relative to each mooring neutral point, plus power targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setpoints {
    pub lateral: Vec<f64>,
    /// Electrical power target per turbine, W.
    pub power: Vec<f64>,
}

impl Setpoints {
    pub fn new(lateral: Vec<f64>, rated: f64) -> Self {
        let power = vec![rated; lateral.len()];
        Self { lateral, power }
    }

    pub fn len(&self) -> usize {
        self.lateral.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lateral.is_empty()
    }
}

/// Box on the lateral targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBounds {
    pub fn symmetric(n: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; n],
            upper: vec![half_width; n],
        }
    }

    /// Lateral range per turbine: the distance from its initial surge offset
    /// to the nearest taut line along ±y, capped at `cap`.
    pub fn from_mooring(env: &PlantEnv, layout: &FarmLayout, cap: f64) -> Self {
        let (lower, upper) = (0..layout.len())
            .map(|i| {
                let base = Vector2::new(
                    layout.initial[i].position.x - layout.mooring_origin[i].x,
                    0.0,
                );
                let up = env.mooring.taut_offset(base, Vector2::new(0.0, 1.0));
                let down = env.mooring.taut_offset(base, Vector2::new(0.0, -1.0));
                (-down.min(cap), up.min(cap))
            })
            .unzip();
        Self { lower, upper }
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Objective {
    MaximizePower,
    MaximizeProjectedSpeed,
    /// Farm power target in W and yaw penalty in MW per deg². Episodes
    /// score availability against `target · (1 + headroom)` so the chosen
    /// layout keeps a reserve for turbulence.
    TrackPower {
        target: f64,
        yaw_penalty: f64,
        headroom: f64,
    },
}

/// Episode settings shared by every candidate of one search.
#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub duration: f64,
    pub induction: f64,
    /// Trailing fraction of the episode averaged into the score.
    pub window_fraction: f64,
    /// Score penalty per unit rotor-disc wake overlap fraction.
    pub overlap_weight: f64,
    /// Frozen wind realization.
    pub wind: Arc<WindSeries>,
    /// Seed the wind was synthesized from, echoed in the trace.
    pub seed: Option<u64>,
    pub gains: PositionGains,
}

impl EpisodeSpec {
    pub fn new(wind: Arc<WindSeries>, seed: Option<u64>) -> Self {
        Self {
            duration: 2000.0,
            induction: 0.3,
            window_fraction: 0.25,
            overlap_weight: 0.1,
            wind,
            seed,
            gains: PositionGains::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.duration > 0.0) {
            errs.push(format!(
                "episode duration must be positive, got {}",
                self.duration
            ));
        }
        if !(self.induction > 0.0 && self.induction < 0.5) {
            errs.push(format!(
                "episode induction must be in (0, 0.5), got {}",
                self.induction
            ));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            errs.push(format!(
                "episode window fraction must be in (0, 1], got {}",
                self.window_fraction
            ));
        }
        if !(self.overlap_weight >= 0.0) {
            errs.push(format!(
                "overlap weight must be non-negative, got {}",
                self.overlap_weight
            ));
        }
        if self.wind.duration() < self.duration {
            errs.push(format!(
                "wind series covers {} s, episode needs {} s",
                self.wind.duration(),
                self.duration
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Thrust coefficient every rotor runs at during an episode.
    pub fn thrust_coefficient(&self) -> f64 {
        thrust_coefficient_from_induction(self.induction)
    }
}

/// Gains of the episode position law, in degrees of yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGains {
    /// Yaw per metre of lateral error.
    pub proportional: f64,
    /// Cap on the proportional term, which lowers the effective gain far from target.
    pub proportional_span: f64,
    /// Yaw per m/s of lateral platform velocity.
    pub damping: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            proportional: 0.15,
            proportional_span: 10.0,
            damping: 15.0,
        }
    }
}

/// Episode position law: feed-forward yaw that balances the mooring force at
/// the target under the current thrust, plus proportional and damping terms.
pub struct EpisodeControl {
    pub targets: Vec<f64>,
    pub thrust_coefficient: f64,
    pub gains: PositionGains,
}

impl EpisodeControl {
    fn yaw(&self, ctx: &ControlContext<'_>, i: usize) -> Result<f64> {
        let plant = &ctx.plants[i];
        let rel = plant.platform.position - plant.origin;
        let target = self.targets[i];
        let v_rel = ctx.effective[i] - plant.platform.velocity;
        let d = ctx.env.aero.rotor_diameter;
        let thrust = 0.125
            * self.thrust_coefficient
            * std::f64::consts::PI
            * ctx.env.aero.air_density
            * d
            * d
            * v_rel.dot(v_rel);
        let hold = ctx.env.mooring.net_force(Vector2::new(rel.x, target))?;
        let s_max = YAW_LIMIT.max.to_radians().sin();
        let feed_forward = if thrust > 0.0 {
            (-hold.y / thrust).clamp(-s_max, s_max).asin().to_degrees()
        } else {
            0.0
        };
        let g = self.gains;
        let p =
            (g.proportional * (target - rel.y)).clamp(-g.proportional_span, g.proportional_span);
        Ok(YAW_LIMIT.saturate(feed_forward + p - g.damping * plant.platform.velocity.y))
    }
}

impl FarmControl for EpisodeControl {
    fn command(
        &mut self,
        ctx: &ControlContext<'_>,
    ) -> Result<Vec<(ControlInputs, ControlDiagnostic)>> {
        (0..ctx.plants.len())
            .map(|i| {
                let yaw = self.yaw(ctx, i)?;
                Ok((
                    ControlInputs {
                        blade_pitch: 0.0,
                        generator_torque: 0.0,
                        nacelle_yaw: yaw,
                    },
                    ControlDiagnostic {
                        target_y: self.targets[i],
                        ..ControlDiagnostic::default()
                    },
                ))
            })
            .collect()
    }
}

/// Window averages for one turbine.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TurbineMetrics {
    pub power: f64,
    pub normal_speed: f64,
    pub yaw: f64,
    pub lateral: f64,
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Feasibility {
    Feasible,
    /// A mooring line went taut.
    MooringTaut,
    /// Rotor thrust fell below the mooring force it has to hold.
    RepositioningInfeasible,
}

impl Feasibility {
    pub fn code(self) -> u8 {
        match self {
            Feasibility::Feasible => 0,
            Feasibility::MooringTaut => 1,
            Feasibility::RepositioningInfeasible => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub candidate: Vec<f64>,
    /// `-inf` when infeasible.
    pub score: f64,
    pub feasibility: Feasibility,
    pub metrics: Vec<TurbineMetrics>,
}

impl Evaluation {
    pub fn infeasible(candidate: Vec<f64>, reason: Feasibility) -> Self {
        Self {
            candidate,
            score: f64::NEG_INFINITY,
            feasibility: reason,
            metrics: Vec::new(),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.feasibility == Feasibility::Feasible
    }
}

fn window_metrics(
    records: &[StepRecord],
    origins: &[Vector2],
    overlaps: &[Vec<f64>],
) -> Vec<TurbineMetrics> {
    let n = records.len().max(1) as f64;
    (0..origins.len())
        .map(|i| {
            let mut m = TurbineMetrics::default();
            for (r, ov) in records.iter().zip(overlaps) {
                let t = &r.turbines[i];
                m.power += t.power;
                m.normal_speed += t.normal_speed;
                m.yaw += t.applied.nacelle_yaw;
                m.lateral += t.position.y - origins[i].y;
                m.overlap += ov[i];
            }
            m.power /= n;
            m.normal_speed /= n;
            m.yaw /= n;
            m.lateral /= n;
            m.overlap /= n;
            m
        })
        .collect()
}

/// Summed overlap of each rotor with every other turbine's wake.
fn overlap_fractions(sim: &FarmSimulator<'_>, free_stream: Vector2) -> Vec<f64> {
    let positions = sim.positions();
    (0..sim.plants.len())
        .map(|i| {
            (0..sim.plants.len())
                .filter(|&q| q != i)
                .map(|q| {
                    wake_overlap_fraction(
                        &sim.wakes[q],
                        &positions[q],
                        positions[i].position,
                        sim.layout.turbines[i].rotor_diameter,
                        free_stream,
                    )
                })
                .sum()
        })
        .collect()
}

/// Runs one fixed-induction episode for `candidate` and scores it.
pub fn evaluate_candidate(
    env: &PlantEnv,
    layout: &FarmLayout,
    candidate: &[f64],
    episode: &EpisodeSpec,
    objective: Objective,
) -> Result<Evaluation> {
    if candidate.len() != layout.len() {
        return Err(Error::Dimension(format!(
            "{} lateral targets for {} turbines",
            candidate.len(),
            layout.len()
        )));
    }
    let ct = episode.thrust_coefficient();
    debug_assert!((ct - thrust_coefficient_from_induction(episode.induction)).abs() < 1e-15);
    let initial = vec![(ControlInputs::default(), DrivetrainState::default()); layout.len()];
    let mut sim = FarmSimulator::new(
        env,
        layout.clone(),
        &episode.wind,
        RotorModel::FixedInduction(episode.induction),
        &initial,
    )?;
    let mut control = EpisodeControl {
        targets: candidate.to_vec(),
        thrust_coefficient: ct,
        gains: episode.gains,
    };
    let steps = (episode.duration / sim.dt).round() as usize;
    let window_start =
        steps - ((episode.window_fraction * steps as f64).round() as usize).clamp(1, steps);
    let mut window = Vec::with_capacity(steps - window_start);
    let mut overlaps = Vec::with_capacity(steps - window_start);
    for k in 0..steps {
        let record = match sim.step(&mut control) {
            Ok(r) => r,
            Err(Error::Step { source, .. }) if matches!(*source, Error::LineTaut { .. }) => {
                return Ok(Evaluation::infeasible(
                    candidate.to_vec(),
                    Feasibility::MooringTaut,
                ));
            }
            Err(e) => {
                return Err(Error::InvalidInput(format!(
                    "episode for candidate {candidate:?} failed: {e}"
                )))
            }
        };
        if record.turbines.iter().any(|t| t.repositioning_infeasible) {
            return Ok(Evaluation::infeasible(
                candidate.to_vec(),
                Feasibility::RepositioningInfeasible,
            ));
        }
        if k >= window_start {
            overlaps.push(overlap_fractions(&sim, record.free_stream));
            window.push(record);
        }
    }
    let metrics = window_metrics(&window, &layout.mooring_origin, &overlaps);
    let overlap: f64 = metrics.iter().map(|m| m.overlap).sum();
    let base = match objective {
        Objective::MaximizePower => metrics.iter().map(|m| m.power).sum::<f64>() / 1e6,
        Objective::MaximizeProjectedSpeed => metrics.iter().map(|m| m.normal_speed).sum(),
        Objective::TrackPower {
            target,
            yaw_penalty,
            headroom,
        } => {
            let target = target * (1.0 + headroom);
            let available: f64 = metrics.iter().map(|m| m.power).sum();
            let delivered = available.min(target);
            let yaw_sq: f64 = window
                .iter()
                .flat_map(|r| r.turbines.iter().map(|t| t.applied.nacelle_yaw.powi(2)))
                .sum::<f64>()
                / window.len() as f64;
            -(delivered - target).abs() / 1e6 - yaw_penalty * yaw_sq
        }
    };
    Ok(Evaluation {
        candidate: candidate.to_vec(),
        score: base - episode.overlap_weight * overlap,
        feasibility: Feasibility::Feasible,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub initial_mesh: f64,
    pub min_mesh: f64,
    /// Maximum number of distinct candidate evaluations.
    pub budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            initial_mesh: 32.0,
            min_mesh: 1.0,
            budget: 300,
        }
    }
}

/// One line of the search trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub mesh: f64,
    pub candidate: Vec<f64>,
    pub score: f64,
    pub feasibility: u8,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Evaluation,
    pub trace: Vec<TraceRecord>,
    /// Incumbent score after each iteration.
    pub history: Vec<f64>,
    pub final_mesh: f64,
}

/// Relative score difference below which two candidates tie.
const TIE_TOLERANCE: f64 = 1e-9;

/// Whether `score` beats `reference` by more than the tie tolerance. Mirror
/// images in a symmetric wind score equal up to rounding, and rounding
/// differs between builds, so ties go to the earlier poll.
fn improves(score: f64, reference: f64) -> bool {
    if !reference.is_finite() {
        return score > reference;
    }
    score - reference > TIE_TOLERANCE * reference.abs().max(1.0)
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Generalized pattern search maximizing `evaluate` over the box.
pub fn pattern_search<F>(
    initial: &[f64],
    bounds: &SearchBounds,
    options: SearchOptions,
    evaluate: F,
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    if options.budget == 0 {
        return Err(Error::InvalidInput(
            "search budget must be at least one evaluation".into(),
        ));
    }
    if !(options.min_mesh > 0.0 && options.initial_mesh >= options.min_mesh) {
        return Err(Error::InvalidInput(format!(
            "mesh sizes must satisfy 0 < min ({}) <= initial ({})",
            options.min_mesh, options.initial_mesh
        )));
    }
    if bounds.lower.len() != initial.len() || bounds.upper.len() != initial.len() {
        return Err(Error::Dimension(format!(
            "bounds cover {} variables, initial point has {}",
            bounds.lower.len(),
            initial.len()
        )));
    }
    let mut cache: HashMap<Vec<u64>, Evaluation> = HashMap::new();
    let mut trace = Vec::new();
    let mut run = |points: Vec<Vec<f64>>,
                   iteration: usize,
                   mesh: f64,
                   cache: &mut HashMap<Vec<u64>, Evaluation>|
     -> Result<Vec<Evaluation>> {
        let fresh: Vec<Vec<f64>> = points
            .iter()
            .filter(|p| !cache.contains_key(&key(p)))
            .cloned()
            .collect();
        let evaluated: Vec<(Result<Evaluation>, f64)> = fresh
            .par_iter()
            .map(|p| {
                let t0 = Instant::now();
                let e = evaluate(p);
                (e, t0.elapsed().as_secs_f64())
            })
            .collect();
        for (p, (e, wall)) in fresh.iter().zip(evaluated) {
            let e = e?;
            trace.push(TraceRecord {
                iteration,
                mesh,
                candidate: p.clone(),
                score: e.score,
                feasibility: e.feasibility.code(),
                wall_time: wall,
            });
            cache.insert(key(p), e);
        }
        Ok(points.iter().map(|p| cache[&key(p)].clone()).collect())
    };

    let x0 = bounds.clamp(initial);
    let mut incumbent = run(vec![x0], 0, options.initial_mesh, &mut cache)?.remove(0);
    let mut mesh = options.initial_mesh;
    let mut history = vec![incumbent.score];
    let mut iteration = 0;
    while mesh >= options.min_mesh && cache.len() < options.budget {
        iteration += 1;
        let mut polls = Vec::new();
        for k in 0..initial.len() {
            for sign in [1.0, -1.0] {
                let mut p = incumbent.candidate.clone();
                p[k] += sign * mesh;
                let p = bounds.clamp(&p);
                if p != incumbent.candidate && !polls.contains(&p) {
                    polls.push(p);
                }
            }
        }
        let remaining = options.budget - cache.len();
        let mut fresh_seen = 0;
        polls.retain(|p| {
            if cache.contains_key(&key(p)) {
                true
            } else {
                fresh_seen += 1;
                fresh_seen <= remaining
            }
        });
        let results = run(polls, iteration, mesh, &mut cache)?;
        if iteration == 1 && !incumbent.is_feasible() && results.iter().all(|e| !e.is_feasible()) {
            return Err(Error::Infeasible(format!(
                "initial point {:?} and all its polls are infeasible",
                incumbent.candidate
            )));
        }
        let best = results
            .into_iter()
            .fold(None::<Evaluation>, |acc, e| match acc {
                Some(a) if !improves(e.score, a.score) => Some(a),
                _ => Some(e),
            });
        match best {
            Some(b) if improves(b.score, incumbent.score) => {
                incumbent = b;
                mesh *= 2.0;
            }
            _ => mesh *= 0.5,
        }
        history.push(incumbent.score);
    }
    Ok(SearchResult {
        best: incumbent,
        trace,
        history,
        final_mesh: mesh,
    })
}

/// Pattern search over lateral targets scored by fixed-induction episodes.
pub fn optimize_layout(
    env: &PlantEnv,
    layout: &FarmLayout,
    initial: &[f64],
    bounds: &SearchBounds,
    objective: Objective,
    episode: &EpisodeSpec,
    options: SearchOptions,
) -> Result<SearchResult> {
    episode.validate()?;
    pattern_search(initial, bounds, options, |c| {
        evaluate_candidate(env, layout, c, episode, objective)
    })
}

/// Splits `demand` in proportion to each turbine's available power, each
/// availability capped at `rated`.
pub fn allocate_power(available: &[f64], demand: f64, rated: f64) -> Result<Vec<f64>> {
    if available.is_empty() {
        return Err(Error::InvalidInput(
            "no turbines to allocate power to".into(),
        ));
    }
    if !(demand >= 0.0) || available.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "demand {demand} and availabilities {available:?} must be non-negative"
        )));
    }
    let capped: Vec<f64> = available.iter().map(|a| a.min(rated)).collect();
    let total: f64 = capped.iter().sum();
    if demand > total {
        return Err(Error::PowerShortfall {
            demand,
            available: total,
        });
    }
    if total == 0.0 {
        return Ok(vec![0.0; capped.len()]);
    }
    let mut shares: Vec<f64> = capped.iter().map(|a| demand * a / total).collect();
    let largest = (0..shares.len())
        .max_by(|&a, &b| shares[a].total_cmp(&shares[b]).then(b.cmp(&a)))
        .expect("non-empty");
    let others: f64 = shares
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != largest)
        .map(|(_, s)| s)
        .sum();
    shares[largest] = demand - others;
    Ok(shares)
}
