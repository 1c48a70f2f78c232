//! Seeded turbulent free-stream wind from a Von Kármán longitudinal spectrum.
//!
//! Series are built by an inverse DFT with deterministic amplitudes
//! `sqrt(2 S(f) df)` and independent uniform phases, so the sample variance
//! equals the discretized spectral integral exactly.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Vector2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    pub mean_velocity: Vector2,
    pub turbulence_intensity: f64,
    pub integral_length_scale: f64,
    pub duration: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lateral_turbulence: bool,
}

fn default_sample_dt() -> f64 {
    0.5
}

impl WindSpec {
    /// 14 m/s, TI 0.036, L = 170 m, one hour.
    pub fn case_study(seed: u64) -> Self {
        Self {
            mean_velocity: Vector2::new(14.0, 0.0),
            turbulence_intensity: 0.036,
            integral_length_scale: 170.0,
            duration: 3600.0,
            sample_dt: 0.5,
            seed,
            lateral_turbulence: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample_dt must be positive, got {}",
                self.sample_dt
            )));
        }
        if !(self.duration >= self.sample_dt) {
            return Err(Error::InvalidInput(format!(
                "duration {} must be at least sample_dt {}",
                self.duration, self.sample_dt
            )));
        }
        if !(self.turbulence_intensity >= 0.0) {
            return Err(Error::InvalidInput(
                "turbulence intensity must be >= 0".into(),
            ));
        }
        if !(self.integral_length_scale > 0.0) {
            return Err(Error::InvalidInput(
                "integral length scale must be > 0".into(),
            ));
        }
        if !self.mean_velocity.is_finite() {
            return Err(Error::InvalidInput("mean velocity must be finite".into()));
        }
        Ok(())
    }
}

/// One-sided Von Kármán longitudinal PSD, (m/s)²/Hz.
pub fn von_karman_psd(f: f64, sigma: f64, length_scale: f64, mean_speed: f64) -> f64 {
    let tl = length_scale / mean_speed;
    4.0 * sigma * sigma * tl / (1.0 + 70.8 * (f * tl).powi(2)).powf(5.0 / 6.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindSample {
    pub velocity: Vector2,
    pub acceleration: Vector2,
}

/// Uniformly sampled free-stream velocity and acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    pub samples: Vec<WindSample>,
    pub dt: f64,
}

impl WindSeries {
    /// Builds a series from velocities, filling accelerations by centered
    /// differences (one-sided at the ends).
    pub fn from_velocities(velocities: Vec<Vector2>, dt: f64) -> Result<Self> {
        if velocities.len() < 2 || !(dt > 0.0) {
            return Err(Error::InvalidInput(
                "wind series needs >= 2 samples and dt > 0".into(),
            ));
        }
        let n = velocities.len();
        let samples = (0..n)
            .map(|k| {
                let acceleration = if k == 0 {
                    (velocities[1] - velocities[0]) * (1.0 / dt)
                } else if k == n - 1 {
                    (velocities[n - 1] - velocities[n - 2]) * (1.0 / dt)
                } else {
                    (velocities[k + 1] - velocities[k - 1]) * (0.5 / dt)
                };
                WindSample {
                    velocity: velocities[k],
                    acceleration,
                }
            })
            .collect();
        Ok(Self { samples, dt })
    }

    pub fn constant(velocity: Vector2, duration: f64, dt: f64) -> Result<Self> {
        let n = (duration / dt).round() as usize + 1;
        Self::from_velocities(vec![velocity; n.max(2)], dt)
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Linear interpolation; acceleration is the interpolant's slope between
    /// nodes and the stored sample at nodes.
    pub fn sample(&self, t: f64) -> Result<WindSample> {
        let duration = self.duration();
        let eps = 1e-9 * self.dt;
        if !(t >= -eps && t <= duration + eps) {
            return Err(Error::OutOfRange { t, duration });
        }
        let s = (t / self.dt).clamp(0.0, (self.samples.len() - 1) as f64);
        let k = s.floor() as usize;
        let frac = s - k as f64;
        if frac.abs() < 1e-12 || k == self.samples.len() - 1 {
            return Ok(self.samples[k]);
        }
        let a = self.samples[k].velocity;
        let b = self.samples[k + 1].velocity;
        Ok(WindSample {
            velocity: a + (b - a) * frac,
            acceleration: (b - a) * (1.0 / self.dt),
        })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_s,ux_m_s,uy_m_s")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(
                out,
                "{},{:.12e},{:.12e}",
                k as f64 * self.dt,
                s.velocity.x,
                s.velocity.y
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut vel = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || lineno == 0 && line.starts_with('t') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    path: "wind series".into(),
                    message: format!("line {}: {e}", lineno + 1),
                })
            };
            if cols.len() != 3 {
                return Err(Error::Parse {
                    path: "wind series".into(),
                    message: format!("line {}: expected 3 columns", lineno + 1),
                });
            }
            times.push(parse(cols[0])?);
            vel.push(Vector2::new(parse(cols[1])?, parse(cols[2])?));
        }
        if times.len() < 2 {
            return Err(Error::InvalidInput("wind file has < 2 samples".into()));
        }
        let dt = times[1] - times[0];
        Self::from_velocities(vel, dt)
    }
}

fn turbulent_component(
    n: usize,
    dt: f64,
    sigma: f64,
    spec: &WindSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    let mean_speed = spec.mean_velocity.norm().max(1e-3);
    let df = 1.0 / (n as f64 * dt);
    let mut spectrum = vec![Complex::new(0.0, 0.0); n];
    // bins strictly below Nyquist; phases drawn in bin order for reproducibility
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * df;
        let amp =
            (2.0 * von_karman_psd(f, sigma, spec.integral_length_scale, mean_speed) * df).sqrt();
        let phase = rng.random::<f64>() * 2.0 * PI;
        let c = Complex::from_polar(0.5 * amp, phase);
        spectrum[k] = c;
        spectrum[n - k] = c.conj();
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(n).process(&mut spectrum);
    spectrum.into_iter().map(|c| c.re).collect()
}

pub fn synthesize(spec: &WindSpec) -> Result<WindSeries> {
    spec.validate()?;
    let n = (spec.duration / spec.sample_dt).round() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.turbulence_intensity * spec.mean_velocity.norm();
    let u = turbulent_component(n, spec.sample_dt, sigma, spec, &mut rng);
    let v = if spec.lateral_turbulence {
        turbulent_component(n, spec.sample_dt, sigma, spec, &mut rng)
    } else {
        vec![0.0; n]
    };
    let velocities = u
        .iter()
        .zip(&v)
        .map(|(du, dv)| spec.mean_velocity + Vector2::new(*du, *dv))
        .collect();
    WindSeries::from_velocities(velocities, spec.sample_dt)
}
