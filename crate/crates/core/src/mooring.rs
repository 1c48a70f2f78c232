//! Quasi-static inextensible catenary mooring with seabed contact.
//!
//! For a line of length `ℓ`, submerged weight `w` per metre and fairlead
//! height `h` above the seabed, the horizontal anchor-to-fairlead span for a
//! horizontal tension `H` is
//!
//! ```text
//! span(H) = (H/w) asinh(w ℓ_s / H) + (ℓ − ℓ_s),   ℓ_s = sqrt(h² + 2 h H / w)
//! ```
//!
//! valid while `ℓ_s ≤ ℓ` (part of the line rests on the seabed). `span` is
//! strictly increasing in `H`; tensions are recovered by a bracketed Newton
//! solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Vector2;

pub const GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MooringLineSpec {
    /// Anchor position relative to the platform's neutral point.
    pub anchor: Vector2,
    /// Fairlead position in the platform body frame.
    pub fairlead_offset: Vector2,
    pub unstretched_length: f64,
    /// Mass per unit length on a submerged-weight basis, kg/m.
    pub mass_per_length: f64,
    pub water_depth: f64,
    /// Depth of the fairlead below the free surface.
    #[serde(default)]
    pub fairlead_draft: f64,
}

impl MooringLineSpec {
    pub fn weight_per_length(&self) -> f64 {
        self.mass_per_length * GRAVITY
    }

    /// Fairlead height above the seabed.
    pub fn fairlead_height(&self) -> f64 {
        self.water_depth - self.fairlead_draft
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.unstretched_length > self.water_depth) {
            return Err(Error::InvalidInput(format!(
                "line length {} must exceed water depth {}",
                self.unstretched_length, self.water_depth
            )));
        }
        if !(self.mass_per_length > 0.0) || !(self.fairlead_height() > 0.0) {
            return Err(Error::InvalidInput(
                "mass per length and fairlead height must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Span at which the line hangs with zero horizontal tension.
    pub fn slack_span(&self) -> f64 {
        self.unstretched_length - self.fairlead_height()
    }

    /// Horizontal tension at which the seabed contact vanishes.
    pub fn taut_tension(&self) -> f64 {
        let h = self.fairlead_height();
        let l = self.unstretched_length;
        self.weight_per_length() * (l * l - h * h) / (2.0 * h)
    }

    pub fn taut_span(&self) -> f64 {
        catenary_span(self, self.taut_tension())
    }

    /// Span between anchor and fairlead at the neutral platform position.
    pub fn neutral_span(&self) -> f64 {
        (self.fairlead_offset - self.anchor).norm()
    }
}

/// Horizontal span for a given horizontal tension.
pub fn catenary_span(line: &MooringLineSpec, tension: f64) -> f64 {
    let h = line.fairlead_height();
    if tension <= 0.0 {
        return line.slack_span();
    }
    let a = tension / line.weight_per_length();
    let ls = (h * h + 2.0 * h * a).sqrt();
    a * (ls / a).asinh() + line.unstretched_length - ls
}

fn catenary_span_derivative(line: &MooringLineSpec, tension: f64) -> f64 {
    let w = line.weight_per_length();
    let h = line.fairlead_height();
    let a = (tension / w).max(1e-9);
    let ls = (h * h + 2.0 * h * a).sqrt();
    ((ls / a).asinh() + (h * a / ls - ls) / (a + h) - h / ls) / w
}

/// Horizontal tension for a given span; zero below the slack span.
pub fn horizontal_tension(line: &MooringLineSpec, span: f64) -> Result<f64> {
    if span <= line.slack_span() {
        return Ok(0.0);
    }
    let h_max = line.taut_tension();
    let limit = catenary_span(line, h_max);
    if span > limit {
        return Err(Error::LineTaut {
            line: 0,
            span,
            limit,
        });
    }
    let (mut lo, mut hi) = (0.0, h_max);
    let mut t = 0.5 * h_max;
    for _ in 0..200 {
        let r = catenary_span(line, t) - span;
        if r.abs() <= 1e-12 * span {
            return Ok(t);
        }
        if r > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = catenary_span_derivative(line, t);
        let newton = t - r / d;
        t = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-12 * h_max {
            break;
        }
    }
    Ok(t)
}

/// Horizontal force on the platform from one line plus the yaw moment it
/// exerts about the platform reference point.
pub fn line_force(
    line: &MooringLineSpec,
    position: Vector2,
    heading_rad: f64,
    tension_of: &dyn Fn(f64) -> Result<f64>,
) -> Result<(Vector2, f64)> {
    let (s, c) = heading_rad.sin_cos();
    let arm = Vector2::new(
        c * line.fairlead_offset.x - s * line.fairlead_offset.y,
        s * line.fairlead_offset.x + c * line.fairlead_offset.y,
    );
    let r = position + arm - line.anchor;
    let span = r.norm();
    let tension = tension_of(span)?;
    let force = r * (-tension / span);
    Ok((force, arm.x * force.y - arm.y * force.x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MooringLayout {
    pub line_count: usize,
    /// Direction of the first line from the platform, degrees from `x`.
    pub first_line_deg: f64,
    pub anchor_radius: f64,
    pub fairlead_radius: f64,
    pub unstretched_length: f64,
    pub mass_per_length: f64,
    pub water_depth: f64,
    pub fairlead_draft: f64,
}

impl Default for MooringLayout {
    fn default() -> Self {
        Self {
            line_count: 3,
            first_line_deg: 180.0,
            anchor_radius: 837.6,
            fairlead_radius: 40.87,
            unstretched_length: 920.0,
            mass_per_length: 113.35,
            water_depth: 200.0,
            fairlead_draft: 14.0,
        }
    }
}

impl MooringLayout {
    pub fn lines(&self) -> Vec<MooringLineSpec> {
        (0..self.line_count)
            .map(|k| {
                let ang =
                    (self.first_line_deg + 360.0 * k as f64 / self.line_count as f64).to_radians();
                let dir = Vector2::new(ang.cos(), ang.sin());
                MooringLineSpec {
                    anchor: dir * self.anchor_radius,
                    fairlead_offset: dir * self.fairlead_radius,
                    unstretched_length: self.unstretched_length,
                    mass_per_length: self.mass_per_length,
                    water_depth: self.water_depth,
                    fairlead_draft: self.fairlead_draft,
                }
            })
            .collect()
    }
}

const LATTICE_STEP: f64 = 0.1;

/// Tension samples on a 0.1 m span lattice with exact slopes, for cubic
/// Hermite interpolation. Built once at construction.
#[derive(Debug, Clone, PartialEq)]
struct TensionLattice {
    start: f64,
    tension: Vec<f64>,
    slope: Vec<f64>,
}

impl TensionLattice {
    fn build(line: &MooringLineSpec) -> Result<Self> {
        let start = line.slack_span();
        let end = line.taut_span();
        let n = ((end - start) / LATTICE_STEP).floor() as usize + 1;
        let mut tension = Vec::with_capacity(n);
        let mut slope = Vec::with_capacity(n);
        for k in 0..n {
            let span = start + k as f64 * LATTICE_STEP;
            let t = horizontal_tension(line, span)?;
            tension.push(t);
            slope.push(if t > 0.0 {
                1.0 / catenary_span_derivative(line, t)
            } else {
                0.0
            });
        }
        Ok(Self {
            start,
            tension,
            slope,
        })
    }

    fn eval(&self, span: f64) -> Option<f64> {
        if span <= self.start {
            return Some(0.0);
        }
        let s = (span - self.start) / LATTICE_STEP;
        let k = s.floor() as usize;
        if k + 1 >= self.tension.len() {
            return None;
        }
        let t = s - k as f64;
        let (p0, p1) = (self.tension[k], self.tension[k + 1]);
        let (m0, m1) = (
            self.slope[k] * LATTICE_STEP,
            self.slope[k + 1] * LATTICE_STEP,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * p0
                + (t3 - 2.0 * t2 + t) * m0
                + (-2.0 * t3 + 3.0 * t2) * p1
                + (t3 - t2) * m1,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MooringSystem {
    pub lines: Vec<MooringLineSpec>,
    lattices: Vec<TensionLattice>,
}

impl MooringSystem {
    pub fn new(lines: Vec<MooringLineSpec>) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::InvalidInput(
                "mooring system needs at least one line".into(),
            ));
        }
        for l in &lines {
            l.validate()?;
        }
        let lattices = lines
            .iter()
            .map(TensionLattice::build)
            .collect::<Result<_>>()?;
        Ok(Self { lines, lattices })
    }

    pub fn from_layout(layout: &MooringLayout) -> Result<Self> {
        Self::new(layout.lines())
    }

    fn tension(&self, k: usize, span: f64) -> Result<f64> {
        match self.lattices[k].eval(span) {
            Some(t) => Ok(t),
            None => horizontal_tension(&self.lines[k], span).map_err(|e| with_line(e, k)),
        }
    }

    /// Net horizontal restoring force at a platform position relative to neutral.
    pub fn net_force(&self, position: Vector2) -> Result<Vector2> {
        self.force_and_moment(position, 0.0).map(|(f, _)| f)
    }

    /// Net force and yaw moment using cached tensions.
    pub fn force_and_moment(&self, position: Vector2, heading_rad: f64) -> Result<(Vector2, f64)> {
        let mut total = (Vector2::ZERO, 0.0);
        for (k, line) in self.lines.iter().enumerate() {
            let (f, m) = line_force(line, position, heading_rad, &|s| self.tension(k, s))?;
            total.0 += f;
            total.1 += m;
        }
        Ok(total)
    }

    /// Net force and yaw moment with every tension solved exactly.
    pub fn force_and_moment_exact(
        &self,
        position: Vector2,
        heading_rad: f64,
    ) -> Result<(Vector2, f64)> {
        let mut total = (Vector2::ZERO, 0.0);
        for (k, line) in self.lines.iter().enumerate() {
            let (f, m) = line_force(line, position, heading_rad, &|s| {
                horizontal_tension(line, s).map_err(|e| with_line(e, k))
            })?;
            total.0 += f;
            total.1 += m;
        }
        Ok(total)
    }

    /// Smallest displacement along `direction` from `base` at which a line goes taut.
    pub fn taut_offset(&self, base: Vector2, direction: Vector2) -> f64 {
        let dir = direction.unit_or_x();
        let feasible = |d: f64| {
            let p = base + dir * d;
            self.lines
                .iter()
                .all(|l| (p + l.fairlead_offset - l.anchor).norm() < l.taut_span())
        };
        if !feasible(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while feasible(hi) {
            hi *= 2.0;
            if hi > 1e5 {
                return hi;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn with_line(e: Error, k: usize) -> Error {
    match e {
        Error::LineTaut { span, limit, .. } => Error::LineTaut {
            line: k,
            span,
            limit,
        },
        other => other,
    }
}

/// Net restoring force on a platform at `position` (relative to neutral).
pub fn net_mooring_force(system: &MooringSystem, position: Vector2) -> Result<Vector2> {
    system.net_force(position)
}
