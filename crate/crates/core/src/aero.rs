//! Rotor aerodynamics: thrust (actuator disc form), torque, and the
//! tabulated thrust/torque coefficients over tip-speed ratio and pitch.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::frame::{rotor_normal, Vector2};

/// Bundled coefficient table, produced by `cargo run --example gen_coefficients`.
pub const DEFAULT_TABLE: &str = include_str!("../data/coefficients.txt");

pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

/// Analytic surrogate used to generate the bundled table.
///
/// Power coefficient has a flat plateau around λ = 7.55 (peak 0.482) and
/// rolls off for negative pitch (pitch-to-stall). Thrust rolls off more
/// slowly with pitch than power does.
pub mod surrogate {
    pub const LAMBDA_OPT: f64 = 7.55;
    pub const CP_MAX: f64 = 0.482;
    pub const CT_MAX: f64 = 0.86;

    pub fn power_coefficient(lambda: f64, pitch_deg: f64) -> f64 {
        let plateau = (-((lambda - LAMBDA_OPT) / 5.0).powi(4)).exp();
        let stall = 1.0 / (1.0 + (pitch_deg / 8.0).powi(2));
        CP_MAX * plateau * stall
    }

    pub fn thrust_coefficient(lambda: f64, pitch_deg: f64) -> f64 {
        let plateau = (-((lambda - 6.5) / 7.0).powi(4)).exp();
        let stall = 1.0 / (1.0 + (pitch_deg / 30.0).powi(2));
        CT_MAX * plateau * stall
    }
}

#[derive(Debug)]
pub struct CoefficientTable {
    pub lambdas: Vec<f64>,
    pub pitches: Vec<f64>,
    /// Row-major by tip-speed ratio.
    pub ct: Vec<f64>,
    pub cq: Vec<f64>,
    clamped: AtomicUsize,
}

impl Clone for CoefficientTable {
    fn clone(&self) -> Self {
        Self {
            lambdas: self.lambdas.clone(),
            pitches: self.pitches.clone(),
            ct: self.ct.clone(),
            cq: self.cq.clone(),
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for CoefficientTable {
    fn eq(&self, o: &Self) -> bool {
        self.lambdas == o.lambdas && self.pitches == o.pitches && self.ct == o.ct && self.cq == o.cq
    }
}

impl CoefficientTable {
    pub fn new(lambdas: Vec<f64>, pitches: Vec<f64>, ct: Vec<f64>, cq: Vec<f64>) -> Result<Self> {
        let n = lambdas.len() * pitches.len();
        if lambdas.len() < 2 || pitches.len() < 2 || ct.len() != n || cq.len() != n {
            return Err(Error::Dimension(format!(
                "table axes {}x{} do not match {} / {} entries",
                lambdas.len(),
                pitches.len(),
                ct.len(),
                cq.len()
            )));
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&lambdas) || !increasing(&pitches) {
            return Err(Error::InvalidInput(
                "table axes must be strictly increasing".into(),
            ));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            for j in 0..pitches.len() {
                let k = i * pitches.len() + j;
                if !(0.0..=1.2).contains(&ct[k]) {
                    return Err(Error::InvalidInput(format!(
                        "C_t {} out of [0, 1.2]",
                        ct[k]
                    )));
                }
                if l * cq[k] > BETZ_LIMIT {
                    return Err(Error::InvalidInput(format!(
                        "C_p = {} exceeds the Betz limit at lambda {l}",
                        l * cq[k]
                    )));
                }
            }
        }
        Ok(Self {
            lambdas,
            pitches,
            ct,
            cq,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn from_surrogate() -> Self {
        let lambdas: Vec<f64> = (0..=28).map(|i| 1.0 + 0.5 * i as f64).collect();
        let pitches: Vec<f64> = (0..=30).map(|i| -30.0 + i as f64).collect();
        let mut ct = Vec::new();
        let mut cq = Vec::new();
        for &l in &lambdas {
            for &b in &pitches {
                ct.push(surrogate::thrust_coefficient(l, b));
                cq.push(surrogate::power_coefficient(l, b) / l);
            }
        }
        Self::new(lambdas, pitches, ct, cq).expect("surrogate table is valid")
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled coefficient table parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |m: &str| Error::Parse {
            path: "coefficient table".into(),
            message: m.into(),
        };
        let mut nums = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|e| err(&format!("{t}: {e}"))));
        let mut next = || {
            nums.next()
                .unwrap_or_else(|| Err(err("unexpected end of table")))
        };
        let nl = next()? as usize;
        let nb = next()? as usize;
        let mut take = |n: usize| (0..n).map(|_| next()).collect::<Result<Vec<f64>>>();
        let lambdas = take(nl)?;
        let pitches = take(nb)?;
        let ct = take(nl * nb)?;
        let cq = take(nl * nb)?;
        Self::new(lambdas, pitches, ct, cq)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# rotor coefficient table: tip-speed ratio rows, pitch (deg) columns"
        );
        let _ = writeln!(
            s,
            "# blocks: lambda axis, beta axis, C_t (row-major), C_q (row-major)"
        );
        let _ = writeln!(s, "{} {}", self.lambdas.len(), self.pitches.len());
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "{}", join(&self.lambdas));
        let _ = writeln!(s, "{}", join(&self.pitches));
        for block in [&self.ct, &self.cq] {
            for row in block.chunks(self.pitches.len()) {
                let _ = writeln!(s, "{}", join(row));
            }
        }
        s
    }

    /// Number of out-of-bounds lookups that were clamped.
    /// Largest `C_p = λ C_q` over the tabulated grid.
    pub fn max_power_coefficient(&self) -> f64 {
        let nb = self.pitches.len();
        self.cq
            .iter()
            .enumerate()
            .map(|(k, cq)| self.lambdas[k / nb] * cq)
            .fold(0.0, f64::max)
    }

    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    fn locate(axis: &[f64], v: f64) -> (usize, f64) {
        let i = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
        let f = (v - axis[i]) / (axis[i + 1] - axis[i]);
        (i, f)
    }

    /// Bilinear lookup of (C_t, C_q); out-of-range inputs are clamped and counted.
    pub fn lookup(&self, lambda: f64, pitch_deg: f64) -> (f64, f64) {
        let (l0, l1) = (self.lambdas[0], *self.lambdas.last().unwrap());
        let (b0, b1) = (self.pitches[0], *self.pitches.last().unwrap());
        let lc = lambda.clamp(l0, l1);
        let bc = pitch_deg.clamp(b0, b1);
        if lc != lambda || bc != pitch_deg {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let (i, fl) = Self::locate(&self.lambdas, lc);
        let (j, fb) = Self::locate(&self.pitches, bc);
        let nb = self.pitches.len();
        let bil = |t: &[f64]| {
            let a = t[i * nb + j];
            let b = t[i * nb + j + 1];
            let c = t[(i + 1) * nb + j];
            let d = t[(i + 1) * nb + j + 1];
            a * (1.0 - fl) * (1.0 - fb) + b * (1.0 - fl) * fb + c * fl * (1.0 - fb) + d * fl * fb
        };
        (bil(&self.ct), bil(&self.cq))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeroParams {
    pub rotor_diameter: f64,
    pub air_density: f64,
    pub table: CoefficientTable,
}

impl AeroParams {
    pub fn rotor_area(&self) -> f64 {
        0.25 * PI * self.rotor_diameter * self.rotor_diameter
    }

    pub fn tip_speed_ratio(&self, rotor_speed: f64, wind_speed: f64) -> f64 {
        if wind_speed <= 0.1 {
            return *self.table.lambdas.last().unwrap();
        }
        rotor_speed * 0.5 * self.rotor_diameter / wind_speed
    }

    /// Aerodynamic rotor torque `½ ρ A C_q V² R` with `V` the rotor-normal speed.
    pub fn torque(&self, rotor_speed: f64, normal_speed: f64, pitch_deg: f64) -> f64 {
        let v = normal_speed.max(0.0);
        let (_, cq) = self
            .table
            .lookup(self.tip_speed_ratio(rotor_speed, v), pitch_deg);
        0.5 * self.air_density * self.rotor_area() * cq * v * v * 0.5 * self.rotor_diameter
    }

    pub fn thrust_coefficient(&self, rotor_speed: f64, normal_speed: f64, pitch_deg: f64) -> f64 {
        let v = normal_speed.max(0.0);
        self.table
            .lookup(self.tip_speed_ratio(rotor_speed, v), pitch_deg)
            .0
    }

    pub fn coefficient_lookup(&self, lambda: f64, pitch_deg: f64) -> (f64, f64) {
        self.table.lookup(lambda, pitch_deg)
    }
}

/// Rotor thrust `⅛ C_t π ρ D² |V_rel|² n(γ)`.
pub fn thrust_force(aero: &AeroParams, v_rel: Vector2, yaw_deg: f64, ct: f64) -> Vector2 {
    let d = aero.rotor_diameter;
    let mag = 0.125 * ct * PI * aero.air_density * d * d * v_rel.dot(v_rel);
    rotor_normal(yaw_deg) * mag
}

/// Actuator-disc thrust coefficient for an axial induction factor.
pub fn thrust_coefficient_from_induction(a: f64) -> f64 {
    4.0 * a * (1.0 - a)
}

/// Inverse of [`thrust_coefficient_from_induction`] on the lower branch.
pub fn induction_from_thrust_coefficient(ct: f64) -> f64 {
    0.5 * (1.0 - (1.0 - ct.clamp(0.0, 0.96)).sqrt())
}
