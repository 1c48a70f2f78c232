//! Physical parameters of the turbine, platform and farm.
//!
//! All constants are loaded from a TOML parameter file. The bundled default
//! (`data/physical.toml`) describes a 5 MW reference rotor on a semi-submersible
//! platform. Each key carries a one-line source note that is echoed into run
//! logs so a result can always be traced back to the numbers that produced it.

use serde::{Deserialize, Serialize};

use crate::aero::{AeroParams, CoefficientTable};
use crate::error::{Error, Result};
use crate::mooring::MooringLayout;
use crate::wake::WakeParams;

pub const DEFAULT_PARAMETERS: &str = include_str!("../data/physical.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorParams {
    pub diameter: f64,
    pub hub_height: f64,
    pub air_density: f64,
}

/// Horizontal-plane hydrodynamics of the platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroParams {
    pub water_density: f64,
    /// `Σ C_d A` over submerged members, m².
    pub drag_sum: f64,
    pub mass: f64,
    pub added_mass: f64,
    /// Linear radiation damping in surge and sway, N·s/m.
    pub linear_damping: f64,
}

impl HydroParams {
    pub fn total_mass(&self) -> f64 {
        self.mass + self.added_mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivetrainParams {
    pub rotor_inertia: f64,
    pub generator_inertia: f64,
    pub gear_ratio: f64,
    pub shaft_stiffness: f64,
    pub shaft_damping: f64,
    pub generator_efficiency: f64,
}

/// Out-of-plane rigid-body terms used only by the predictive model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyParams {
    /// Hub height above the platform centre of gravity.
    pub thrust_arm: f64,
    pub heave_mass: f64,
    pub roll_inertia: f64,
    pub pitch_inertia: f64,
    pub yaw_inertia: f64,
    pub heave_stiffness: f64,
    pub roll_stiffness: f64,
    pub pitch_stiffness: f64,
    pub yaw_stiffness: f64,
    pub heave_damping: f64,
    pub roll_damping: f64,
    pub pitch_damping: f64,
    pub yaw_damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingParams {
    pub rated_power: f64,
    /// Generator speed the controllers regulate to, rpm.
    pub generator_speed_setpoint_rpm: f64,
    /// Gain of the speed feedback used when demand exceeds available power.
    pub speed_feedback_gain: f64,
    /// Axial induction assumed by the layout optimizer's episodes.
    pub episode_induction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub rotor: RotorParams,
    pub hydro: HydroParams,
    pub drivetrain: DrivetrainParams,
    pub body: BodyParams,
    pub operating: OperatingParams,
    pub mooring: MooringLayout,
    pub wake: WakeParams,
    /// Optional path to a coefficient table replacing the bundled one.
    #[serde(default)]
    pub coefficient_table: Option<String>,
    /// Source note per dotted key.
    #[serde(default)]
    pub provenance: std::collections::BTreeMap<String, String>,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::parse(DEFAULT_PARAMETERS).expect("bundled parameter file is valid")
    }
}

impl PhysicalParams {
    pub fn parse(text: &str) -> Result<Self> {
        let p: PhysicalParams = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<parameters>".into(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be positive, got {v}"));
            }
        };
        positive("rotor.diameter", self.rotor.diameter);
        positive("rotor.hub_height", self.rotor.hub_height);
        positive("rotor.air_density", self.rotor.air_density);
        positive("hydro.water_density", self.hydro.water_density);
        positive("hydro.mass", self.hydro.mass);
        positive("drivetrain.rotor_inertia", self.drivetrain.rotor_inertia);
        positive(
            "drivetrain.generator_inertia",
            self.drivetrain.generator_inertia,
        );
        positive("drivetrain.gear_ratio", self.drivetrain.gear_ratio);
        positive(
            "drivetrain.shaft_stiffness",
            self.drivetrain.shaft_stiffness,
        );
        positive("operating.rated_power", self.operating.rated_power);
        positive("body.heave_mass", self.body.heave_mass);
        positive("body.roll_inertia", self.body.roll_inertia);
        positive("body.pitch_inertia", self.body.pitch_inertia);
        positive("body.yaw_inertia", self.body.yaw_inertia);
        if self.hydro.drag_sum < 0.0
            || self.hydro.added_mass < 0.0
            || self.hydro.linear_damping < 0.0
        {
            errs.push("hydro drag, added mass and damping must be non-negative".into());
        }
        let eta = self.drivetrain.generator_efficiency;
        if !(eta > 0.0 && eta <= 1.0) {
            errs.push(format!(
                "drivetrain.generator_efficiency must be in (0, 1], got {eta}"
            ));
        }
        let a = self.operating.episode_induction;
        if !(a > 0.0 && a < 0.5) {
            errs.push(format!(
                "operating.episode_induction must be in (0, 0.5), got {a}"
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn aero(&self) -> Result<AeroParams> {
        let table = match &self.coefficient_table {
            None => CoefficientTable::bundled(),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                CoefficientTable::parse(&text).map_err(|e| Error::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
        };
        Ok(AeroParams {
            rotor_diameter: self.rotor.diameter,
            air_density: self.rotor.air_density,
            table,
        })
    }

    pub fn generator_speed_setpoint(&self) -> f64 {
        crate::frame::rpm_to_rad_s(self.operating.generator_speed_setpoint_rpm)
    }

    /// `key = value  # note` for every scalar, sorted by key.
    pub fn provenance_lines(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("parameters serialize");
        let mut out = Vec::new();
        flatten("", &value, &mut |key, v| {
            if key.starts_with("provenance") {
                return;
            }
            let note = self
                .provenance
                .get(key)
                .map(String::as_str)
                .unwrap_or("unspecified");
            out.push(format!("{key} = {v}  # {note}"));
        });
        out
    }
}

fn flatten(prefix: &str, v: &toml::Value, f: &mut dyn FnMut(&str, &toml::Value)) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, f);
            }
        }
        other => f(prefix, other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_parameters_load() {
        let p = PhysicalParams::default();
        assert_eq!(p.rotor.diameter, 126.0);
        assert!((p.hydro.total_mass() - 1.45e7).abs() < 1.0);
        assert_eq!(p.drivetrain.gear_ratio, 97.0);
    }

    #[test]
    fn every_scalar_has_a_source_note() {
        let p = PhysicalParams::default();
        for line in p.provenance_lines() {
            assert!(!line.ends_with("# unspecified"), "{line}");
        }
    }

    #[test]
    fn invalid_values_are_all_reported() {
        let mut p = PhysicalParams::default();
        p.rotor.diameter = -1.0;
        p.drivetrain.generator_efficiency = 1.5;
        match p.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
