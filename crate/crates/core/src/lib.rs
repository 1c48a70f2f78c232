//! Dynamic floating offshore wind farm simulation and control.
//!
//! The crate couples a dynamic wake model with planar floating-platform
//! dynamics, and layers a farm-level layout optimizer over per-turbine model
//! predictive position controllers.

pub mod aero;
pub mod controller;
pub mod error;
pub mod farm;
pub mod frame;
pub mod mooring;
pub mod mpc;
pub mod params;
pub mod plant;
pub mod predictive;
pub mod qp;
pub mod regulator;
pub mod scenario;
pub mod sim;
pub mod wake;
pub mod wind;

pub use error::{Error, Result};
