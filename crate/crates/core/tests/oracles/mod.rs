//! Independent reference solutions shared by the oracle tests and the
//! acceptance harness.

#![allow(dead_code)]

pub mod advection;
pub mod catenary;
pub mod model;
pub mod qp;
