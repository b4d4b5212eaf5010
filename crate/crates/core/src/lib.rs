//! Simulation library for an electrostatic torsional micro-mirror driven in
//! digital (pull-in) mode.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds device parameters and derives the mechanical constants.
//! * [`electrostatics`] computes the tilt torque of a rigid plate over a
//!   partial electrode, with a quadrature oracle in [`quadrature`].
//! * [`quasistatics`] finds equilibria, pull-in and release voltages and the
//!   static hysteresis loop.
//! * [`charging`] models trapped oxide charge and the stuck-mirror condition.
//! * [`drive`] builds the per-electrode voltage programs.
//! * [`dynamics`] integrates the equation of motion with contact events.
//! * [`harness`] runs the virtual experiments and backs the CLI.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charging;
pub mod drive;
pub mod dynamics;
pub mod electrostatics;
pub mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod quadrature;
pub mod quasistatics;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{DeviceConfig, DeviceSpec, Side};
