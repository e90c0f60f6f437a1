//! Desk-scale flood data assimilation: a finite-volume shallow-water solver,
//! a cycled stochastic ensemble Kalman filter over friction and inflow
//! parameters, gauge and flood-extent verification, and a twin-experiment
//! harness.

// Validity checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catchment;
pub mod enkf;
pub mod error;
pub mod esri;
pub mod flood_extent;
pub mod forcing;
pub mod gauges;
pub mod grid;
pub mod harness;
pub mod rng;
pub mod swe;
pub mod time;

pub use error::{Error, Result};
pub use forcing::{ControlPrior, ControlSet, ControlVector};
pub use grid::{total_volume, FrictionField, GridSpec, HydraulicState, PhysicsParams};
