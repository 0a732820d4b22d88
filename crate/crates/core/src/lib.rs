//! Desk-scale workbench for long-life force of electrothermal shape memory
//! alloy (SMA) muscles.
//!
//! The crate simulates a first-order thermal plant with a synthetic
//! functional-fatigue model, guards it with a one-step predictive
//! supervisor, drives it with the two cycling profiles (temperature-setpoint
//! `C1` and fixed-time `C2`), and turns the resulting logs into per-cycle
//! peak forces, exponential-decay fits, long-life force curves and a
//! conservative temperature limit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fitting;
pub mod generators;
pub mod harness;
pub mod plant;
pub mod plot;
pub mod supervisor;
pub mod sysid;
pub mod thermal;

pub use error::{Error, Result};
