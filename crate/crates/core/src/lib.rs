#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Competition of N species for one resource in a heterogeneous patchy or
//! one-dimensional habitat with fast migration.
//!
//! The crate builds the averaged (aggregated) chemostat, predicts which
//! species is excluded, and checks those predictions against the full
//! spatial system: steady-state continuation in the migration time scale
//! `eps`, stiff time integration and slow/fast diagnostics.

pub mod aggregated;
pub mod analysis;
pub mod commands;
pub mod domain;
pub mod error;
pub mod model;
pub mod output;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};
