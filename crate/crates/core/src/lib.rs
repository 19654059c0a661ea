//! Global minimization of fourth-order blind and semiblind equalization
//! costs through a sum-of-squares semidefinite relaxation.
//!
//! The pipeline runs bottom-up through the modules: [`signal_model`]
//! produces data, [`lifting`] and [`cost_builder`] turn it into an even
//! quartic in the real equalizer vector, [`sos_sdp`] and [`sdp_solver`]
//! compute its global minimum, [`extraction`] recovers the equalizer, and
//! [`metrics`] scores it against the [`baselines`]. [`harness`] drives
//! Monte Carlo scenarios.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cost_builder;
pub mod error;
pub mod extraction;
pub mod harness;
pub mod lifting;
pub mod metrics;
pub mod sdp_solver;
pub mod signal_model;
pub mod sos_sdp;

pub use error::{Error, Result};
pub use signal_model::C64;
