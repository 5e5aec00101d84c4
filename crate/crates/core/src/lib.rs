//! Stochastic linear bandits under gap-adjusted misspecification.
//!
//! The crate builds finite-action environments whose true reward is a
//! certified `ρ`-gap-adjusted perturbation of a linear anchor, runs LinUCB
//! (and its homogenized variant) against them, and checks every recorded
//! trajectory against the inequalities of the regret analysis.
//!
//! - [`linalg`]: design matrix with Sherman-Morrison inverse and log-determinant.
//! - [`model`]: action sets, envelopes, environments, certification.
//! - [`policy`]: confidence radius schedules, the confidence ellipsoid,
//!   the policy registry and the run loop.
//! - [`diagnostics`]: lemma checks, regret bounds and aggregate statistics.
//! - [`harness`]: experiment configuration, batch runs and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod policy;

pub use error::{Error, Result};
