//! Finite-volume simulator for a two-dimensional cross-diffusion model of
//! urban crime with porous-medium (overcrowding-avoidance) diffusion.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: cell-centered rectangle grid, fields, quadrature and norms
//! - [`model`]: parameters, sources, initial data, homogeneous equilibrium
//! - [`operators`]: flux-form diffusion, upwind chemotaxis, right-hand side
//! - [`integrator`]: Heun stepping, step-size control, run driver
//! - [`diagnostics`]: monitors, audits, refinement classifier, weak residuals
//! - [`io`]: scenario files, `CWF1` snapshots, diagnostics CSV, run manifests
//! - [`convergence`]: manufactured-solution order tests

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod model;
pub mod operators;

pub use error::{Error, Result};
pub use grid::{cell_integral, discrete_norm, Field, Grid, NormKind};
pub use integrator::{run, stable_dt, step, FinalStatus, Simulator, StepControl, Trajectory};
pub use model::{gaussian_ic, homogeneous_steady_state, ModelParams, SimState, SourceTerm, Status};
