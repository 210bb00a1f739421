//! Finite-difference toolkit for the nonlocal parabolic MEMS equation
//!
//! ```text
//! u_t − Δu = λ / ((1 − u)² (1 + α ∫_Ω 1/(1 − u) dx)²),   u = 0 on ∂Ω
//! ```
//!
//! on an interval, a disk (radially symmetric or full 2D) and a rectangle:
//! IMEX time stepping with quench detection, Newton continuation of the
//! minimal steady branch, energy and decay-rate diagnostics, and bisection
//! of the critical voltage.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod linalg;
pub mod nonlocal;
pub mod search;
pub mod steady;

pub use diagnostics::{
    default_fit_window, energy, fit_decay, l2_distance, nonexistence_bound, DecayEstimate, DecayFit, DecayModel,
    ModelSelection,
};
pub use error::{MemsError, Result};
pub use grid::{build_grid, implicit_solve, laplacian_apply, laplacian_stencil, quadrature, Domain, Field, Grid};
pub use integrator::{preset, presets, run, step, Preset, SimConfig, SimOutcome, SimRun, Snapshot, TrajectorySample};
pub use nonlocal::{g_trunc, nonlocal_integral, reaction, reaction_jacobian, Params, RankOneJacobian};
pub use search::{bisect_lambda_star, classify, classify_extended, BisectOptions, BisectResult, LambdaClassification, Verdict};
pub use steady::{continuation, newton_solve, residual, BranchPoint, Continuation, NewtonOptions};
