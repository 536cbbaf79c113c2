//! Totally asynchronous block-based primal-dual optimization.
//!
//! Primal agents run projected gradient descent on their own blocks of a
//! Tikhonov-regularized Lagrangian while dual agents run projected gradient
//! ascent on theirs. Every primal value carries the vector of dual update
//! counts it was computed under, and agents only mix values that share it.
//!
//! * [`problem`]: problem instances, the Lagrangian and derived constants.
//! * [`projection`]: box and nonnegative l1-ball projections.
//! * [`agents`]: primal and dual agent state machines.
//! * [`simulator`]: seeded discrete-event engine and the `ops`/`T`/`K` observer.
//! * [`reference`]: centralized solvers and bound evaluators.
//! * [`netflow`]: the network-flow benchmark family and its experiment sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod error;
pub mod netflow;
pub mod problem;
pub mod projection;
pub mod reference;
pub mod simulator;

pub use error::{Error, Result};
pub use problem::{
    compute_beta, compute_diameter_and_lipschitz, compute_dual_bound, compute_gamma_bound, eval_lagrangian,
    grad_mu, grad_x, Constraints, DualGeometry, Objective, Partition, ProblemConstants, ProblemSpec,
};
pub use reference::{SaddlePoint, Stepsizes};
pub use simulator::{run, RunResult, RunSummary, SimulationConfig, TraceRecord};
