//! Dual coordinate ascent solvers for strongly convex primal problems with
//! separable nonsmooth terms and linear constraints.
//!
//! The library assembles the Lagrange dual of
//! `min f(x) + (1/n) sum phi_i(A_i^T x)  s.t.  Bx + b = 0, Jx + q <= 0`
//! and solves it one random coordinate per iteration, recovering primal
//! solutions by weighted averaging of `x*(v^k)`. On top of the single-loop
//! solver sit a restart schedule, a warm-start schedule for unconstrained
//! empirical-risk problems, full-gradient baselines and a benchmark harness
//! with reproducible instance generation and CSV traces.

pub mod bench;
pub mod dual;
pub mod engine;
pub mod error;
pub mod io;
pub mod prox;
pub mod rng;
pub mod schedules;
pub mod theta;
pub mod trace;
pub mod weights;

pub mod baselines;

pub use dual::{DualModel, ProblemSpec};
pub use engine::{EngineState, K0Policy, SolveReport, StepVariant};
pub use error::{Result, SolverError};
pub use prox::{Loss, Regularizer, SeparableTerm};
pub use rng::RngStream;
pub use theta::{ScheduleMode, ThetaSchedule};
pub use trace::{TraceRecord, Tracer};
pub use weights::WeightVector;
