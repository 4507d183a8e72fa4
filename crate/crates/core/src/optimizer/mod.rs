//! Successive convex approximation of the power and rate-split problems.

pub mod convex;
pub mod ipm;
pub mod sca;
pub mod surrogate;

pub use convex::{Affine, ConvexFn, ConvexProblem, Objective};
pub use ipm::{solve_convex_subproblem, IpmOptions, IpmSolution};
pub use surrogate::{surrogate_p2, surrogate_p4, P2Layout, P4Layout, QosParams, ScaIterate, UserAux, ALPHA_FLOOR};
pub use sca::{
    default_starts, evaluate_point, multistart_optimize, optimize_power, optimize_ratesplit, qos_excess, trace_rows,
    two_step, write_trace_csv, RateSplitOutcome, ScaOptions, Solution, StartOutcome, StartReport, TracePoint, TraceRow,
};
