//! Stochastic linear birth-death chain `(N, N_b, N_d)` and its Monte Carlo
//! estimators.

mod ensemble;
mod initial;
mod trajectory;

pub use ensemble::{
    first_crossing_stats, run_ensemble, run_extinction_ensemble, CrossingIntensity, EmpiricalPmf,
    EnsembleOptions, EnsembleSummary, Estimate, ExtinctionOptions, ExtinctionSummary,
    FirstCrossingStats, GridEstimate, StoppingRelation,
};
pub use initial::{InitialLaw, InitialLawSpec};
pub use trajectory::{
    run_chain, simulate_from, simulate_trajectory, Crossing, CrossingType, EventKind, Limits, Outcome,
    State, StopReason, Trajectory,
};
