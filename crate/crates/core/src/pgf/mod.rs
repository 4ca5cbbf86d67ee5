//! Generating-function analytics for the birth-death chain: marginal and joint
//! pgfs, extinction, second moments, progeny at extinction and the law of
//! `Δ = 2N_d − N_b`.

pub mod delta;
pub mod homographic;
pub mod joint;
pub mod marginal;
pub mod moments;
pub mod progeny;
pub mod solvable;

pub use delta::{crossing_rates, delta_distribution, CrossingRates, DeltaPmf, FourierOptions};
pub use homographic::HomographicMap;
pub use joint::{joint_pgf_general, joint_pgf_grid, propagate, JointPgfGrid, ScaledPropagator, ZetaDiagnostics};
pub use marginal::{
    extinction_cdf, extinction_prob, kappa, marginal_pgf, pmf_living, pmf_living_table, MarginalState,
};
pub use moments::{moment_odes, scaled_covariance_limit, SecondMoments};
pub use progeny::{progeny_at_extinction, ProgenyLaw};
pub use solvable::joint_pgf_solvable;
