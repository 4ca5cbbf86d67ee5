//! Age-structured mean dynamics: transport of the age density along
//! characteristics with a birth boundary, in three rate structures.

pub mod full;
pub mod grid;
pub mod independent;
pub mod profile;
pub mod rate;
pub mod renewal;

pub use full::solve_full;
pub use grid::{first_sign_change, AgeDensityField, AgeGrid, AgeSolution, EffectiveRates, MASS_CUTOFF};
pub use independent::solve_age_independent;
pub use profile::AgeProfile;
pub use rate::{cumulative_hazard_characteristic, AgeTimeRate, Shape, ShapeSpec};
pub use renewal::{
    alpha0_hat, alpha_hat, beta_hat, laplace_consistency, malthusian_parameter, solve_time_independent_renewal,
    LaplaceReport, LaplaceSample,
};
