pub mod age;
pub mod deterministic;
pub mod error;
pub mod numerics;
pub mod pgf;
pub mod rates;
pub mod stochastic;

pub use error::{Error, Result};
pub use rates::{RateFunction, RatePair, RateSpec, Regime};
