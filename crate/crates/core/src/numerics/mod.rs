//! Small numerical kernels shared by the model modules: adaptive quadrature,
//! fixed-step Runge-Kutta integration, running integrals of
//! gridded samples and bracketing root search.

pub mod cumulative;
pub mod ode;
pub mod quadrature;
pub mod roots;

pub use cumulative::cumulative_uniform;
pub use ode::{rk4_integrate, rk4_step, OdeState};
pub use quadrature::{integrate, integrate_segments, integrate_to_infinity, Tolerance};
pub use roots::bisect;
