//! Closed-form joint pgf when `λ_d = ρ λ_b`.
//!
//! In the clock `s = Λ_b(t)` the generator is constant. With
//! `θ(w) = ½√((1+ρ)² − 4ρw)` and `σ = (1+ρ)/2`:
//!
//! ```text
//! A = cosh θs − σ sinh(θs)/θ      B = ρ sinh(θs)/θ
//! C = −sinh(θs)/θ                 D = cosh θs + σ sinh(θs)/θ
//! ```
//!
//! and `Φ_t = φ₀((A z_b + B z_b z_d)/(C z_b + D))`. Both `cosh θs` and
//! `sinh(θs)/θ` are even in `θ`, so the root branch does not matter.
//!
//! For `|θ| s > 1` the ratio cancels badly; there the argument is taken from
//! the fixed points `r± = σ ± θ` of the flow, which it approaches as
//! `r₋ − 2θ (z_b − r₋)/(e^{2θs}(z_b − r₊) − (z_b − r₋))` with `Re θ ≥ 0`.

use num_complex::Complex64;

use super::marginal::DISK_SLACK;
use crate::error::{Error, Result};
use crate::rates::RateFunction;
use crate::stochastic::InitialLaw;

type C = Complex64;

/// `sinh(x)/x`, continuous at 0.
fn sinhc(x: C) -> C {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `θ(w) = ½√((1+ρ)² − 4ρw)`, principal root.
pub fn theta(rho: f64, w: C) -> C {
    0.5 * ((1.0 + rho).powi(2) - 4.0 * rho * w).sqrt()
}

/// Coefficients `(A, B, C, D)` at cumulative birth hazard `s`.
pub fn coefficients(rho: f64, s: f64, w: C) -> [C; 4] {
    let th = theta(rho, w);
    let sigma = 0.5 * (1.0 + rho);
    let ch = (th * s).cosh();
    let sh = s * sinhc(th * s);
    [ch - sigma * sh, rho * sh, -sh, ch + sigma * sh]
}

pub fn joint_pgf_solvable(
    birth: &RateFunction,
    rho: f64,
    law: &InitialLaw,
    t: f64,
    zb: C,
    zd: C,
) -> Result<C> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain(format!("ρ must be positive, got {rho}")));
    }
    for (name, z) in [("z_b", zb), ("z_d", zd)] {
        if z.norm() > 1.0 + DISK_SLACK {
            return Err(Error::domain(format!("|{name}| = {} exceeds 1", z.norm())));
        }
    }
    let s = birth.cumulative(t)?;
    Ok(law.pgf(argument(rho, s, zb, zd)))
}

fn argument(rho: f64, s: f64, zb: C, zd: C) -> C {
    let w = zb * zd;
    let th = theta(rho, w);
    if th.norm() * s <= 1.0 {
        let [a, b, c, d] = coefficients(rho, s, w);
        return (a * zb + b * w) / (c * zb + d);
    }
    let sigma = 0.5 * (1.0 + rho);
    let (lo, hi) = (sigma - th, sigma + th);
    let q = (2.0 * th * s).exp() * (zb - hi) - (zb - lo);
    lo - 2.0 * th * (zb - lo) / q
}

/// `lim_{t→∞}` of the `φ₀` argument: `(1 + ρ − 2θ(z_b z_d))/2`.
pub fn limit_argument(rho: f64, w: C) -> C {
    0.5 * (1.0 + rho - 2.0 * theta(rho, w))
}
