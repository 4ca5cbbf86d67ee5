//! Initial age densities `ρ₀(a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_segments, Tolerance};

/// Initial age density. `mass` is always the total `x(0) = ∫ρ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeProfile {
    /// All individuals aged zero. On a grid this is `mass/Δa` in the first cell.
    Cohort { mass: f64 },
    /// Uniform on `[0, max_age)`.
    Uniform { mass: f64, max_age: f64 },
    /// `mass · rate · e^{−rate a}`.
    Exponential { mass: f64, rate: f64 },
    /// Linear interpolation of `(age, density)` knots, zero beyond the last.
    Tabulated { knots: Vec<(f64, f64)> },
}

const PROFILE_TOL: Tolerance = Tolerance::new(1e-14, 1e-13);

impl AgeProfile {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Self::Cohort { mass } => pos("mass", *mass),
            Self::Uniform { mass, max_age } => pos("mass", *mass).and(pos("max_age", *max_age)),
            Self::Exponential { mass, rate } => pos("mass", *mass).and(pos("rate", *rate)),
            Self::Tabulated { knots } => {
                if knots.len() < 2 || knots[0].0 != 0.0 {
                    return Err(Error::domain("tabulated profile needs at least two knots starting at age 0"));
                }
                if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) || knots.iter().any(|k| !(k.1.is_finite() && k.1 >= 0.0)) {
                    return Err(Error::domain("profile knots must increase in age with nonnegative densities"));
                }
                pos("profile mass", self.mass())
            }
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Self::Cohort { mass } | Self::Uniform { mass, .. } | Self::Exponential { mass, .. } => *mass,
            Self::Tabulated { knots } => knots.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum(),
        }
    }

    pub fn is_cohort(&self) -> bool {
        matches!(self, Self::Cohort { .. })
    }

    /// Density at age `a`; a cohort has no density and reports zero.
    pub fn density(&self, a: f64) -> f64 {
        match self {
            Self::Cohort { .. } => 0.0,
            Self::Uniform { mass, max_age } => {
                if (0.0..*max_age).contains(&a) {
                    mass / max_age
                } else {
                    0.0
                }
            }
            Self::Exponential { mass, rate } => {
                if a >= 0.0 {
                    mass * rate * (-rate * a).exp()
                } else {
                    0.0
                }
            }
            Self::Tabulated { knots } => {
                let i = knots.partition_point(|k| k.0 <= a);
                if a < 0.0 || i == knots.len() {
                    0.0
                } else {
                    let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
                    y0 + (y1 - y0) * (a - x0) / (x1 - x0)
                }
            }
        }
    }

    /// Age beyond which less than `fraction` of the mass lies.
    pub fn extent(&self, fraction: f64) -> f64 {
        match self {
            Self::Cohort { .. } => 0.0,
            Self::Uniform { max_age, .. } => *max_age,
            Self::Exponential { rate, .. } => -fraction.ln() / rate,
            Self::Tabulated { knots } => knots.last().expect("validated").0,
        }
    }

    /// Mass at ages `≥ a`.
    pub fn mass_beyond(&self, a: f64) -> f64 {
        match self {
            Self::Cohort { mass } => {
                if a <= 0.0 {
                    *mass
                } else {
                    0.0
                }
            }
            Self::Uniform { mass, max_age } => mass * ((max_age - a.max(0.0)) / max_age).clamp(0.0, 1.0),
            Self::Exponential { mass, rate } => mass * (-rate * a.max(0.0)).exp(),
            Self::Tabulated { knots } => {
                let end = knots.last().expect("validated").0;
                if a >= end {
                    return 0.0;
                }
                let start = a.max(0.0);
                let mut breaks = vec![start];
                breaks.extend(knots.iter().map(|k| k.0).filter(|&k| k > start));
                integrate_segments(|u| self.density(u), &breaks, PROFILE_TOL).unwrap_or(f64::NAN)
            }
        }
    }

    /// `∫ρ₀(u) g(u) du`, splitting the quadrature at the profile's kinks and at
    /// the extra `breaks` supplied for `g`.
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G, breaks: &[f64]) -> Result<f64> {
        if let Self::Cohort { mass } = self {
            return Ok(mass * g(0.0));
        }
        let end = self.extent(1e-17);
        let mut pts = vec![0.0, end];
        pts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < end));
        match self {
            Self::Uniform { max_age, .. } => pts.push(*max_age),
            Self::Tabulated { knots } => pts.extend(knots.iter().map(|k| k.0)),
            _ => {}
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let scale = self.mass();
        integrate_segments(|u| self.density(u) * g(u), &pts, Tolerance::new(PROFILE_TOL.abs * scale, PROFILE_TOL.rel))
    }

    /// Densities at ages `i·step`, `i < n`; a cohort puts `mass/step` at age 0.
    pub fn on_grid(&self, step: f64, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|i| self.density(i as f64 * step)).collect();
        if let (Self::Cohort { mass }, Some(first)) = (self, v.first_mut()) {
            *first = mass / step;
        }
        v
    }
}
