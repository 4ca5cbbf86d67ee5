//! Characteristic-aligned age/time grids and solver output.

use serde::{Deserialize, Serialize};

use super::profile::AgeProfile;
use crate::deterministic::PopulationCurves;
use crate::error::{Error, Result};

/// Mass allowed to fall off the end of the age axis, relative to the population.
pub const MASS_CUTOFF: f64 = 1e-10;

/// Uniform grid with `Δa = Δt = step`, so transport is an index shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGrid {
    pub step: f64,
    pub horizon: f64,
    /// Oldest age node. Defaults to the horizon plus the age below which all
    /// but `1e-12` of the initial mass lies, so nothing leaves the grid.
    #[serde(default)]
    pub max_age: Option<f64>,
    /// Times at which the full age profile is kept; each must be a grid time.
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

impl AgeGrid {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self { step, horizon, max_age: None, snapshots: Vec::new() }
    }

    pub fn with_snapshots(mut self, snapshots: Vec<f64>) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn with_max_age(mut self, max_age: f64) -> Self {
        self.max_age = Some(max_age);
        self
    }

    fn index_of(&self, t: f64, what: &str) -> Result<usize> {
        let k = (t / self.step).round();
        if !(t.is_finite() && t >= 0.0) || (k * self.step - t).abs() > 1e-9 * self.step.max(t) {
            return Err(Error::grid(format!("{what} {t} is not a multiple of the step {}", self.step)));
        }
        Ok(k as usize)
    }

    /// Number of time steps; the horizon must be a multiple of the step.
    pub fn steps(&self) -> Result<usize> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::grid(format!("step must be positive, got {}", self.step)));
        }
        let n = self.index_of(self.horizon, "horizon")?;
        if n == 0 {
            return Err(Error::grid("horizon must be at least one step"));
        }
        Ok(n)
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        Ok((0..=self.steps()?).map(|j| j as f64 * self.step).collect())
    }

    pub fn snapshot_indices(&self) -> Result<Vec<usize>> {
        let n = self.steps()?;
        let mut out = Vec::with_capacity(self.snapshots.len());
        for &t in &self.snapshots {
            let k = self.index_of(t, "snapshot time")?;
            if k > n {
                return Err(Error::grid(format!("snapshot time {t} is past the horizon")));
            }
            out.push(k);
        }
        if out.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::grid("snapshot times must be strictly increasing"));
        }
        Ok(out)
    }

    /// Number of age nodes `0, step, …` covering `[0, max_age]`.
    pub fn age_nodes(&self, profile: &AgeProfile) -> Result<usize> {
        let a_max = self.max_age.unwrap_or(self.horizon + profile.extent(1e-12));
        if !(a_max.is_finite() && a_max > 0.0) {
            return Err(Error::grid(format!("max age must be positive, got {a_max}")));
        }
        Ok((a_max / self.step).ceil() as usize + 1)
    }
}

/// Age profiles `ρ(a_i, t)` kept at the snapshot times, `a_i = i·step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeDensityField {
    pub step: f64,
    pub times: Vec<f64>,
    /// `density[k][i] = ρ(i·step, times[k])`.
    pub density: Vec<Vec<f64>>,
}

impl AgeDensityField {
    pub fn ages(&self) -> usize {
        self.density.first().map_or(0, Vec::len)
    }

    /// `Σ_i ρ(a_i, t_k) Δa`.
    pub fn mass(&self, k: usize) -> f64 {
        self.density[k].iter().sum::<f64>() * self.step
    }
}

/// Age-averaged rates `λ*(t) = ∫λ(a,t)ρ da / ∫ρ da` on the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub lambda_b_star: Vec<f64>,
    pub lambda_d_star: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeSolution {
    /// Mean curves at every grid time.
    pub curves: PopulationCurves,
    /// `ẋ_b(t_j) = ρ(0, t_j)`.
    pub birth_rate: Vec<f64>,
    /// `ẋ_d(t_j) = ∫λ_d ρ da`.
    pub death_rate: Vec<f64>,
    pub effective: EffectiveRates,
    pub field: AgeDensityField,
    /// First time `x_d = x`, interpolated linearly between grid times.
    pub tstar: Option<f64>,
    /// Largest fraction of the population outside the age grid at any time.
    pub truncated_fraction: f64,
}

/// First upward zero of `f`, linearly interpolated between samples.
pub fn first_sign_change(t: &[f64], f: &[f64]) -> Option<f64> {
    if f.first().is_some_and(|&v| v >= 0.0) {
        return t.first().copied();
    }
    f.windows(2).zip(t.windows(2)).find(|(v, _)| v[1] >= 0.0).map(|(v, s)| {
        s[0] + (s[1] - s[0]) * (-v[0]) / (v[1] - v[0])
    })
}

/// Checks the truncation fraction against [`MASS_CUTOFF`].
pub(crate) fn check_truncation(fraction: f64) -> Result<()> {
    if fraction > MASS_CUTOFF {
        Err(Error::grid(format!(
            "{fraction:.3e} of the population lies beyond the age grid (limit {MASS_CUTOFF:e}); raise max_age"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert_eq!(AgeGrid::new(0.25, 2.0).steps().unwrap(), 8);
        assert!(matches!(AgeGrid::new(0.3, 1.0).steps(), Err(Error::Grid(_))));
        assert!(AgeGrid::new(0.0, 1.0).steps().is_err());
        let g = AgeGrid::new(0.1, 1.0).with_snapshots(vec![0.0, 0.5, 1.0]);
        assert_eq!(g.snapshot_indices().unwrap(), vec![0, 5, 10]);
        assert!(AgeGrid::new(0.1, 1.0).with_snapshots(vec![0.55]).snapshot_indices().is_err());
        assert!(AgeGrid::new(0.1, 1.0).with_snapshots(vec![1.1]).snapshot_indices().is_err());
        let nodes = AgeGrid::new(0.5, 2.0).age_nodes(&AgeProfile::Uniform { mass: 1.0, max_age: 3.0 }).unwrap();
        assert_eq!(nodes, 11);
    }

    #[test]
    fn sign_change_interpolates() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(first_sign_change(&t, &[-2.0, -1.0, 1.0, 2.0]), Some(1.5));
        assert_eq!(first_sign_change(&t, &[-2.0, -1.0, -1.0, -0.5]), None);
    }
}
