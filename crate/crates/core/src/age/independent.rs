//! Rates that depend on time only: the mean curves are the Malthusian ones and
//! the age profile is assembled from the two characteristic branches.

use super::grid::{check_truncation, first_sign_change, AgeDensityField, AgeGrid, AgeSolution, EffectiveRates};
use super::profile::AgeProfile;
use crate::deterministic::solve_time_dependent;
use crate::error::{Error, Result};
use crate::rates::RatePair;

/// `ρ(a,t) = ρ₀(a−t) e^{−Λ_d(t)}` for `a ≥ t` and
/// `ρ(a,t) = ẋ_b(t−a) e^{−(Λ_d(t) − Λ_d(t−a))}` for `a < t`, with
/// `ẋ_b(t) = x(0) λ_b(t) e^{Λ_b(t) − Λ_d(t)}`.
pub fn solve_age_independent(rp: &RatePair, profile: &AgeProfile, grid: &AgeGrid) -> Result<AgeSolution> {
    profile.validate()?;
    let times = grid.times()?;
    let nodes = grid.age_nodes(profile)?;
    let step = grid.step;
    let a_max = (nodes - 1) as f64 * step;
    if a_max < grid.horizon {
        return Err(Error::grid(format!("max age {a_max} must reach the horizon {}", grid.horizon)));
    }
    let x0 = profile.mass();
    let curves = solve_time_dependent(rp, x0, &times)?;
    let hazard_d: Vec<f64> = times.iter().map(|&t| rp.death.hazard(t)).collect();
    let birth_rate: Vec<f64> = times.iter().zip(&curves.x).map(|(&t, x)| rp.birth.rate(t) * x).collect();
    let death_rate: Vec<f64> = times.iter().zip(&curves.x).map(|(&t, x)| rp.death.rate(t) * x).collect();

    let mut truncated_fraction: f64 = 0.0;
    for (j, &t) in times.iter().enumerate() {
        let beyond = profile.mass_beyond(a_max + step - t) * (-hazard_d[j]).exp();
        truncated_fraction = truncated_fraction.max(beyond / curves.x[j]);
    }
    check_truncation(truncated_fraction)?;

    let initial = profile.on_grid(step, nodes);
    let snaps = grid.snapshot_indices()?;
    let density = snaps
        .iter()
        .map(|&j| {
            (0..nodes)
                .map(|i| {
                    if i < j {
                        birth_rate[j - i] * (hazard_d[j - i] - hazard_d[j]).exp()
                    } else {
                        initial[i - j] * (-hazard_d[j]).exp()
                    }
                })
                .collect()
        })
        .collect();

    let gap: Vec<f64> = curves.xd.iter().zip(&curves.x).map(|(d, x)| d - x).collect();
    let tstar = first_sign_change(&times, &gap);
    Ok(AgeSolution {
        effective: EffectiveRates {
            lambda_b_star: times.iter().map(|&t| rp.birth.rate(t)).collect(),
            lambda_d_star: times.iter().map(|&t| rp.death.rate(t)).collect(),
        },
        field: AgeDensityField { step, times: snaps.iter().map(|&j| times[j]).collect(), density },
        curves,
        birth_rate,
        death_rate,
        tstar,
        truncated_fraction,
    })
}
