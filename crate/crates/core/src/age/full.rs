//! Rates that depend on both age and time: upwind transport on the
//! characteristic-aligned grid, with age-averaged effective rates.

use super::grid::{check_truncation, first_sign_change, AgeDensityField, AgeGrid, AgeSolution, EffectiveRates};
use super::profile::AgeProfile;
use super::rate::AgeTimeRate;
use crate::deterministic::PopulationCurves;
use crate::error::{Error, Result};
use crate::numerics::cumulative_uniform;

/// Each step shifts the density one node along its characteristic and damps it
/// by the trapezoidal survival `e^{−Δ(λ_d(a,t) + λ_d(a+Δ,t+Δ))/2}`. The newborn
/// node solves `ρ₀ = Σ λ_b ρ Δa` including its own term. Mean curves follow
/// `x = x(0) e^{Λ_b* − Λ_d*}` from the effective rates.
pub fn solve_full(birth: &AgeTimeRate, death: &AgeTimeRate, profile: &AgeProfile, grid: &AgeGrid) -> Result<AgeSolution> {
    profile.validate()?;
    birth.validate()?;
    death.validate()?;
    let times = grid.times()?;
    let n = times.len() - 1;
    let step = grid.step;
    let nodes = grid.age_nodes(profile)?;
    let ages: Vec<f64> = (0..nodes).map(|i| i as f64 * step).collect();
    let snaps = grid.snapshot_indices()?;

    let x0 = profile.mass();
    let mut rho = profile.on_grid(step, nodes);
    let initial_nodes = rho.iter().rposition(|&v| v > 0.0).map_or(1, |i| i + 1);
    // Initial mass that never made it onto the grid counts as truncated.
    let mut outside = profile.mass_beyond(nodes as f64 * step);
    let mut truncated_fraction: f64 = 0.0;

    let rates_at = |rate: &AgeTimeRate, t: f64, active: usize| -> Vec<f64> {
        ages[..active].iter().map(|&a| rate.value(a, t)).collect()
    };
    let mut lb_star = vec![0.0; n + 1];
    let mut ld_star = vec![0.0; n + 1];
    let mut density = Vec::with_capacity(snaps.len());
    let mut next_snap = snaps.iter().peekable();

    let mut active = initial_nodes.min(nodes);
    let mut ld_now = rates_at(death, 0.0, active);
    for j in 0..=n {
        let t = times[j];
        let lb_now = rates_at(birth, t, active);
        let mass: f64 = rho[..active].iter().sum::<f64>() * step;
        if !(mass > 0.0) {
            return Err(Error::numerical(format!("population vanished on the grid at t = {t}")));
        }
        let born: f64 = lb_now.iter().zip(&rho).map(|(l, r)| l * r).sum::<f64>() * step;
        let died: f64 = ld_now.iter().zip(&rho).map(|(l, r)| l * r).sum::<f64>() * step;
        lb_star[j] = born / mass;
        ld_star[j] = died / mass;
        truncated_fraction = truncated_fraction.max(outside / mass);
        if next_snap.peek() == Some(&&j) {
            next_snap.next();
            density.push(rho.clone());
        }
        if j == n {
            break;
        }

        let t_next = times[j + 1];
        let grown = (active + 1).min(nodes);
        let ld_next = rates_at(death, t_next, grown);
        let last = rho[nodes - 1];
        if active == nodes && last > 0.0 {
            let s = (-0.5 * step * (ld_now[nodes - 1] + death.value(ages[nodes - 1] + step, t_next))).exp();
            outside += last * s * step;
        }
        for i in (1..grown).rev() {
            rho[i] = rho[i - 1] * (-0.5 * step * (ld_now[i - 1] + ld_next[i])).exp();
        }
        let lb_next = rates_at(birth, t_next, grown);
        let older: f64 = lb_next[1..].iter().zip(&rho[1..grown]).map(|(l, r)| l * r).sum::<f64>() * step;
        let denom = 1.0 - lb_next[0] * step;
        if denom <= 0.0 {
            return Err(Error::grid(format!("step {step} too coarse for newborn fertility {}", lb_next[0])));
        }
        rho[0] = older / denom;
        active = grown;
        ld_now = ld_next;
    }
    check_truncation(truncated_fraction)?;

    let net: Vec<f64> = lb_star.iter().zip(&ld_star).map(|(b, d)| b - d).collect();
    let x: Vec<f64> = cumulative_uniform(&net, step).into_iter().map(|h| x0 * h.exp()).collect();
    let birth_rate: Vec<f64> = lb_star.iter().zip(&x).map(|(l, v)| l * v).collect();
    let death_rate: Vec<f64> = ld_star.iter().zip(&x).map(|(l, v)| l * v).collect();
    let xb: Vec<f64> = cumulative_uniform(&birth_rate, step).into_iter().map(|v| x0 + v).collect();
    let xd: Vec<f64> = xb.iter().zip(&x).map(|(b, v)| b - v).collect();
    let gap: Vec<f64> = xd.iter().zip(&x).map(|(d, v)| d - v).collect();
    let tstar = first_sign_change(&times, &gap);
    Ok(AgeSolution {
        field: AgeDensityField { step, times: snaps.iter().map(|&j| times[j]).collect(), density },
        curves: PopulationCurves { t: times, x, xb, xd, x0 },
        birth_rate,
        death_rate,
        effective: EffectiveRates { lambda_b_star: lb_star, lambda_d_star: ld_star },
        tstar,
        truncated_fraction,
    })
}
