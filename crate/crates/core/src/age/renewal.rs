//! Rates that depend on age only: the birth stream solves a renewal equation
//! of Volterra type, and its Laplace transform has a closed form.
//!
//! With survival `S(a) = e^{−Λ_d(a)}` and kernel `K(a) = λ_b(a) S(a)`,
//!
//! ```text
//! ẋ_b(t) = ∫_0^t K(a) ẋ_b(t−a) da + F(t),
//! F(t)   = ∫ ρ₀(u) λ_b(u+t) S(u+t)/S(u) du,
//! x(t)   = ∫_0^t S(a) ẋ_b(t−a) da + ∫ ρ₀(u) S(u+t)/S(u) du.
//! ```

use serde::{Deserialize, Serialize};

use super::grid::{check_truncation, first_sign_change, AgeDensityField, AgeGrid, AgeSolution, EffectiveRates};
use super::profile::AgeProfile;
use super::rate::Shape;
use crate::deterministic::PopulationCurves;
use crate::error::{Error, Result};
use crate::numerics::{bisect, cumulative_uniform, integrate_segments, integrate_to_infinity, Tolerance};

const TAIL_TOL: Tolerance = Tolerance::new(1e-14, 1e-12);

/// Survival from age `u` to age `u + s`.
fn survival(death: &Shape, u: f64, s: f64) -> f64 {
    (death.integral(u) - death.integral(u + s)).exp()
}

/// `Σ` over the trapezoid rule for `∫_0^{t_j} w(a_k) B(t_j − a_k) da`.
fn convolve(weights: &[f64], stream: &[f64], j: usize, step: f64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let inner: f64 = (1..j).map(|k| weights[k] * stream[j - k]).sum();
    step * (inner + 0.5 * (weights[0] * stream[j] + weights[j] * stream[0]))
}

/// Trapezoidal time-stepping of the renewal equation on a grid with `Δa = Δt`.
pub fn solve_time_independent_renewal(
    birth: &Shape,
    death: &Shape,
    profile: &AgeProfile,
    grid: &AgeGrid,
) -> Result<AgeSolution> {
    profile.validate()?;
    let times = grid.times()?;
    let n = times.len() - 1;
    let step = grid.step;
    let nodes = grid.age_nodes(profile)?;
    let a_max = (nodes - 1) as f64 * step;
    if a_max < grid.horizon {
        return Err(Error::grid(format!("max age {a_max} must reach the horizon {}", grid.horizon)));
    }

    let surv: Vec<f64> = (0..=n).map(|k| (-death.integral(k as f64 * step)).exp()).collect();
    let kb: Vec<f64> = (0..=n).map(|k| birth.value(k as f64 * step) * surv[k]).collect();
    let kd: Vec<f64> = (0..=n).map(|k| death.value(k as f64 * step) * surv[k]).collect();
    if let Some(k) = kb.iter().chain(&kd).position(|v| !v.is_finite()) {
        return Err(Error::grid(format!("kernel is not finite at age node {}", k % (n + 1))));
    }
    let denom = 1.0 - 0.5 * step * kb[0];
    if denom <= 0.0 {
        return Err(Error::grid(format!("step {step} too coarse for fertility {} at age 0", birth.value(0.0))));
    }

    let mut kinks = birth.kinks();
    kinks.extend(death.kinks());
    let tail = |t: f64, rate: &dyn Fn(f64) -> f64| -> Result<f64> {
        let breaks: Vec<f64> = kinks.iter().map(|k| k - t).collect();
        profile.integrate_against(|u| rate(u + t) * survival(death, u, t), &breaks)
    };

    let mut b = vec![0.0; n + 1];
    let mut x = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];
    for j in 0..=n {
        let t = times[j];
        let f = tail(t, &|a| birth.value(a))?;
        b[j] = if j == 0 {
            f
        } else {
            let explicit = step * ((1..j).map(|k| kb[k] * b[j - k]).sum::<f64>() + 0.5 * kb[j] * b[0]);
            (f + explicit) / denom
        };
        x[j] = convolve(&surv, &b, j, step) + tail(t, &|_| 1.0)?;
        d[j] = convolve(&kd, &b, j, step) + tail(t, &|a| death.value(a))?;
    }

    let x0 = profile.mass();
    let xb: Vec<f64> = cumulative_uniform(&b, step).into_iter().map(|v| x0 + v).collect();
    let xd: Vec<f64> = xb.iter().zip(&x).map(|(p, q)| p - q).collect();

    // Survivors at t_j of the initial mass that lies beyond the grid.
    let mut truncated_fraction: f64 = 0.0;
    for j in 0..=n {
        let cut = a_max + step - times[j];
        if profile.mass_beyond(cut) == 0.0 {
            continue;
        }
        let mut breaks = vec![cut];
        breaks.extend(kinks.iter().map(|k| k - times[j]));
        let beyond = profile
            .integrate_against(|u| if u >= cut { survival(death, u, times[j]) } else { 0.0 }, &breaks)?;
        truncated_fraction = truncated_fraction.max(beyond / x[j]);
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
                        b[j - i] * surv[i]
                    } else {
                        let a = i as f64 * step;
                        initial[i - j] * survival(death, a - times[j], times[j])
                    }
                })
                .collect()
        })
        .collect();

    let gap: Vec<f64> = xd.iter().zip(&x).map(|(p, q)| p - q).collect();
    let tstar = first_sign_change(&times, &gap);
    Ok(AgeSolution {
        effective: EffectiveRates {
            lambda_b_star: b.iter().zip(&x).map(|(p, q)| p / q).collect(),
            lambda_d_star: d.iter().zip(&x).map(|(p, q)| p / q).collect(),
        },
        field: AgeDensityField { step, times: snaps.iter().map(|&j| times[j]).collect(), density },
        curves: PopulationCurves { t: times, x, xb, xd, x0 },
        birth_rate: b,
        death_rate: d,
        tstar,
        truncated_fraction,
    })
}

/// `∫_0^∞ e^{−zs} f(s) ds`, split at `kinks`. A tail that does not decay is a
/// divergence error.
fn transform(f: impl Fn(f64) -> f64, z: f64, kinks: &[f64]) -> Result<f64> {
    let weighted = |s: f64| (-z * s).exp() * f(s);
    let mut breaks = vec![0.0];
    breaks.extend(kinks.iter().copied().filter(|&k| k > 0.0));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let last = *breaks.last().expect("nonempty");
    let head = if breaks.len() > 1 { integrate_segments(weighted, &breaks, TAIL_TOL)? } else { 0.0 };
    let tail = integrate_to_infinity(weighted, last, 1.0, TAIL_TOL)
        .map_err(|_| Error::Divergence(format!("transform does not converge at z = {z}")))?;
    Ok(head + tail)
}

/// `α̂(z) = ∫ e^{−za} λ_b(a) S(a) da`.
pub fn alpha_hat(birth: &Shape, death: &Shape, z: f64) -> Result<f64> {
    let mut kinks = birth.kinks();
    kinks.extend(death.kinks());
    transform(|a| birth.value(a) * (-death.integral(a)).exp(), z, &kinks)
}

/// `α̂₀(z) = ∫ e^{−za} S(a) da`.
pub fn alpha0_hat(death: &Shape, z: f64) -> Result<f64> {
    transform(|a| (-death.integral(a)).exp(), z, &death.kinks())
}

/// `β̂(z) = ∫ e^{−za} ρ₀(a) / S(a) da`.
pub fn beta_hat(death: &Shape, profile: &AgeProfile, z: f64) -> Result<f64> {
    profile.integrate_against(|a| (death.integral(a) - z * a).exp(), &death.kinks())
}

/// Root of `α̂(r) = 1`, the asymptotic growth rate of the renewal solution;
/// `None` when `α̂ < 1` everywhere it converges.
pub fn malthusian_parameter(birth: &Shape, death: &Shape) -> Result<Option<f64>> {
    let excess = |z: f64| -> Result<f64> {
        match alpha_hat(birth, death, z) {
            Ok(v) => Ok(v - 1.0),
            Err(Error::Divergence(_)) => Ok(1.0),
            Err(e) => Err(e),
        }
    };
    let mut hi = 1.0;
    while excess(hi)? >= 0.0 {
        hi = 2.0 * hi + 1.0;
        if hi > 1e6 {
            return Err(Error::numerical("fertility too large to bracket the growth rate"));
        }
    }
    let mut width = 1.0;
    let mut lo = hi - width;
    while excess(lo)? < 0.0 {
        width *= 2.0;
        lo = hi - width;
        if width > 1e6 {
            return Ok(None);
        }
    }
    bisect(excess, lo, hi, 1e-13).map(Some)
}

/// Transform check at one `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSample {
    pub z: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub beta: f64,
    /// Transform of `F`, the births from the initial individuals.
    pub initial_births: f64,
    /// Transform of the survivors among the initial individuals.
    pub initial_survivors: f64,
    /// `α̂₀ F̂/(1 − α̂) + (initial survivors)^`.
    pub predicted: f64,
    /// `α̂₀ β̂/(1 − α̂)`; equal to `predicted` only for a cohort of newborns.
    pub newborn_form: f64,
    /// Truncated transform of the time-stepped `x(t)`.
    pub numerical: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceReport {
    pub growth_rate: Option<f64>,
    pub samples: Vec<LaplaceSample>,
    pub max_residual: f64,
}

/// Compares the transform of the time-stepped `x(t)` against the renewal
/// prediction at each `z`. Nothing is inverted.
pub fn laplace_consistency(
    birth: &Shape,
    death: &Shape,
    profile: &AgeProfile,
    zs: &[f64],
    grid: &AgeGrid,
) -> Result<LaplaceReport> {
    if zs.is_empty() || zs.iter().any(|z| !(z.is_finite() && *z > 0.0)) {
        return Err(Error::domain("transform arguments must be positive and finite"));
    }
    let growth_rate = malthusian_parameter(birth, death)?;
    if let Some(r) = growth_rate {
        if let Some(z) = zs.iter().find(|&&z| z <= r) {
            return Err(Error::Divergence(format!("z = {z} is not above the growth rate {r}")));
        }
    }
    let sol = solve_time_independent_renewal(birth, death, profile, grid)?;
    let (t, x) = (&sol.curves.t, &sol.curves.x);
    let horizon = *t.last().expect("nonempty");
    let mut kinks = birth.kinks();
    kinks.extend(death.kinks());

    let mut samples = Vec::with_capacity(zs.len());
    for &z in zs {
        let alpha = alpha_hat(birth, death, z)?;
        let alpha0 = alpha0_hat(death, z)?;
        let beta = beta_hat(death, profile, z)?;
        let from_age = |u: f64, rate: &dyn Fn(f64) -> f64| {
            let shifted: Vec<f64> = kinks.iter().map(|k| k - u).collect();
            transform(|s| rate(u + s) * survival(death, u, s), z, &shifted).unwrap_or(f64::NAN)
        };
        let initial_births = profile.integrate_against(|u| from_age(u, &|a| birth.value(a)), &kinks)?;
        let initial_survivors = profile.integrate_against(|u| from_age(u, &|_| 1.0), &kinks)?;
        let predicted = alpha0 * initial_births / (1.0 - alpha) + initial_survivors;

        let damped: Vec<f64> = t.iter().zip(x).map(|(s, v)| (-z * s).exp() * v).collect();
        let numerical = *cumulative_uniform(&damped, grid.step).last().expect("nonempty");
        let rate_gap = z - growth_rate.unwrap_or(0.0).max(0.0);
        let dropped = damped.last().expect("nonempty") / rate_gap;
        if dropped > 1e-6 * numerical {
            return Err(Error::Divergence(format!(
                "transform at z = {z} is not damped by the horizon {horizon}: dropped tail ≈ {dropped:.2e}"
            )));
        }
        samples.push(LaplaceSample {
            z,
            alpha,
            alpha0,
            beta,
            initial_births,
            initial_survivors,
            predicted,
            newborn_form: alpha0 * beta / (1.0 - alpha),
            numerical,
            residual: ((numerical - predicted) / predicted).abs(),
        });
    }
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(LaplaceReport { growth_rate, samples, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::age::independent::solve_age_independent;
    use crate::rates::RatePair;

    fn constant(v: f64) -> Shape {
        Shape::constant(v).unwrap()
    }

    #[test]
    fn constant_rates_match_malthus() {
        let cohort = AgeProfile::Cohort { mass: 1.0 };
        let sol = solve_time_independent_renewal(&constant(2.0), &constant(1.0), &cohort, &AgeGrid::new(1e-3, 5.0)).unwrap();
        for (t, b) in sol.curves.t.iter().zip(&sol.birth_rate) {
            assert!((b / (2.0 * t.exp()) - 1.0).abs() < 1e-4);
        }
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let direct = solve_age_independent(&rp, &cohort, &AgeGrid::new(1e-3, 5.0)).unwrap();
        for (a, b) in sol.curves.x.iter().zip(&direct.curves.x) {
            assert!((a / b - 1.0).abs() < 1e-4);
        }
        assert!((sol.birth_rate[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn second_order_in_the_birth_stream() {
        let profile = AgeProfile::Exponential { mass: 1.0, rate: 0.8 };
        let err = |step: f64| {
            let sol = solve_time_independent_renewal(&constant(2.0), &constant(1.0), &profile, &AgeGrid::new(step, 4.0)).unwrap();
            sol.curves.t.iter().zip(&sol.birth_rate).map(|(t, b)| (b / (2.0 * t.exp()) - 1.0).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn delayed_fertility_has_no_early_births() {
        let birth = Shape::window(1.5, 1.0, 2.0).unwrap();
        let sol = solve_time_independent_renewal(&birth, &constant(0.2), &AgeProfile::Cohort { mass: 1.0 }, &AgeGrid::new(0.01, 3.0)).unwrap();
        for (t, b) in sol.curves.t.iter().zip(&sol.birth_rate) {
            if *t < 1.0 - 1e-9 {
                assert_eq!(*b, 0.0);
            }
        }
        assert!(sol.birth_rate[150] > 0.0);
    }

    #[test]
    fn boundary_and_balance() {
        let birth = Shape::gompertz(0.8, -0.3).unwrap();
        let death = Shape::gompertz(0.1, 0.2).unwrap();
        let profile = AgeProfile::Uniform { mass: 3.0, max_age: 2.0 };
        let grid = AgeGrid::new(0.005, 3.0).with_snapshots(vec![0.0, 3.0]);
        let sol = solve_time_independent_renewal(&birth, &death, &profile, &grid).unwrap();
        let b0 = profile.integrate_against(|a| birth.value(a), &[]).unwrap();
        assert!((sol.birth_rate[0] - b0).abs() < 1e-12);
        // x_d accumulated from the death stream agrees with x_b − x.
        let xd = cumulative_uniform(&sol.death_rate, grid.step);
        for (a, b) in xd.iter().zip(&sol.curves.xd) {
            assert!((a - b).abs() < 1e-4 * sol.curves.xb.last().unwrap());
        }
        assert!(sol.field.density.iter().flatten().all(|&v| v >= 0.0));
        assert!((sol.field.mass(0) - 3.0).abs() < 0.01);
        let last = sol.curves.len() - 1;
        assert!((sol.field.mass(1) / sol.curves.x[last] - 1.0).abs() < 0.01);
    }

    #[test]
    fn transforms_for_constant_rates() {
        let (b, d) = (constant(2.0), constant(1.0));
        for z in [2.0, 3.0, 5.0] {
            assert!((alpha_hat(&b, &d, z).unwrap() - 2.0 / (z + 1.0)).abs() < 1e-12);
            assert!((alpha0_hat(&d, z).unwrap() - 1.0 / (z + 1.0)).abs() < 1e-12);
        }
        assert!(alpha_hat(&b, &d, 1e4).unwrap() < 1e-3);
        assert!((malthusian_parameter(&b, &d).unwrap().unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(alpha_hat(&b, &d, -1.5), Err(Error::Divergence(_))));
        let e = AgeProfile::Exponential { mass: 1.0, rate: 3.0 };
        assert!(beta_hat(&d, &e, 1e4).unwrap() < 1e-3);
    }

    #[test]
    fn laplace_relation_holds_for_any_initial_profile() {
        let (b, d) = (constant(2.0), constant(1.0));
        let grid = AgeGrid::new(0.01, 20.0);
        let cohort = laplace_consistency(&b, &d, &AgeProfile::Cohort { mass: 1.0 }, &[2.0, 3.0, 5.0], &grid).unwrap();
        assert!(cohort.max_residual < 1e-3);
        for s in &cohort.samples {
            assert!((s.predicted - 1.0 / (s.z - 1.0)).abs() < 1e-10);
            assert!((s.newborn_form - s.predicted).abs() < 1e-10);
        }
        // Older initial individuals break the newborn form but not the relation.
        let spread = AgeProfile::Exponential { mass: 1.0, rate: 1.0 };
        let r = laplace_consistency(&b, &d, &spread, &[2.0, 3.0], &grid).unwrap();
        assert!(r.max_residual < 1e-3);
        for s in &r.samples {
            assert!((s.predicted - 1.0 / (s.z - 1.0)).abs() < 1e-9);
            assert!((s.newborn_form - 1.0 / (s.z * (s.z - 1.0))).abs() < 1e-9);
        }
        assert!(matches!(
            laplace_consistency(&b, &d, &AgeProfile::Cohort { mass: 1.0 }, &[0.9], &grid),
            Err(Error::Divergence(_))
        ));
        assert!(matches!(
            laplace_consistency(&b, &d, &AgeProfile::Cohort { mass: 1.0 }, &[1.5], &AgeGrid::new(0.01, 5.0)),
            Err(Error::Divergence(_))
        ));
    }
}
