//! Mean-field population curves: living `x`, ever born `x_b` and ever dead
//! `x_d`, plus the crossover time where `x_d` overtakes `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, integrate_segments, rk4_integrate, Tolerance};
use crate::rates::{RatePair, Regime};

/// Tolerance for the `x_b`, `x_d` integrals. The absolute part is applied to
/// integrals normalised by `x(0)`.
pub const CURVE_TOLERANCE: Tolerance = Tolerance::new(1e-12, 1e-13);

/// Mean curves sampled on a time grid. `x = xb − xd` pointwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationCurves {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xb: Vec<f64>,
    pub xd: Vec<f64>,
    pub x0: f64,
}

impl PopulationCurves {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Checks that a time grid is nonempty, finite, nonnegative and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("time grid is empty"));
    }
    if !(grid[0].is_finite() && grid[0] >= 0.0) {
        return Err(Error::domain(format!("grid must start at t >= 0, got {}", grid[0])));
    }
    for w in grid.windows(2) {
        if !(w[1].is_finite() && w[1] > w[0]) {
            return Err(Error::domain(format!(
                "grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// `n + 1` equispaced points on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// Closed-form curves for constant rates, including the critical case
/// `lb == ld` where `x` stays flat and `x_b`, `x_d` grow linearly.
pub fn solve_constant(lb: f64, ld: f64, x0: f64, grid: &[f64]) -> Result<PopulationCurves> {
    positive("birth rate", lb)?;
    positive("death rate", ld)?;
    positive("x0", x0)?;
    validate_grid(grid)?;
    let lambda = lb - ld;
    // (e^{λt} − 1)/λ, continuous through λ = 0.
    let growth = |t: f64| if lambda == 0.0 { t } else { (lambda * t).exp_m1() / lambda };
    let mut c = PopulationCurves {
        t: grid.to_vec(),
        x: Vec::with_capacity(grid.len()),
        xb: Vec::with_capacity(grid.len()),
        xd: Vec::with_capacity(grid.len()),
        x0,
    };
    for &t in grid {
        let g = growth(t);
        c.x.push(x0 * (lambda * t).exp());
        c.xb.push(x0 * (1.0 + lb * g));
        c.xd.push(x0 * ld * g);
    }
    Ok(c)
}

/// Splits `[a, b]` at the rate kinks strictly inside it.
fn breaks(kinks: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut v = vec![a];
    v.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
    v.push(b);
    v
}

/// Curves for time-dependent rates: `x = x0 e^Λ`, with `x_b` and `x_d` from
/// quadrature of `λ_b e^Λ` and `λ_d e^Λ`.
pub fn solve_time_dependent(rp: &RatePair, x0: f64, grid: &[f64]) -> Result<PopulationCurves> {
    positive("x0", x0)?;
    validate_grid(grid)?;
    let kinks = rp.kinks();
    let mut c = PopulationCurves {
        t: grid.to_vec(),
        x: Vec::with_capacity(grid.len()),
        xb: Vec::with_capacity(grid.len()),
        xd: Vec::with_capacity(grid.len()),
        x0,
    };
    let (mut ib, mut id, mut prev) = (0.0, 0.0, 0.0);
    for &t in grid {
        let seg = breaks(&kinks, prev, t);
        ib += integrate_segments(|s| rp.birth.rate(s) * rp.net_hazard(s).exp(), &seg, CURVE_TOLERANCE)?;
        id += integrate_segments(|s| rp.death.rate(s) * rp.net_hazard(s).exp(), &seg, CURVE_TOLERANCE)?;
        prev = t;
        c.x.push(x0 * rp.net_hazard(t).exp());
        c.xb.push(x0 * (1.0 + ib));
        c.xd.push(x0 * id);
    }
    Ok(c)
}

/// `x_d(t)/x(t) − 1`, evaluated without forming `e^Λ` so that it cannot overflow.
pub fn dead_to_living_gap(rp: &RatePair, t: f64) -> Result<f64> {
    let lt = rp.net_hazard(t);
    let seg = breaks(&rp.kinks(), 0.0, t);
    let r = integrate_segments(|s| rp.death.rate(s) * (rp.net_hazard(s) - lt).exp(), &seg, CURVE_TOLERANCE)?;
    Ok(r - 1.0)
}

/// Search settings for [`crossover_time`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverOptions {
    /// Upper limit of the bracket search; `None` picks `10/|λ_b⁻ − λ_d⁻|`.
    pub max_horizon: Option<f64>,
    /// Absolute tolerance on `t*`.
    pub time_tol: f64,
}

impl Default for CrossoverOptions {
    fn default() -> Self {
        Self { max_horizon: None, time_tol: 1e-9 }
    }
}

/// Closed-form `t* = −ln(2 − λ_b/λ_d)/(λ_b − λ_d)`; `None` when `λ_b ≥ 2λ_d`.
pub fn crossover_constant(lb: f64, ld: f64) -> Result<Option<f64>> {
    positive("birth rate", lb)?;
    positive("death rate", ld)?;
    if lb <= ld {
        return Err(Error::regime(format!(
            "closed-form crossover needs lb > ld, got lb={lb}, ld={ld}"
        )));
    }
    if lb >= 2.0 * ld {
        return Ok(None);
    }
    Ok(Some(-(2.0 - lb / ld).ln() / (lb - ld)))
}

/// First time the mean ever-dead count equals the mean living count.
///
/// The answer does not depend on `x(0)`. Constant pairs use the closed form;
/// otherwise the bracket `[0, T]` is doubled from `T = 1/λ⁺` until
/// `x_d − x` changes sign and the root is bisected.
pub fn crossover_time(rp: &RatePair, opts: &CrossoverOptions) -> Result<Option<f64>> {
    rp.require_supercritical()?;
    if rp.is_constant() {
        return crossover_constant(rp.birth.tail_limit(), rp.death.tail_limit());
    }
    let horizon = opts
        .max_horizon
        .unwrap_or(10.0 / (rp.birth.tail_limit() - rp.death.tail_limit()));
    let mut hi = 1.0 / rp.envelope();
    let mut lo = 0.0;
    loop {
        if dead_to_living_gap(rp, hi)? > 0.0 {
            break;
        }
        if hi >= horizon {
            return Ok(None);
        }
        lo = hi;
        hi = (2.0 * hi).min(horizon);
    }
    bisect(|t| dead_to_living_gap(rp, t), lo, hi, opts.time_tol).map(Some)
}

/// Long-run `(x_b/x, x_d/x) = (λ_b⁻, λ_d⁻)/(λ_b⁻ − λ_d⁻)`.
pub fn asymptotic_ratios(rp: &RatePair) -> Result<(f64, f64)> {
    if rp.regime() == Regime::Critical {
        return Err(Error::regime("asymptotic ratios diverge for a critical pair"));
    }
    let (b, d) = (rp.birth.tail_limit(), rp.death.tail_limit());
    Ok((b / (b - d), d / (b - d)))
}

/// Census data observed at a terminal time `t_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalCensus {
    pub t_f: f64,
    pub x0: f64,
    pub x_tf: f64,
    pub xb_tf: f64,
}

/// Constant rates recovered from a [`TerminalCensus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferredRates {
    pub lambda: f64,
    pub lambda_b: f64,
    pub lambda_d: f64,
    pub t_star: Option<f64>,
    /// `λ_b/λ = x_b(t_f)/x(t_f)`, kept exact.
    #[serde(skip)]
    pub born_ratio: f64,
    /// `λ_d/λ = x_b(t_f)/x(t_f) − 1`.
    #[serde(skip)]
    pub dead_ratio: f64,
}

pub fn infer_from_terminal(c: &TerminalCensus) -> Result<InferredRates> {
    for (name, v) in [("t_f", c.t_f), ("x0", c.x0), ("x_tf", c.x_tf), ("xb_tf", c.xb_tf)] {
        positive(name, v)?;
    }
    if c.xb_tf <= c.x_tf {
        return Err(Error::domain("ever-born total must exceed the living count"));
    }
    if c.x_tf <= c.x0 {
        return Err(Error::domain("inference assumes growth: x(t_f) must exceed x(0)"));
    }
    let lambda = (c.x_tf / c.x0).ln() / c.t_f;
    let born_ratio = c.xb_tf / c.x_tf;
    let dead_ratio = born_ratio - 1.0;
    let lambda_b = lambda * born_ratio;
    let lambda_d = lambda_b - lambda;
    // λ_b < 2λ_d ⇔ x_b/x > 2; computed from the ratio so the boundary is exact.
    let t_star = if born_ratio > 2.0 {
        Some(-(2.0 - born_ratio / dead_ratio).ln() / lambda)
    } else {
        None
    };
    Ok(InferredRates { lambda, lambda_b, lambda_d, t_star, born_ratio, dead_ratio })
}

/// Spectral data of the mean matrix `B(t) = [[λ_b, −λ_b], [λ_d, −λ_d]]`
/// acting on `(x_b, x_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMatrixSpectrum {
    pub t: f64,
    /// `(0, λ_b(t) − λ_d(t))`.
    pub eigenvalues: (f64, f64),
    /// `e^{−Λ(t)} X(t)` with `Ẋ = B X`, `X(0) = I`, row-major.
    pub scaled: [[f64; 2]; 2],
}

/// Integrates the scaled propagator `Y = e^{−Λ}X`, which solves
/// `Ẏ = (B − λ I) Y`, with RK4 at step `10⁻³/λ⁺`.
pub fn mean_matrix_spectrum(rp: &RatePair, t: f64) -> Result<MeanMatrixSpectrum> {
    rp.require_supercritical()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let f = |s: f64, y: [f64; 4]| {
        let (b, d) = (rp.birth.rate(s), rp.death.rate(s));
        let l = b - d;
        // y = [y00, y01, y10, y11]
        [
            b * (y[0] - y[2]) - l * y[0],
            b * (y[1] - y[3]) - l * y[1],
            d * (y[0] - y[2]) - l * y[2],
            d * (y[1] - y[3]) - l * y[3],
        ]
    };
    let h = 1e-3 / rp.birth.upper_bound().max(rp.death.upper_bound());
    let y = rk4_integrate(&f, 0.0, [1.0, 0.0, 0.0, 1.0], t, h);
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::numerical(format!("mean-matrix integration blew up before t={t}")));
    }
    Ok(MeanMatrixSpectrum {
        t,
        eigenvalues: (0.0, rp.birth.rate(t) - rp.death.rate(t)),
        scaled: [[y[0], y[1]], [y[2], y[3]]],
    })
}
