//! Time-dependent per-capita birth and death rates.
//!
//! Every rate is positive, bounded and nonincreasing; constructors reject
//! parameters that break this. `λ⁺ = λ(0)` and `λ⁻ = lim λ(t)` bracket the
//! rate for all `t ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter record for a rate family, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateSpec {
    /// `λ(t) = level`.
    Constant { level: f64 },
    /// `λ(t) = (a t + b) / (t + 1)`.
    Homographic { a: f64, b: f64 },
    /// `λ(t) = a + (b − a) e^{−α t}`.
    ExpDecay { a: f64, b: f64, alpha: f64 },
    /// Linear interpolation between `(t, λ)` knots, constant outside them.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

/// A validated rate function. Build it from a [`RateSpec`] or one of the
/// named constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateSpec", into = "RateSpec")]
pub struct RateFunction {
    spec: RateSpec,
    /// Cumulative hazard at each knot; empty for the parametric kinds.
    knot_hazard: Vec<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl TryFrom<RateSpec> for RateFunction {
    type Error = Error;

    fn try_from(spec: RateSpec) -> Result<Self> {
        let mut knot_hazard = Vec::new();
        match &spec {
            RateSpec::Constant { level } => positive("level", *level)?,
            RateSpec::Homographic { a, b } | RateSpec::ExpDecay { a, b, .. } => {
                positive("a", *a)?;
                positive("b", *b)?;
                if b < a {
                    return Err(Error::domain(format!(
                        "rate must be nonincreasing: need b >= a, got a={a}, b={b}"
                    )));
                }
                if let RateSpec::ExpDecay { alpha, .. } = &spec {
                    positive("alpha", *alpha)?;
                }
            }
            RateSpec::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::domain("piecewise rate needs at least one knot"));
                }
                if !(knots[0].0.is_finite() && knots[0].0 >= 0.0) {
                    return Err(Error::domain("first knot time must be >= 0"));
                }
                for w in knots.windows(2) {
                    let ((t0, l0), (t1, l1)) = (w[0], w[1]);
                    if !(t1.is_finite() && t1 > t0) {
                        return Err(Error::domain(format!(
                            "knot times must be strictly increasing ({t0} then {t1})"
                        )));
                    }
                    if l1 > l0 {
                        return Err(Error::domain(format!(
                            "rate must be nonincreasing: {l0} at t={t0} rises to {l1} at t={t1}"
                        )));
                    }
                }
                for &(_, l) in knots {
                    positive("knot rate", l)?;
                }
                let (t_first, l_first) = knots[0];
                knot_hazard.push(l_first * t_first);
                for w in knots.windows(2) {
                    let ((t0, l0), (t1, l1)) = (w[0], w[1]);
                    let prev = *knot_hazard.last().expect("nonempty");
                    knot_hazard.push(prev + 0.5 * (l0 + l1) * (t1 - t0));
                }
            }
        }
        Ok(Self { spec, knot_hazard })
    }
}

impl From<RateFunction> for RateSpec {
    fn from(r: RateFunction) -> Self {
        r.spec
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::domain(format!("time must be nonnegative, got {t}")))
    } else {
        Ok(())
    }
}

impl RateFunction {
    pub fn constant(level: f64) -> Result<Self> {
        RateSpec::Constant { level }.try_into()
    }

    pub fn homographic(a: f64, b: f64) -> Result<Self> {
        RateSpec::Homographic { a, b }.try_into()
    }

    pub fn exp_decay(a: f64, b: f64, alpha: f64) -> Result<Self> {
        RateSpec::ExpDecay { a, b, alpha }.try_into()
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        RateSpec::PiecewiseLinear { knots }.try_into()
    }

    pub fn spec(&self) -> &RateSpec {
        &self.spec
    }

    /// The same family with every rate value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        positive("scale factor", factor)?;
        match &self.spec {
            RateSpec::Constant { level } => Self::constant(level * factor),
            RateSpec::Homographic { a, b } => Self::homographic(a * factor, b * factor),
            RateSpec::ExpDecay { a, b, alpha } => Self::exp_decay(a * factor, b * factor, *alpha),
            RateSpec::PiecewiseLinear { knots } => {
                Self::piecewise_linear(knots.iter().map(|&(t, l)| (t, l * factor)).collect())
            }
        }
    }

    /// `λ(t)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.rate(t))
    }

    /// `Λ(t) = ∫₀ᵗ λ(s) ds`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.hazard(t))
    }

    /// `λ(t)` without the domain check; `t` must be nonnegative.
    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        match &self.spec {
            RateSpec::Constant { level } => *level,
            RateSpec::Homographic { a, b } => (a * t + b) / (t + 1.0),
            RateSpec::ExpDecay { a, b, alpha } => a + (b - a) * (-alpha * t).exp(),
            RateSpec::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|&(tk, _)| tk <= t);
                if i == 0 {
                    knots[0].1
                } else if i == knots.len() {
                    knots[i - 1].1
                } else {
                    let ((t0, l0), (t1, l1)) = (knots[i - 1], knots[i]);
                    l0 + (l1 - l0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// `Λ(t)` without the domain check; `t` must be nonnegative.
    #[inline]
    pub fn hazard(&self, t: f64) -> f64 {
        match &self.spec {
            RateSpec::Constant { level } => level * t,
            RateSpec::Homographic { a, b } => a * t + (b - a) * t.ln_1p(),
            RateSpec::ExpDecay { a, b, alpha } => a * t - (b - a) * (-alpha * t).exp_m1() / alpha,
            RateSpec::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|&(tk, _)| tk <= t);
                if i == 0 {
                    knots[0].1 * t
                } else {
                    let (t0, l0) = knots[i - 1];
                    let l_t = self.rate(t);
                    self.knot_hazard[i - 1] + 0.5 * (l0 + l_t) * (t - t0)
                }
            }
        }
    }

    /// `λ⁺ = λ(0)`.
    pub fn upper_bound(&self) -> f64 {
        self.rate(0.0)
    }

    /// `λ⁻ = lim_{t→∞} λ(t)`.
    pub fn tail_limit(&self) -> f64 {
        match &self.spec {
            RateSpec::Constant { level } => *level,
            RateSpec::Homographic { a, .. } | RateSpec::ExpDecay { a, .. } => *a,
            RateSpec::PiecewiseLinear { knots } => knots[knots.len() - 1].1,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.upper_bound() == self.tail_limit()
    }

    /// Points where the rate has a kink, for splitting quadrature panels.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.spec {
            RateSpec::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            _ => Vec::new(),
        }
    }
}

/// Long-run balance of births against deaths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

/// Birth rate `λ_b` and death rate `λ_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub birth: RateFunction,
    pub death: RateFunction,
}

impl RatePair {
    pub fn new(birth: RateFunction, death: RateFunction) -> Self {
        Self { birth, death }
    }

    pub fn constant(birth: f64, death: f64) -> Result<Self> {
        Ok(Self::new(RateFunction::constant(birth)?, RateFunction::constant(death)?))
    }

    /// `λ_d = ρ λ_b`.
    pub fn proportional(birth: RateFunction, rho: f64) -> Result<Self> {
        let death = birth.scaled(rho)?;
        Ok(Self::new(birth, death))
    }

    pub fn regime(&self) -> Regime {
        let (b, d) = (self.birth.tail_limit(), self.death.tail_limit());
        if b > d {
            Regime::Supercritical
        } else if b == d {
            Regime::Critical
        } else {
            Regime::Subcritical
        }
    }

    /// `ρ = λ_d⁻ / λ_b⁻`.
    pub fn rho(&self) -> f64 {
        self.death.tail_limit() / self.birth.tail_limit()
    }

    /// Net cumulative rate `Λ(t) = Λ_b(t) − Λ_d(t)`.
    #[inline]
    pub fn net_hazard(&self, t: f64) -> f64 {
        self.birth.hazard(t) - self.death.hazard(t)
    }

    /// Upper envelope `λ_b⁺ + λ_d⁺` of the total event rate per individual.
    pub fn envelope(&self) -> f64 {
        self.birth.upper_bound() + self.death.upper_bound()
    }

    pub fn is_constant(&self) -> bool {
        self.birth.is_constant() && self.death.is_constant()
    }

    /// Union of both rates' kinks, sorted.
    pub fn kinks(&self) -> Vec<f64> {
        let mut k = self.birth.kinks();
        k.extend(self.death.kinks());
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn require_supercritical(&self) -> Result<()> {
        match self.regime() {
            Regime::Supercritical => Ok(()),
            r => Err(Error::regime(format!(
                "needs a supercritical pair, got {r:?} (λ_b⁻={}, λ_d⁻={})",
                self.birth.tail_limit(),
                self.death.tail_limit()
            ))),
        }
    }
}
