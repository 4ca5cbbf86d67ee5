//! Rates that depend on age, time or both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_segments, Tolerance};
use crate::rates::RateFunction;

/// A nonnegative function of one variable, used for age profiles of
/// fertility and mortality and for time modulation factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Constant { value: f64 },
    /// `initial · e^{growth · x}`.
    Gompertz { initial: f64, growth: f64 },
    /// `value` on `[start, end)`, zero elsewhere.
    Window { value: f64, start: f64, end: f64 },
    /// Linear interpolation between `(x, y)` knots, constant outside them.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeSpec", into = "ShapeSpec")]
pub struct Shape {
    spec: ShapeSpec,
    /// Running integral at each knot; empty for the parametric kinds.
    knot_integral: Vec<f64>,
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

impl TryFrom<ShapeSpec> for Shape {
    type Error = Error;

    fn try_from(spec: ShapeSpec) -> Result<Self> {
        let mut knot_integral = Vec::new();
        match &spec {
            ShapeSpec::Constant { value } => nonnegative("value", *value)?,
            ShapeSpec::Gompertz { initial, growth } => {
                nonnegative("initial", *initial)?;
                if !growth.is_finite() {
                    return Err(Error::domain("Gompertz growth must be finite"));
                }
            }
            ShapeSpec::Window { value, start, end } => {
                nonnegative("value", *value)?;
                nonnegative("start", *start)?;
                if !(end.is_finite() && end > start) {
                    return Err(Error::domain(format!("window needs start < end, got [{start}, {end})")));
                }
            }
            ShapeSpec::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::domain("piecewise shape needs at least one knot"));
                }
                nonnegative("first knot", knots[0].0)?;
                for w in knots.windows(2) {
                    if !(w[1].0.is_finite() && w[1].0 > w[0].0) {
                        return Err(Error::domain("knot abscissae must be strictly increasing"));
                    }
                }
                for &(_, y) in knots {
                    nonnegative("knot value", y)?;
                }
                knot_integral.push(knots[0].1 * knots[0].0);
                for w in knots.windows(2) {
                    let prev = *knot_integral.last().expect("nonempty");
                    knot_integral.push(prev + 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0));
                }
            }
        }
        Ok(Self { spec, knot_integral })
    }
}

impl From<Shape> for ShapeSpec {
    fn from(s: Shape) -> Self {
        s.spec
    }
}

impl Shape {
    pub fn constant(value: f64) -> Result<Self> {
        ShapeSpec::Constant { value }.try_into()
    }

    pub fn gompertz(initial: f64, growth: f64) -> Result<Self> {
        ShapeSpec::Gompertz { initial, growth }.try_into()
    }

    pub fn window(value: f64, start: f64, end: f64) -> Result<Self> {
        ShapeSpec::Window { value, start, end }.try_into()
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        ShapeSpec::PiecewiseLinear { knots }.try_into()
    }

    pub fn spec(&self) -> &ShapeSpec {
        &self.spec
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.spec {
            ShapeSpec::Constant { value } => *value,
            ShapeSpec::Gompertz { initial, growth } => initial * (growth * x).exp(),
            ShapeSpec::Window { value, start, end } => {
                if x >= *start && x < *end {
                    *value
                } else {
                    0.0
                }
            }
            ShapeSpec::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= x);
                if i == 0 {
                    knots[0].1
                } else if i == knots.len() {
                    knots[i - 1].1
                } else {
                    let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
                    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                }
            }
        }
    }

    /// `∫_0^x` of the shape, for `x ≥ 0`.
    pub fn integral(&self, x: f64) -> f64 {
        match &self.spec {
            ShapeSpec::Constant { value } => value * x,
            ShapeSpec::Gompertz { initial, growth } => {
                if growth.abs() * x < 1e-8 {
                    initial * x * (1.0 + 0.5 * growth * x)
                } else {
                    initial * (growth * x).exp_m1() / growth
                }
            }
            ShapeSpec::Window { value, start, end } => value * (x.min(*end) - start).max(0.0),
            ShapeSpec::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= x);
                if i == 0 {
                    knots[0].1 * x
                } else if i == knots.len() {
                    self.knot_integral[i - 1] + knots[i - 1].1 * (x - knots[i - 1].0)
                } else {
                    let ((x0, y0), (x1, y1)) = (knots[i - 1], knots[i]);
                    let y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
                    self.knot_integral[i - 1] + 0.5 * (y0 + y) * (x - x0)
                }
            }
        }
    }

    /// Points where the shape is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.spec {
            ShapeSpec::Window { start, end, .. } => vec![*start, *end],
            ShapeSpec::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.spec, ShapeSpec::Constant { .. })
    }
}

/// `λ(a, t)` for an individual of age `a` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeTimeRate {
    AgeIndependent { rate: RateFunction },
    TimeIndependent { rate: Shape },
    /// `age(a) · time(t)`.
    Separable { age: Shape, time: Shape },
    /// Bilinear interpolation of `values[i][j]` at `(ages[i], times[j])`,
    /// clamped outside the table.
    Tabulated {
        ages: Vec<f64>,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

fn bracket(xs: &[f64], x: f64) -> (usize, usize, f64) {
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        (0, 0, 0.0)
    } else if i == xs.len() {
        (i - 1, i - 1, 0.0)
    } else {
        (i - 1, i, (x - xs[i - 1]) / (xs[i] - xs[i - 1]))
    }
}

impl AgeTimeRate {
    pub fn age_independent(rate: RateFunction) -> Self {
        Self::AgeIndependent { rate }
    }

    pub fn time_independent(rate: Shape) -> Self {
        Self::TimeIndependent { rate }
    }

    pub fn separable(age: Shape, time: Shape) -> Self {
        Self::Separable { age, time }
    }

    pub fn tabulated(ages: Vec<f64>, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let r = Self::Tabulated { ages, times, values };
        r.validate()?;
        Ok(r)
    }

    /// Checks the table layout; the other kinds are validated on construction.
    pub fn validate(&self) -> Result<()> {
        if let Self::Tabulated { ages, times, values } = self {
            for (name, xs) in [("ages", ages), ("times", times)] {
                if xs.is_empty() || xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain(format!("tabulated {name} must be finite and strictly increasing")));
                }
            }
            if values.len() != ages.len() || values.iter().any(|row| row.len() != times.len()) {
                return Err(Error::domain("tabulated values must be ages.len() rows of times.len() entries"));
            }
            if values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::domain("tabulated rates must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    pub fn value(&self, a: f64, t: f64) -> f64 {
        match self {
            Self::AgeIndependent { rate } => rate.rate(t),
            Self::TimeIndependent { rate } => rate.value(a),
            Self::Separable { age, time } => age.value(a) * time.value(t),
            Self::Tabulated { ages, times, values } => {
                let (i0, i1, u) = bracket(ages, a);
                let (j0, j1, v) = bracket(times, t);
                let row = |i: usize| values[i][j0] * (1.0 - v) + values[i][j1] * v;
                row(i0) * (1.0 - u) + row(i1) * u
            }
        }
    }

    /// Ages at which `λ(·, t)` may not be smooth, for any `t`.
    pub fn age_kinks(&self) -> Vec<f64> {
        match self {
            Self::AgeIndependent { .. } => Vec::new(),
            Self::TimeIndependent { rate } => rate.kinks(),
            Self::Separable { age, .. } => age.kinks(),
            Self::Tabulated { ages, .. } => ages.clone(),
        }
    }

    /// Times at which `λ(a, ·)` may not be smooth, for any `a`.
    pub fn time_kinks(&self) -> Vec<f64> {
        match self {
            Self::AgeIndependent { rate } => rate.kinks(),
            Self::TimeIndependent { .. } => Vec::new(),
            Self::Separable { time, .. } => time.kinks(),
            Self::Tabulated { times, .. } => times.clone(),
        }
    }
}

/// `Λ̄(a, t) = ∫_0^{a∧t} λ(a − s, t − s) ds`, the hazard accumulated along the
/// characteristic that ends at `(a, t)`.
pub fn cumulative_hazard_characteristic(rate: &AgeTimeRate, a: f64, t: f64) -> Result<f64> {
    if !(a >= 0.0 && t >= 0.0 && a.is_finite() && t.is_finite()) {
        return Err(Error::domain(format!("age and time must be finite and nonnegative, got ({a}, {t})")));
    }
    let m = a.min(t);
    match rate {
        AgeTimeRate::AgeIndependent { rate } => Ok(rate.hazard(t) - rate.hazard(t - m)),
        AgeTimeRate::TimeIndependent { rate } => Ok(rate.integral(a) - rate.integral(a - m)),
        _ => {
            let mut breaks = vec![0.0, m];
            breaks.extend(rate.age_kinks().into_iter().map(|k| a - k));
            breaks.extend(rate.time_kinks().into_iter().map(|k| t - k));
            breaks.retain(|&s| (0.0..=m).contains(&s));
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            integrate_segments(|s| rate.value(a - s, t - s), &breaks, Tolerance::new(1e-13, 1e-13))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        integrate(f, a, b, Tolerance::new(1e-14, 1e-14)).unwrap()
    }

    #[test]
    fn shape_integrals_match_quadrature() {
        let shapes = [
            Shape::constant(0.7).unwrap(),
            Shape::gompertz(0.01, 0.09).unwrap(),
            Shape::gompertz(0.5, -1e-10).unwrap(),
            Shape::piecewise_linear(vec![(1.0, 0.2), (2.5, 1.0), (4.0, 0.4)]).unwrap(),
        ];
        for s in &shapes {
            for x in [0.0, 0.5, 1.7, 3.0, 6.0] {
                let q = quad(|u| s.value(u), 0.0, x);
                assert!((s.integral(x) - q).abs() < 1e-12, "{:?} at {x}", s.spec());
            }
        }
        let w = Shape::window(2.0, 1.0, 3.0).unwrap();
        assert_eq!([w.integral(0.5), w.integral(2.0), w.integral(9.0)], [0.0, 2.0, 4.0]);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(Shape::constant(-1.0).is_err());
        assert!(Shape::window(1.0, 2.0, 2.0).is_err());
        assert!(Shape::piecewise_linear(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(AgeTimeRate::tabulated(vec![0.0, 1.0], vec![0.0], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn characteristic_hazard_for_constant_rate() {
        let r = AgeTimeRate::time_independent(Shape::constant(0.3).unwrap());
        for (a, t) in [(1.0, 4.0), (4.0, 1.0), (2.0, 2.0)] {
            let v = cumulative_hazard_characteristic(&r, a, t).unwrap();
            assert!((v - 0.3 * f64::min(a, t)).abs() < 1e-15);
        }
    }

    #[test]
    fn characteristic_hazard_closed_forms_match_quadrature() {
        let ai = AgeTimeRate::age_independent(RateFunction::homographic(0.4, 1.2).unwrap());
        let ti = AgeTimeRate::time_independent(Shape::gompertz(0.02, 0.1).unwrap());
        for (r, a, t) in [(&ai, 1.5_f64, 4.0), (&ai, 4.0, 1.5), (&ti, 5.0, 2.0), (&ti, 2.0, 5.0)] {
            let q = quad(|s| r.value(a - s, t - s), 0.0, a.min(t));
            assert!((cumulative_hazard_characteristic(r, a, t).unwrap() - q).abs() < 1e-12);
        }
        let sep = AgeTimeRate::separable(Shape::gompertz(0.02, 0.1).unwrap(), Shape::window(2.0, 1.0, 3.0).unwrap());
        let q = quad(|s| 0.02 * (0.1 * (5.0 - s)).exp() * 2.0, 1.0, 3.0);
        assert!((cumulative_hazard_characteristic(&sep, 5.0, 4.0).unwrap() - q).abs() < 1e-12);
        assert!(cumulative_hazard_characteristic(&sep, -1.0, 4.0).is_err());
    }

    #[test]
    fn tabulated_is_bilinear_and_clamped() {
        let r = AgeTimeRate::tabulated(vec![0.0, 2.0], vec![0.0, 1.0], vec![vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert!((r.value(1.0, 0.5) - 1.5).abs() < 1e-15);
        assert_eq!(r.value(5.0, 7.0), 3.0);
    }

    #[test]
    fn serde_round_trip() {
        let r = AgeTimeRate::separable(Shape::window(1.5, 1.0, 3.0).unwrap(), Shape::constant(1.0).unwrap());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<AgeTimeRate>(&json).unwrap(), r);
        let bad = r#"{"kind":"time_independent","rate":{"kind":"constant","value":-2.0}}"#;
        assert!(serde_json::from_str::<AgeTimeRate>(bad).is_err());
    }
}
