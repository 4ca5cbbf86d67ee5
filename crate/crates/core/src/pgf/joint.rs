//! Joint pgf `Φ_t(z_b, z_d) = E z_b^{N_b(t)} z_d^{N_d(t)}` through the ordered
//! exponential of a trace-free 2×2 generator.
//!
//! With `ζ = √(z_b z_d)`, `ξ = z_b/ζ`, `α = λ_b ζ`, `β = −(λ_b + λ_d)` and
//! `γ = λ_d ζ`, the columns `(a, b)` and `(c, d)` of `X` solve
//! `Ẋ = [[β/2, −α], [γ, −β/2]] X` from the identity and
//! `Φ_t = φ₀(ζ (aξ + b)/(cξ + d))`.
//!
//! `a` and `d` are even in `ζ` while `b` and `c` are odd, so the solver
//! integrates `b̂ = b/ζ` and `ĉ = c/ζ`, whose equations involve only
//! `w = ζ² = z_b z_d`. The argument becomes `(a z_b + w b̂)/(ĉ z_b + d)`, free
//! of square-root branches.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::homographic::HomographicMap;
use super::marginal::DISK_SLACK;
use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use crate::rates::RatePair;
use crate::stochastic::InitialLaw;

type C = Complex64;

/// Steps between determinant renormalisations.
const RENORM_EVERY: usize = 100;
/// Renormalise only while `|a d| + |w b̂ ĉ|` stays below this, since beyond it
/// the rounding carried by the entries dominates the determinant.
const RENORM_CONDITION: f64 = 1e6;
/// Largest tolerated `|det − 1|` on a well-conditioned map.
const DET_FAILURE: f64 = 1e-6;

/// Scaled propagator `[a, b̂, ĉ, d]` for one value of `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledPropagator {
    pub w: C,
    pub a: C,
    pub bh: C,
    pub ch: C,
    pub d: C,
    /// Largest `|det − 1|` seen while the map was well conditioned.
    pub det_drift: f64,
    /// `|a d| + |w b̂ ĉ|`, the scale of the cancellation in `det`.
    pub condition: f64,
}

impl ScaledPropagator {
    pub fn det(&self) -> C {
        self.a * self.d - self.w * self.bh * self.ch
    }

    /// Argument of `φ₀` at `z_b` (with `z_d = w/z_b`).
    pub fn argument(&self, zb: C) -> C {
        (self.a * zb + self.w * self.bh) / (self.ch * zb + self.d)
    }

    /// Unscaled map for the square root `zeta` of `w`.
    pub fn map(&self, zeta: C) -> HomographicMap {
        HomographicMap::new(self.a, zeta * self.bh, zeta * self.ch, self.d)
    }
}

fn two_prod(a: f64, b: f64) -> [f64; 2] {
    let p = a * b;
    [p, a.mul_add(b, -p)]
}

fn two_sum(a: f64, b: f64) -> [f64; 2] {
    let s = a + b;
    let bb = s - a;
    [s, (a - (s - bb)) + (b - bb)]
}

/// Neumaier-compensated sum.
fn sum(terms: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &x in terms {
        let [t, e] = two_sum(s, x);
        s = t;
        c += e;
    }
    s + c
}

/// `a d − w b̂ ĉ` with every product carried exactly, so the result is
/// accurate even when the two products nearly cancel.
fn det_compensated(y: &[C; 4], w: C) -> C {
    let [a, bh, ch, d] = *y;
    // u = w b̂ as an unevaluated sum hi + lo per component.
    let split = |p: [f64; 2], q: [f64; 2]| {
        let [h, e] = two_sum(p[0], q[0]);
        [h, e + p[1] + q[1]]
    };
    let ur = split(two_prod(w.re, bh.re), two_prod(-w.im, bh.im));
    let ui = split(two_prod(w.re, bh.im), two_prod(w.im, bh.re));
    let mut re = Vec::with_capacity(16);
    let mut im = Vec::with_capacity(16);
    re.extend(two_prod(a.re, d.re));
    re.extend(two_prod(-a.im, d.im));
    im.extend(two_prod(a.re, d.im));
    im.extend(two_prod(a.im, d.re));
    for (u, sign) in [(ur[0], 1.0), (ur[1], 1.0)] {
        re.extend(two_prod(-sign * u, ch.re));
        im.extend(two_prod(-sign * u, ch.im));
    }
    for u in ui {
        re.extend(two_prod(u, ch.im));
        im.extend(two_prod(-u, ch.re));
    }
    C::new(sum(&re), sum(&im))
}

fn condition(y: &[C; 4], w: C) -> f64 {
    (y[0] * y[3]).norm() + (w * y[1] * y[2]).norm()
}

/// Integrates the scaled system from the identity to `t` with RK4 at step
/// `10⁻³/λ⁺`.
pub fn propagate(rp: &RatePair, w: C, t: f64) -> Result<ScaledPropagator> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let f = |s: f64, y: [C; 4]| {
        let (lb, ld) = (rp.birth.rate(s), rp.death.rate(s));
        let hb = -0.5 * (lb + ld);
        let [a, bh, ch, d] = y;
        [
            hb * a - lb * w * bh,
            ld * a - hb * bh,
            hb * ch - lb * d,
            ld * w * ch - hb * d,
        ]
    };
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    let mut y = [one, zero, zero, one];
    let h_max = 1e-3 / rp.birth.upper_bound().max(rp.death.upper_bound());
    let n = (t / h_max).ceil() as usize;
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    let mut drift: f64 = 0.0;
    for i in 0..n {
        y = rk4_step(&f, i as f64 * h, y, h);
        if (i + 1) % RENORM_EVERY == 0 || i + 1 == n {
            let cond = condition(&y, w);
            if cond <= RENORM_CONDITION {
                let det = det_compensated(&y, w);
                drift = drift.max((det - 1.0).norm());
                let s = det.sqrt();
                for v in &mut y {
                    *v /= s;
                }
            }
        }
    }
    if !y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::numerical(format!("joint pgf propagator overflowed for w={w}")));
    }
    if drift > DET_FAILURE {
        return Err(Error::numerical(format!("determinant drifted by {drift:.3e} for w={w}")));
    }
    Ok(ScaledPropagator {
        w,
        a: y[0],
        bh: y[1],
        ch: y[2],
        d: y[3],
        det_drift: drift,
        condition: condition(&y, w),
    })
}

fn check_disk(name: &str, z: C) -> Result<()> {
    if z.norm() > 1.0 + DISK_SLACK {
        Err(Error::domain(format!("|{name}| = {} exceeds 1", z.norm())))
    } else {
        Ok(())
    }
}

/// `Φ_t(z_b, z_d)` on the closed unit bidisk, for any rate pair.
pub fn joint_pgf_general(rp: &RatePair, law: &InitialLaw, t: f64, zb: C, zd: C) -> Result<C> {
    check_disk("z_b", zb)?;
    check_disk("z_d", zd)?;
    joint_pgf_unchecked(rp, law, t, zb, zd)
}

/// As [`joint_pgf_general`] without the disk check. The pgf series converges
/// slightly outside the disk, which finite differences rely on.
pub(crate) fn joint_pgf_unchecked(rp: &RatePair, law: &InitialLaw, t: f64, zb: C, zd: C) -> Result<C> {
    let p = propagate(rp, zb * zd, t)?;
    Ok(law.pgf(p.argument(zb)))
}

/// Reconstructs `Φ` from the unscaled map with explicit roots `ζ` and `ξ`.
/// Only pairs with `ζ ξ = z_b` give the pgf; flipping both signs together
/// leaves the value unchanged.
pub fn joint_pgf_from_roots(p: &ScaledPropagator, law: &InitialLaw, zeta: C, xi: C) -> C {
    let m = p.map(zeta);
    law.pgf(zeta * m.apply(xi))
}

/// Per-`ζ` convergence diagnostics of the propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaDiagnostics {
    pub zeta: C,
    pub map: HomographicMap,
    pub det_drift: f64,
    /// Positive eigenvalue `μ₊ = √(β²/4 − αγ)` of the generator at `t`.
    pub mu_plus: C,
    pub ratio_ac: C,
    pub ratio_bd: C,
    /// Sine of the angle between the columns of `X(t)`.
    pub column_sine: f64,
    /// `−d/dt ln(column sine)` measured over `[t/2, t]`.
    pub alignment_rate: f64,
}

/// Propagators on `M_ζ` equispaced points of the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPgfGrid {
    pub t: f64,
    pub zetas: Vec<ZetaDiagnostics>,
    #[serde(skip)]
    propagators: Vec<ScaledPropagator>,
}

impl JointPgfGrid {
    pub fn max_det_drift(&self) -> f64 {
        self.zetas.iter().map(|z| z.det_drift).fold(0.0, f64::max)
    }

    /// `Φ_t(z_b, ζ_k²/z_b)`.
    pub fn value(&self, k: usize, law: &InitialLaw, zb: C) -> C {
        law.pgf(self.propagators[k].argument(zb))
    }
}

fn column_sine(m: &HomographicMap) -> f64 {
    let u = (m.a.norm_sqr() + m.b.norm_sqr()).sqrt();
    let v = (m.c.norm_sqr() + m.d.norm_sqr()).sqrt();
    m.det().norm() / (u * v)
}

pub fn joint_pgf_grid(rp: &RatePair, t: f64, m_zeta: usize) -> Result<JointPgfGrid> {
    use rayon::prelude::*;
    if m_zeta == 0 || m_zeta % 2 == 1 {
        return Err(Error::domain(format!("M_ζ must be even and positive, got {m_zeta}")));
    }
    let rows: Vec<(ZetaDiagnostics, ScaledPropagator)> = (0..m_zeta)
        .into_par_iter()
        .map(|k| {
            let zeta = C::from_polar(1.0, std::f64::consts::TAU * k as f64 / m_zeta as f64);
            let w = zeta * zeta;
            let p = propagate(rp, w, t)?;
            let half = propagate(rp, w, 0.5 * t)?;
            let m = p.map(zeta);
            let (lb, ld) = (rp.birth.rate(t), rp.death.rate(t));
            let mu_plus = (0.25 * (lb + ld).powi(2) - lb * ld * w).sqrt();
            let (s1, s2) = (column_sine(&half.map(zeta)), column_sine(&m));
            let alignment_rate = if t > 0.0 { (s1 / s2).ln() / (0.5 * t) } else { 0.0 };
            Ok((
                ZetaDiagnostics {
                    zeta,
                    map: m,
                    det_drift: p.det_drift,
                    mu_plus,
                    ratio_ac: m.a / m.c,
                    ratio_bd: m.b / m.d,
                    column_sine: s2,
                    alignment_rate,
                },
                p,
            ))
        })
        .collect::<Result<_>>()?;
    let (zetas, propagators) = rows.into_iter().unzip();
    Ok(JointPgfGrid { t, zetas, propagators })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::solve_time_dependent;
    use crate::pgf::marginal::marginal_pgf;
    use crate::rates::RateFunction;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn rp() -> RatePair {
        RatePair::new(
            RateFunction::homographic(1.5, 2.5).unwrap(),
            RateFunction::exp_decay(0.6, 1.2, 0.8).unwrap(),
        )
    }

    #[test]
    fn time_zero_is_initial_pgf() {
        let law = InitialLaw::thinned(0.7, 0.4).unwrap();
        let (zb, zd) = (c(0.3, 0.2), c(-0.5, 0.5));
        let v = joint_pgf_general(&rp(), &law, 0.0, zb, zd).unwrap();
        assert_eq!(v, law.pgf(zb));
    }

    #[test]
    fn normalisation_and_domain() {
        let law = InitialLaw::thinned(0.7, 0.4).unwrap();
        let one = c(1.0, 0.0);
        assert!((joint_pgf_general(&rp(), &law, 2.0, one, one).unwrap() - 1.0).norm() < 1e-12);
        assert!(matches!(
            joint_pgf_general(&rp(), &law, 1.0, c(1.01, 0.0), one),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn derivatives_at_one_are_mean_curves() {
        let rp = rp();
        let law = InitialLaw::thinned(0.8, 0.3).unwrap();
        let t = 1.5;
        let curves = solve_time_dependent(&rp, law.mean(), &[t]).unwrap();
        let h = 1e-5;
        let one = c(1.0, 0.0);
        // One-sided differences from inside the disk, Richardson-extrapolated
        // to cancel the O(h) bias.
        let slope = |f: &dyn Fn(f64) -> C, h: f64| (f(1.0) - f(1.0 - h)).re / h;
        let fb = |x: f64| joint_pgf_general(&rp, &law, t, c(x, 0.0), one).unwrap();
        let fd = |x: f64| joint_pgf_general(&rp, &law, t, one, c(x, 0.0)).unwrap();
        let db = 2.0 * slope(&fb, h / 2.0) - slope(&fb, h);
        let dd = 2.0 * slope(&fd, h / 2.0) - slope(&fd, h);
        assert!((db - curves.xb[0]).abs() / curves.xb[0] < 1e-6);
        assert!((dd - curves.xd[0]).abs() / curves.xd[0] < 1e-6);
        // Central differences inside the convergence region reach 1e-6.
        let cb = (joint_pgf_unchecked(&rp, &law, t, c(1.0 + h, 0.0), one).unwrap()
            - joint_pgf_unchecked(&rp, &law, t, c(1.0 - h, 0.0), one).unwrap())
        .re / (2.0 * h);
        let cd = (joint_pgf_unchecked(&rp, &law, t, one, c(1.0 + h, 0.0)).unwrap()
            - joint_pgf_unchecked(&rp, &law, t, one, c(1.0 - h, 0.0)).unwrap())
        .re / (2.0 * h);
        assert!((cb - curves.xb[0]).abs() / curves.xb[0] < 1e-6);
        assert!((cd - curves.xd[0]).abs() / curves.xd[0] < 1e-6);
    }

    #[test]
    fn marginal_identity_on_the_circle() {
        let rp = rp();
        let law = InitialLaw::thinned(0.6, 0.5).unwrap();
        for k in 0..12 {
            let z = C::from_polar(1.0, 0.5 + k as f64);
            let joint = joint_pgf_general(&rp, &law, 1.2, z, z.inv()).unwrap();
            let marg = marginal_pgf(&rp, &law, 1.2, z).unwrap();
            assert!((joint - marg).norm() < 1e-10);
        }
    }

    #[test]
    fn branch_choice_is_immaterial() {
        let rp = rp();
        let law = InitialLaw::thinned(0.9, 0.2).unwrap();
        for (zb, zd) in [(c(0.3, -0.7), c(-0.6, 0.2)), (c(-0.9, 0.1), c(-0.2, -0.8))] {
            let p = propagate(&rp, zb * zd, 0.8).unwrap();
            let zeta = (zb * zd).sqrt();
            let xi = zb / zeta;
            let direct = law.pgf(p.argument(zb));
            let a = joint_pgf_from_roots(&p, &law, zeta, xi);
            let b = joint_pgf_from_roots(&p, &law, -zeta, -xi);
            assert!((a - direct).norm() < 1e-13 && (b - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn compensated_determinant_survives_cancellation() {
        let y = [c(1e8 + 1.0, 0.0), c(1e8, 0.0), c(1e8 + 2.0, 0.0), c(1e8 + 1.0, 0.0)];
        let one = c(1.0, 0.0);
        assert_ne!(y[0] * y[3] - y[1] * y[2], one);
        assert_eq!(det_compensated(&y, one), one);
        let w = C::from_polar(1.0, 0.7);
        let y = [c(3.0, -1.0), c(0.5, 2.0), c(-1.5, 0.25), c(2.0, 4.0)];
        assert!((det_compensated(&y, w) - (y[0] * y[3] - w * y[1] * y[2])).norm() < 1e-14);
    }

    #[test]
    fn determinant_is_conserved() {
        let g = joint_pgf_grid(&rp(), 2.0, 16).unwrap();
        assert!(g.max_det_drift() <= 1e-9, "{}", g.max_det_drift());
        let g0 = joint_pgf_grid(&rp(), 0.0, 4).unwrap();
        for z in &g0.zetas {
            assert_eq!(z.map, HomographicMap::identity());
        }
        assert!(joint_pgf_grid(&rp(), 1.0, 5).is_err());
    }
}
