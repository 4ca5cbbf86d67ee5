//! Marginal law of the living population `N(t)`.
//!
//! A single ancestor has the homographic pgf
//! `w_t(z) = 1 − ψ(1 − z)/(1 + η(1 − z))` with `ψ = e^{Λ(t)}` and
//! `η = ψ ∫₀ᵗ λ_b e^{−Λ}`, and `φ_t = φ₀ ∘ w_t`. Everything here is evaluated
//! in terms of `1/ψ` and `η/ψ` so that large `t` cannot overflow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_segments, integrate_to_infinity, Tolerance};
use crate::rates::{RatePair, Regime};
use crate::stochastic::InitialLaw;

const TOL: Tolerance = Tolerance::new(1e-14, 1e-14);
/// Slack on `|z| ≤ 1` for points produced by floating-point rotations.
pub(crate) const DISK_SLACK: f64 = 1e-12;

/// `ψ(t)` and `η(t)`, stored as `1/ψ` and `η/ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalState {
    pub t: f64,
    /// `e^{−Λ(t)}`.
    pub inv_psi: f64,
    /// `η/ψ = ∫₀ᵗ λ_b(s) e^{−Λ(s)} ds`.
    pub eta_over_psi: f64,
}

impl MarginalState {
    pub fn new(rp: &RatePair, t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(format!("time must be nonnegative, got {t}")));
        }
        let eta_over_psi = if rp.is_constant() {
            let (lb, ld) = (rp.birth.tail_limit(), rp.death.tail_limit());
            let l = lb - ld;
            if l == 0.0 {
                lb * t
            } else {
                -lb * (-l * t).exp_m1() / l
            }
        } else {
            let mut br = vec![0.0];
            br.extend(rp.kinks().into_iter().filter(|&k| k > 0.0 && k < t));
            br.push(t);
            integrate_segments(|s| rp.birth.rate(s) * (-rp.net_hazard(s)).exp(), &br, TOL)?
        };
        Ok(Self { t, inv_psi: (-rp.net_hazard(t)).exp(), eta_over_psi })
    }

    pub fn psi(&self) -> f64 {
        1.0 / self.inv_psi
    }

    pub fn eta(&self) -> f64 {
        self.eta_over_psi / self.inv_psi
    }

    /// Single-ancestor pgf `w_t(z)`.
    pub fn single_pgf(&self, z: Complex64) -> Complex64 {
        let u = 1.0 - z;
        1.0 - u / (self.inv_psi + self.eta_over_psi * u)
    }

    /// `w_t(0) = 1 − ψ/(1 + η)`.
    pub fn single_extinction(&self) -> f64 {
        1.0 - 1.0 / (self.inv_psi + self.eta_over_psi)
    }
}

fn check_disk(z: Complex64) -> Result<()> {
    if z.norm() > 1.0 + DISK_SLACK {
        Err(Error::domain(format!("|z| = {} exceeds 1", z.norm())))
    } else {
        Ok(())
    }
}

/// `φ_t(z) = E z^{N(t)}` on the closed unit disk.
///
/// For the thinned initial law this is the homographic form
/// `(q − (qη − p0qψ)(z−1)) / (q − (qη + p0pψ)(z−1))`; otherwise `φ₀(w_t(z))`.
pub fn marginal_pgf(rp: &RatePair, law: &InitialLaw, t: f64, z: Complex64) -> Result<Complex64> {
    check_disk(z)?;
    let st = MarginalState::new(rp, t)?;
    Ok(marginal_pgf_at(&st, law, z))
}

pub(crate) fn marginal_pgf_at(st: &MarginalState, law: &InitialLaw, z: Complex64) -> Complex64 {
    match law.thinned_params() {
        Some((p0, p)) => {
            let q = 1.0 - p;
            let u = z - 1.0;
            let k = st.eta_over_psi;
            // Numerator and denominator divided by ψ.
            let num = q * st.inv_psi - (q * k - p0 * q) * u;
            let den = q * st.inv_psi - (q * k + p0 * p) * u;
            num / den
        }
        None => law.pgf(st.single_pgf(z)),
    }
}

/// `P(τ_e ≤ t) = φ_t(0)`.
pub fn extinction_cdf(rp: &RatePair, law: &InitialLaw, t: f64) -> Result<f64> {
    let st = MarginalState::new(rp, t)?;
    Ok(extinction_cdf_at(&st, law))
}

pub(crate) fn extinction_cdf_at(st: &MarginalState, law: &InitialLaw) -> f64 {
    match law.thinned_params() {
        Some((p0, p)) => {
            let q = 1.0 - p;
            1.0 - p0 / (q * st.inv_psi + q * st.eta_over_psi + p0 * p)
        }
        None => law.pgf_real(st.single_extinction()),
    }
}

/// `P(N(t) = n)` for `n ≥ 1`.
///
/// Thinned law: `C^{n−1}(φ_t(0) C + D)` with `C = (qη + p0pψ)/(q + qη + p0pψ)`
/// and `D = q(p0ψ − η)/(q + qη + p0pψ)`. Fixed `N(0) = m`: the coefficient of
/// `zⁿ` in `w_t(z)^m`.
pub fn pmf_living(rp: &RatePair, law: &InitialLaw, t: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("pmf_living needs n >= 1; use extinction_cdf for n = 0"));
    }
    let st = MarginalState::new(rp, t)?;
    Ok(pmf_living_at(&st, law, n))
}

pub(crate) fn pmf_living_at(st: &MarginalState, law: &InitialLaw, n: u64) -> f64 {
    match law.thinned_params() {
        Some((p0, p)) => {
            let q = 1.0 - p;
            let k = st.eta_over_psi;
            let den0 = q * st.inv_psi + q * k + p0 * p;
            let c = (q * k + p0 * p) / den0;
            let d = q * (p0 - k) / den0;
            let phi0 = 1.0 - p0 / den0;
            c.powi(n as i32 - 1) * (phi0 * c + d)
        }
        None => fixed_pmf(st, law.fixed_count().expect("fixed law"), n),
    }
}

/// Coefficient of `zⁿ` in `((A0 + A1 z)/(1 − C z))^m`.
fn fixed_pmf(st: &MarginalState, m: u64, n: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    // w_t(z) = (1/ψ + k − 1 + (1 − k) z)/(1/ψ + k − k z) with k = η/ψ.
    let k = st.eta_over_psi;
    let den = st.inv_psi + k;
    let (a0, a1, c) = ((st.inv_psi + k - 1.0) / den, (1.0 - k) / den, k / den);
    let mut total = 0.0;
    // Σ_j C(m,j) A0^{m−j} A1^j C(n−j+m−1, m−1) C^{n−j}
    let mut binom_m = 1.0;
    for j in 0..=m.min(n) {
        if j > 0 {
            binom_m *= (m - j + 1) as f64 / j as f64;
        }
        let r = n - j;
        let mut neg = 1.0;
        for i in 1..m {
            neg *= (r + i) as f64 / i as f64;
        }
        total += binom_m * a0.powi((m - j) as i32) * a1.powi(j as i32) * neg * c.powi(r as i32);
    }
    total
}

/// `P(N(t) = n)` for `n = 0, 1, …` until the remaining mass drops below `tail`.
pub fn pmf_living_table(rp: &RatePair, law: &InitialLaw, t: f64, tail: f64) -> Result<Vec<f64>> {
    let st = MarginalState::new(rp, t)?;
    let mut out = vec![extinction_cdf_at(&st, law)];
    let mut acc = out[0];
    let mut n = 1;
    while 1.0 - acc > tail || n <= law.fixed_count().unwrap_or(1) {
        let p = pmf_living_at(&st, law, n);
        out.push(p);
        acc += p;
        n += 1;
        if n > 50_000_000 {
            return Err(Error::numerical("pmf tail did not decay"));
        }
    }
    Ok(out)
}

/// `κ = ∫₀^∞ λ_b(s) e^{−Λ(s)} ds`, the limit of `η/ψ`.
pub fn kappa(rp: &RatePair) -> Result<f64> {
    rp.require_supercritical()?;
    if rp.is_constant() {
        let (lb, ld) = (rp.birth.tail_limit(), rp.death.tail_limit());
        return Ok(lb / (lb - ld));
    }
    let f = |s: f64| rp.birth.rate(s) * (-rp.net_hazard(s)).exp();
    let kinks = rp.kinks();
    let mut head = 0.0;
    let mut start = 0.0;
    if let Some(&last) = kinks.last() {
        let mut br = vec![0.0];
        br.extend(kinks.iter().copied().filter(|&k| k > 0.0));
        head = integrate_segments(f, &br, TOL)?;
        start = last;
    }
    let width = 1.0 / (rp.birth.tail_limit() - rp.death.tail_limit());
    Ok(head + integrate_to_infinity(f, start, width, TOL)?)
}

/// `ρ_e = P(τ_e < ∞) = φ₀(1 − 1/κ)`; equal to 1 unless supercritical.
///
/// For constant rates `1 − 1/κ = ρ = λ_d/λ_b`.
pub fn extinction_prob(rp: &RatePair, law: &InitialLaw) -> Result<f64> {
    if rp.regime() != Regime::Supercritical {
        return Ok(1.0);
    }
    Ok(law.pgf_real(1.0 - 1.0 / kappa(rp)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rk4_integrate;
    use crate::rates::RateFunction;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn time_dependent() -> RatePair {
        RatePair::new(
            RateFunction::homographic(1.5, 2.5).unwrap(),
            RateFunction::exp_decay(0.6, 1.2, 0.8).unwrap(),
        )
    }

    #[test]
    fn identity_time_and_normalisation() {
        let rp = time_dependent();
        let law = InitialLaw::thinned(0.7, 0.3).unwrap();
        for z in [c(0.2, 0.5), c(-0.9, 0.1), c(0.0, 0.0)] {
            let v = marginal_pgf(&rp, &law, 0.0, z).unwrap();
            assert!((v - law.pgf(z)).norm() < 1e-15);
        }
        for t in [0.5, 3.0, 40.0] {
            assert!((marginal_pgf(&rp, &law, t, c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        }
        assert!(matches!(marginal_pgf(&rp, &law, 1.0, c(1.1, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn extinction_matches_bernoulli_ode_oracle() {
        // Oracle: the backward equation ẏ = λ_d − (λ_b + λ_d) y + λ_b y² for
        // y(t) = P(N(t) = 0 | N(0) = 1), integrated with RK4.
        let f = |_s: f64, y: [f64; 1]| [1.0 - 3.0 * y[0] + 2.0 * y[0] * y[0]];
        let y = rk4_integrate(&f, 0.0, [0.0], 1.0, 1e-4)[0];
        assert!((y - 0.387_300_163_219_718).abs() < 1e-13);
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let v = extinction_cdf(&rp, &InitialLaw::single(), 1.0).unwrap();
        assert!((v - 0.387_300_163_219_718).abs() < 1e-14);
        for t in [0.3_f64, 2.0, 7.0] {
            let e = t.exp();
            let v = extinction_cdf(&rp, &InitialLaw::single(), t).unwrap();
            assert!((v - (e - 1.0) / (2.0 * e - 1.0)).abs() < 1e-14);
        }
        assert!((extinction_cdf(&rp, &InitialLaw::single(), 60.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn extinction_cdf_at_zero_is_initial_mass() {
        let rp = time_dependent();
        let law = InitialLaw::thinned(0.4, 0.5).unwrap();
        let (q, q0, p) = (0.5, 0.6, 0.5);
        assert!((extinction_cdf(&rp, &law, 0.0).unwrap() - q * q0 / (1.0 - p * q0)).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..200 {
            let v = extinction_cdf(&rp, &law, i as f64 * 0.1).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn homographic_form_equals_composition() {
        let rp = time_dependent();
        let law = InitialLaw::thinned(0.6, 0.45).unwrap();
        for t in [0.0, 0.7, 5.0] {
            let st = MarginalState::new(&rp, t).unwrap();
            for z in [c(0.3, -0.4), c(-1.0, 0.0), c(0.0, 1.0)] {
                let a = marginal_pgf_at(&st, &law, z);
                let b = law.pgf(st.single_pgf(z));
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn mean_is_derivative_at_one() {
        let rp = time_dependent();
        let law = InitialLaw::thinned(0.8, 0.25).unwrap();
        for t in [0.5, 2.0] {
            // Richardson-extrapolated one-sided difference from inside the disk.
            let slope = |h: f64| {
                (marginal_pgf(&rp, &law, t, c(1.0, 0.0)).unwrap() - marginal_pgf(&rp, &law, t, c(1.0 - h, 0.0)).unwrap()).re / h
            };
            let fd = 2.0 * slope(5e-6) - slope(1e-5);
            let exact = law.mean() * rp.net_hazard(t).exp();
            assert!((fd - exact).abs() / exact < 1e-6);
        }
    }

    #[test]
    fn pmf_normalisation_and_first_term() {
        let rp = time_dependent();
        for law in [InitialLaw::thinned(0.6, 0.45).unwrap(), InitialLaw::single(), InitialLaw::fixed(3)] {
            let t = 1.3;
            let table = pmf_living_table(&rp, &law, t, 1e-14).unwrap();
            assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(table.iter().all(|&p| p >= -1e-15));
            // P(N(t)=1) = φ₀′(w_t(0)) ψ/(1+η)², checked against a finite difference at 0.
            let st = MarginalState::new(&rp, t).unwrap();
            let formula = law.pgf_derivative_real(st.single_extinction()) * st.psi() / (1.0 + st.eta()).powi(2);
            let h = 1e-5;
            let fd = (marginal_pgf_at(&st, &law, c(h, 0.0)) - marginal_pgf_at(&st, &law, c(-h, 0.0))).re / (2.0 * h);
            assert!((formula - table[1]).abs() < 1e-12);
            assert!((fd - table[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn extinction_probabilities() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        assert!((extinction_prob(&rp, &InitialLaw::single()).unwrap() - 0.5).abs() < 1e-15);
        let geo = InitialLaw::thinned(1.0, 0.5).unwrap();
        assert!((extinction_prob(&rp, &geo).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let near = RatePair::constant(1.0, 1.0 - 1e-9).unwrap();
        assert!((extinction_prob(&near, &geo).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(extinction_prob(&RatePair::constant(1.0, 2.0).unwrap(), &geo).unwrap(), 1.0);
        // κ-form q(κ − p0)/(qκ + p0 p).
        let law = InitialLaw::thinned(0.7, 0.2).unwrap();
        let k = 2.0;
        let kform = 0.8 * (k - 0.7) / (0.8 * k + 0.7 * 0.2);
        assert!((extinction_prob(&rp, &law).unwrap() - kform).abs() < 1e-15);
    }

    #[test]
    fn time_dependent_extinction_is_the_cdf_limit() {
        let rp = time_dependent();
        let law = InitialLaw::thinned(0.9, 0.3).unwrap();
        let limit = extinction_prob(&rp, &law).unwrap();
        let late = extinction_cdf(&rp, &law, 80.0).unwrap();
        assert!((limit - late).abs() < 1e-11);
        // Not the limiting-rate value φ₀(λ_d⁻/λ_b⁻).
        assert!((limit - law.pgf_real(rp.rho())).abs() > 1e-2);
    }

    #[test]
    fn pointwise_limit_is_rho_e() {
        let rp = RatePair::constant(3.0, 1.0).unwrap();
        let law = InitialLaw::thinned(0.5, 0.5).unwrap();
        let st = MarginalState::new(&rp, 40.0).unwrap();
        for z in [c(0.0, 0.0), c(0.5, 0.3), c(-0.8, 0.0)] {
            assert!((marginal_pgf_at(&st, &law, z) - law.pgf_real(1.0 / 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn eta_over_psi_limits() {
        let rp = RatePair::constant(2.0, 0.5).unwrap();
        let st = MarginalState::new(&rp, 50.0).unwrap();
        assert!((st.eta_over_psi - 1.0 / (1.0 - 0.25)).abs() < 1e-14);
        let rp = time_dependent();
        for t in [0.1, 1.0, 10.0] {
            let st = MarginalState::new(&rp, t).unwrap();
            assert!(st.eta_over_psi > 1.0 - st.inv_psi);
        }
    }
}
