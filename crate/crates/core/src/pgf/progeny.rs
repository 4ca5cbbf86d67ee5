//! Law of the total progeny `N_d(∞)` at extinction.
//!
//! One ancestor leaves `h(z) = (1 + ρ − √((1+ρ)² − 4ρz))/2` as the pgf of its
//! total number of deaths; `N(0)` ancestors give `φ₀(h(z))`. For `ρ < 1` this
//! is conditioned on extinction by dividing by `φ₀(h(1)) = φ₀(ρ)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::Regime;
use crate::stochastic::InitialLaw;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgenyLaw {
    pub law: InitialLaw,
    pub rho: f64,
    pub regime: Regime,
    /// Conditional mean for `ρ < 1`, unconditional for `ρ > 1`, `+∞` at `ρ = 1`.
    pub mean: f64,
}

pub fn progeny_at_extinction(law: &InitialLaw, rho: f64) -> Result<ProgenyLaw> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain(format!("ρ must be positive, got {rho}")));
    }
    let (regime, mean) = if rho < 1.0 {
        let f = law.pgf_real(rho);
        (Regime::Supercritical, law.pgf_derivative_real(rho) / f * rho / (1.0 - rho))
    } else if rho > 1.0 {
        (Regime::Subcritical, law.mean() * rho / (rho - 1.0))
    } else {
        (Regime::Critical, f64::INFINITY)
    };
    Ok(ProgenyLaw { law: *law, rho, regime, mean })
}

impl ProgenyLaw {
    /// `h(z)`; at `ρ = 1` this is `1 − √(1 − z)`.
    pub fn h(&self, z: C) -> C {
        let r = self.rho;
        if r == 1.0 {
            1.0 - (1.0 - z).sqrt()
        } else {
            0.5 * (1.0 + r - ((1.0 + r).powi(2) - 4.0 * r * z).sqrt())
        }
    }

    fn normaliser(&self) -> f64 {
        self.law.pgf_real(self.rho.min(1.0))
    }

    /// Progeny pgf on `[0, 1]`.
    pub fn pgf(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::domain(format!("progeny pgf is evaluated on [0, 1], got {z}")));
        }
        Ok(self.pgf_complex(C::new(z, 0.0)).re)
    }

    pub fn pgf_complex(&self, z: C) -> C {
        self.law.pgf(self.h(z)) / self.normaliser()
    }

    /// `P(N_d(∞) = n)` for `n = 0..n_max`, from an FFT of the pgf on the unit
    /// circle. The sample count doubles until the aliased tail is below
    /// `1e-13`.
    pub fn pmf(&self, n_max: usize) -> Result<Vec<f64>> {
        let mut m = (4 * (n_max + 1)).next_power_of_two().max(256);
        let mut planner = FftPlanner::new();
        loop {
            let mut buf: Vec<C> = (0..m)
                .map(|j| self.pgf_complex(C::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64)))
                .collect();
            planner.plan_fft_forward(m).process(&mut buf);
            let coef: Vec<f64> = buf.iter().map(|v| v.re / m as f64).collect();
            let tail: f64 = coef[m / 2..].iter().map(|v| v.abs()).sum();
            if tail < 1e-13 {
                return Ok(coef[..=n_max].iter().map(|&v| v.max(0.0)).collect());
            }
            if m >= 1 << 22 {
                return Err(Error::Resolution(format!(
                    "progeny pmf still aliased ({tail:.2e}) at {m} samples"
                )));
            }
            m *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_per_regime() {
        let single = InitialLaw::single();
        assert!((progeny_at_extinction(&single, 0.5).unwrap().mean - 2.0).abs() < 1e-15);
        assert!((progeny_at_extinction(&single, 2.0).unwrap().mean - 2.0).abs() < 1e-15);
        assert_eq!(progeny_at_extinction(&single, 1.0).unwrap().mean, f64::INFINITY);
        assert!(progeny_at_extinction(&single, 0.0).is_err());
    }

    #[test]
    fn pgf_normalised_and_mean_by_difference() {
        for (law, rho) in [
            (InitialLaw::single(), 0.5),
            (InitialLaw::thinned(0.6, 0.4).unwrap(), 0.3),
            (InitialLaw::thinned(0.6, 0.4).unwrap(), 1.8),
        ] {
            let p = progeny_at_extinction(&law, rho).unwrap();
            assert!((p.pgf(1.0).unwrap() - 1.0).abs() < 1e-14);
            let h = 1e-6;
            let fd = (p.pgf(1.0).unwrap() - p.pgf(1.0 - h).unwrap()) / h;
            assert!((fd - p.mean).abs() / p.mean < 1e-4, "{fd} vs {}", p.mean);
        }
        assert!(progeny_at_extinction(&InitialLaw::single(), 0.5).unwrap().pgf(1.5).is_err());
    }

    #[test]
    fn pmf_from_fft_matches_catalan_weights() {
        // Series solution of h² − (1+ρ)h + ρz = 0: h = g₁z + g₂z² + … with
        // g₁ = ρ/(1+ρ) and g₂ = g₁²/(1+ρ); conditioning divides by h(1) = ρ.
        let p = progeny_at_extinction(&InitialLaw::single(), 0.5).unwrap();
        let pmf = p.pmf(40).unwrap();
        let rho = 0.5f64;
        assert!(pmf[0].abs() < 1e-15);
        assert!((pmf[1] - rho / (1.0 + rho) / rho).abs() < 1e-13);
        assert!((pmf[2] - rho * rho / (1.0 + rho).powi(3) / rho).abs() < 1e-13);
        let total: f64 = p.pmf(400).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn critical_uses_explicit_h() {
        let p = progeny_at_extinction(&InitialLaw::single(), 1.0).unwrap();
        assert!((p.pgf(0.75).unwrap() - 0.5).abs() < 1e-15);
    }
}
