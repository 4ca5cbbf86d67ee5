use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of `N(0)`.
///
/// The thinned form takes a geometric count `G ≥ 1` with
/// `P(G = k) = q p^{k−1}` and keeps each unit with probability `p0`, giving
/// `φ₀(z) = q(q0 + p0 z)/(1 − p(q0 + p0 z))`. The fixed form is a point mass,
/// `φ₀(z) = zⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InitialLawSpec", into = "InitialLawSpec")]
pub struct InitialLaw {
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Thinned { p0: f64, p: f64 },
    Fixed(u64),
}

/// Config-file form of an [`InitialLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialLawSpec {
    Thinned { p0: f64, p: f64 },
    Fixed { count: u64 },
}

impl TryFrom<InitialLawSpec> for InitialLaw {
    type Error = Error;

    fn try_from(s: InitialLawSpec) -> Result<Self> {
        match s {
            InitialLawSpec::Thinned { p0, p } => InitialLaw::thinned(p0, p),
            InitialLawSpec::Fixed { count } => Ok(InitialLaw::fixed(count)),
        }
    }
}

impl From<InitialLaw> for InitialLawSpec {
    fn from(l: InitialLaw) -> Self {
        match l.kind {
            Kind::Thinned { p0, p } => InitialLawSpec::Thinned { p0, p },
            Kind::Fixed(count) => InitialLawSpec::Fixed { count },
        }
    }
}

impl InitialLaw {
    pub fn thinned(p0: f64, p: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(Error::domain(format!("p0 must lie in (0, 1], got {p0}")));
        }
        if !(0.0..1.0).contains(&p) {
            return Err(Error::domain(format!("p must lie in [0, 1), got {p}")));
        }
        Ok(Self { kind: Kind::Thinned { p0, p } })
    }

    pub fn fixed(n: u64) -> Self {
        Self { kind: Kind::Fixed(n) }
    }

    /// One deterministic ancestor, `φ₀(z) = z`.
    pub fn single() -> Self {
        Self { kind: Kind::Thinned { p0: 1.0, p: 0.0 } }
    }

    /// `(p0, p)` for the thinned form.
    pub fn thinned_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Thinned { p0, p } => Some((p0, p)),
            Kind::Fixed(_) => None,
        }
    }

    pub fn fixed_count(&self) -> Option<u64> {
        match self.kind {
            Kind::Fixed(n) => Some(n),
            Kind::Thinned { p0, p } => (p0 == 1.0 && p == 0.0).then_some(1),
        }
    }

    pub fn pgf(&self, z: Complex64) -> Complex64 {
        match self.kind {
            Kind::Thinned { p0, p } => {
                let u = (1.0 - p0) + p0 * z;
                (1.0 - p) * u / (1.0 - p * u)
            }
            Kind::Fixed(n) => z.powu(n as u32),
        }
    }

    pub fn pgf_real(&self, z: f64) -> f64 {
        self.pgf(Complex64::new(z, 0.0)).re
    }

    pub fn pgf_derivative(&self, z: Complex64) -> Complex64 {
        match self.kind {
            Kind::Thinned { p0, p } => {
                let u = (1.0 - p0) + p0 * z;
                let den = 1.0 - p * u;
                p0 * (1.0 - p) / (den * den)
            }
            Kind::Fixed(0) => Complex64::new(0.0, 0.0),
            Kind::Fixed(n) => n as f64 * z.powu(n as u32 - 1),
        }
    }

    pub fn pgf_derivative_real(&self, z: f64) -> f64 {
        self.pgf_derivative(Complex64::new(z, 0.0)).re
    }

    /// Thinned: `m = p0/q`.
    pub fn mean(&self) -> f64 {
        match self.kind {
            Kind::Thinned { p0, p } => p0 / (1.0 - p),
            Kind::Fixed(n) => n as f64,
        }
    }

    /// Thinned: `q0 m + p m²`.
    pub fn variance(&self) -> f64 {
        match self.kind {
            Kind::Thinned { p0, p } => {
                let m = self.mean();
                (1.0 - p0) * m + p * m * m
            }
            Kind::Fixed(_) => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.variance() + self.mean().powi(2)
    }

    /// `P(N(0) = n)`.
    pub fn pmf(&self, n: u64) -> f64 {
        match self.kind {
            Kind::Thinned { p0, p } => {
                let (q, q0) = (1.0 - p, 1.0 - p0);
                let den = 1.0 - p * q0;
                if n == 0 {
                    q * q0 / den
                } else {
                    // Coefficient of zⁿ in q(q0 + p0 z)/(1 − p q0 − p p0 z).
                    let r = p * p0 / den;
                    q / den * (q0 * r + p0) * r.powi(n as i32 - 1)
                }
            }
            Kind::Fixed(k) => (n == k) as u8 as f64,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.kind {
            Kind::Thinned { p0, p } => {
                let g = if p == 0.0 {
                    1
                } else {
                    1 + Geometric::new(1.0 - p).expect("q in (0, 1]").sample(rng)
                };
                if p0 == 1.0 {
                    g
                } else {
                    Binomial::new(g, p0).expect("p0 in (0, 1)").sample(rng)
                }
            }
            Kind::Fixed(n) => n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(law: InitialLaw, n: usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng) as f64).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn single_ancestor_is_degenerate() {
        let law = InitialLaw::single();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| law.sample(&mut rng) == 1));
        assert_eq!(law.pgf_real(0.3), 0.3);
        assert_eq!(law.fixed_count(), Some(1));
    }

    #[test]
    fn geometric_mean_within_three_standard_errors() {
        let law = InitialLaw::thinned(1.0, 0.5).unwrap();
        let n = 100_000;
        let (m, v) = moments(law, n);
        assert_eq!(law.mean(), 2.0);
        assert!((m - 2.0).abs() < 3.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn bernoulli_variance() {
        let law = InitialLaw::thinned(0.5, 0.0).unwrap();
        assert_eq!(law.variance(), 0.25);
        let (_, v) = moments(law, 100_000);
        assert!((v - 0.25).abs() < 0.005);
    }

    #[test]
    fn pmf_matches_pgf() {
        for law in [InitialLaw::thinned(0.6, 0.7).unwrap(), InitialLaw::fixed(3)] {
            let total: f64 = (0..400).map(|n| law.pmf(n)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let z: f64 = 0.37;
            let series: f64 = (0..400).map(|n| law.pmf(n) * z.powi(n as i32)).sum();
            assert!((series - law.pgf_real(z)).abs() < 1e-14);
            let mean: f64 = (0..400).map(|n| n as f64 * law.pmf(n)).sum();
            assert!((mean - law.mean()).abs() < 1e-10);
            let m2: f64 = (0..400).map(|n| (n * n) as f64 * law.pmf(n)).sum();
            assert!((m2 - law.second_moment()).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for law in [InitialLaw::thinned(0.3, 0.4).unwrap(), InitialLaw::fixed(4)] {
            let h = 1e-6;
            let fd = (law.pgf_real(0.5 + h) - law.pgf_real(0.5 - h)) / (2.0 * h);
            assert!((fd - law.pgf_derivative_real(0.5)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_invalid() {
        assert!(InitialLaw::thinned(0.0, 0.5).is_err());
        assert!(InitialLaw::thinned(1.0, 1.0).is_err());
        assert!(InitialLaw::thinned(1.2, 0.0).is_err());
    }

    #[test]
    fn config_forms() {
        let a: InitialLaw = serde_json::from_str(r#"{"p0":0.5,"p":0.25}"#).unwrap();
        assert_eq!(a, InitialLaw::thinned(0.5, 0.25).unwrap());
        let b: InitialLaw = serde_json::from_str(r#"{"count":2}"#).unwrap();
        assert_eq!(b, InitialLaw::fixed(2));
        assert!(serde_json::from_str::<InitialLaw>(r#"{"p0":2.0,"p":0.25}"#).is_err());
    }
}
