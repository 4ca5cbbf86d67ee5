//! Law of `Δ(t) = 2N_d(t) − N_b(t)` and the intensities of zero crossings.
//!
//! `E w^{Δ(t)} = Φ_t(w⁻¹, w²)` is a Laurent series in `w`; its coefficients
//! are read off by an FFT of samples on the unit circle. Up-crossings of zero
//! happen only through deaths, from `Δ = −1` (type 1) or `Δ = −2` (type 2).
//! A death occurs at rate `λ_d N` and `N = N_d + 1` on `{Δ = −1}`,
//! `N = N_d + 2` on `{Δ = −2}`, so the intensities are
//! `λ_d E[(N_d + 1) 1{Δ = −1}]` and `λ_d E[(N_d + 2) 1{Δ = −2}]`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::joint::joint_pgf_unchecked;
use crate::error::{Error, Result};
use crate::rates::RatePair;
use crate::stochastic::InitialLaw;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierOptions {
    /// Starting sample count; must be a power of two.
    pub initial_samples: usize,
    pub max_samples: usize,
    /// The window is accepted once the outermost coefficients fall below this.
    pub edge_tol: f64,
    /// Negative mass beyond this after the transform is an error, not ringing.
    pub ringing_tol: f64,
    /// Step of the central difference in `v` for `E[N_d w^Δ]`.
    pub fd_step: f64,
}

impl Default for FourierOptions {
    fn default() -> Self {
        Self {
            initial_samples: 1 << 10,
            max_samples: 1 << 16,
            edge_tol: 1e-10,
            ringing_tol: 1e-9,
            fd_step: 1e-5,
        }
    }
}

/// Coefficients `c_k`, `k ∈ [−m/2, m/2)`, of a Laurent series sampled at
/// `m` points of the unit circle; `c[k + m/2]` holds `c_k`.
fn laurent<F>(f: &F, m: usize) -> Result<Vec<C>>
where
    F: Fn(C) -> Result<C> + Sync,
{
    let mut buf: Vec<C> = (0..m)
        .into_par_iter()
        .map(|j| f(C::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64)))
        .collect::<Result<_>>()?;
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let half = m / 2;
    Ok((0..m)
        .map(|i| {
            let k = i as i64 - half as i64;
            buf[k.rem_euclid(m as i64) as usize] / m as f64
        })
        .collect())
}

fn edges_small(c: &[C], tol: f64) -> bool {
    let m = c.len();
    [0, 1, m - 2, m - 1].iter().all(|&i| c[i].norm() < tol)
}

/// Doubles the sample count until the window edges are negligible.
fn resolved_laurent<F>(f: &F, opts: &FourierOptions) -> Result<Vec<C>>
where
    F: Fn(C) -> Result<C> + Sync,
{
    let mut m = opts.initial_samples;
    loop {
        let c = laurent(f, m)?;
        if edges_small(&c, opts.edge_tol) {
            return Ok(c);
        }
        if m >= opts.max_samples {
            return Err(Error::Resolution(format!(
                "Laurent coefficients at the window edge are still above {} with {m} samples",
                opts.edge_tol
            )));
        }
        m *= 2;
    }
}

/// `P(Δ(t) = k)` for `k ∈ [min, min + probs.len())`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPmf {
    pub t: f64,
    pub min: i64,
    pub probs: Vec<f64>,
    /// Fourier sample count used.
    pub samples: usize,
    /// Negative ringing mass removed before renormalising.
    pub clipped: f64,
}

impl DeltaPmf {
    pub fn prob(&self, k: i64) -> f64 {
        if k < self.min || k >= self.min + self.probs.len() as i64 {
            0.0
        } else {
            self.probs[(k - self.min) as usize]
        }
    }

    pub fn support(&self) -> std::ops::Range<i64> {
        self.min..self.min + self.probs.len() as i64
    }
}

fn psi<'a>(rp: &'a RatePair, law: &'a InitialLaw, t: f64) -> impl Fn(C) -> Result<C> + Sync + 'a {
    move |z: C| joint_pgf_unchecked(rp, law, t, z.conj(), z * z)
}

pub fn delta_distribution(rp: &RatePair, law: &InitialLaw, t: f64, opts: &FourierOptions) -> Result<DeltaPmf> {
    if !opts.initial_samples.is_power_of_two() || opts.initial_samples < 8 {
        return Err(Error::domain("Fourier sample count must be a power of two >= 8"));
    }
    let c = resolved_laurent(&psi(rp, law, t), opts)?;
    let m = c.len();
    let mut probs: Vec<f64> = c.iter().map(|v| v.re).collect();
    let negative: f64 = probs.iter().filter(|&&p| p < 0.0).map(|p| -p).sum();
    if probs.iter().any(|&p| p < -opts.ringing_tol) {
        return Err(Error::Resolution(format!("Fourier ringing of {negative:.2e} exceeds tolerance")));
    }
    for p in &mut probs {
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    let first = probs.iter().position(|&p| p > 1e-15).unwrap_or(0);
    let last = probs.iter().rposition(|&p| p > 1e-15).unwrap_or(m - 1);
    Ok(DeltaPmf {
        t,
        min: first as i64 - (m / 2) as i64,
        probs: probs[first..=last].to_vec(),
        samples: m,
        clipped: negative,
    })
}

/// Instantaneous up-crossing intensities of `Δ` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRates {
    pub t: f64,
    /// Intensity of `−1 → +1` jumps.
    pub lambda1: f64,
    /// Intensity of `−2 → 0` jumps.
    pub lambda2: f64,
    pub p_minus1: f64,
    pub p_minus2: f64,
    /// `E[N_d 1{Δ = −1}]`.
    pub nd_minus1: f64,
    /// `E[N_d 1{Δ = −2}]`.
    pub nd_minus2: f64,
    /// Set when `P(Δ = −1) < 1e-12` and the type-1 intensity was zeroed.
    pub negligible1: bool,
    pub negligible2: bool,
}

pub fn crossing_rates(rp: &RatePair, law: &InitialLaw, t: f64, opts: &FourierOptions) -> Result<CrossingRates> {
    let base = resolved_laurent(&psi(rp, law, t), opts)?;
    let m = base.len();
    let h = opts.fd_step;
    let deriv = |z: C| -> Result<C> {
        let zb = z.conj();
        let up = joint_pgf_unchecked(rp, law, t, zb, (1.0 + h) * z * z)?;
        let down = joint_pgf_unchecked(rp, law, t, zb, (1.0 - h) * z * z)?;
        Ok((up - down) / (2.0 * h))
    };
    let nd = laurent(&deriv, m)?;
    let at = |c: &[C], k: i64| c[(k + (m / 2) as i64) as usize].re;
    let (p1, p2) = (at(&base, -1), at(&base, -2));
    let (n1, n2) = (at(&nd, -1), at(&nd, -2));
    let ld = rp.death.rate(t);
    let negligible1 = p1 < 1e-12;
    let negligible2 = p2 < 1e-12;
    Ok(CrossingRates {
        t,
        lambda1: if negligible1 { 0.0 } else { ld * (n1 + p1).max(0.0) },
        lambda2: if negligible2 { 0.0 } else { ld * (n2 + 2.0 * p2).max(0.0) },
        p_minus1: p1,
        p_minus2: p2,
        nd_minus1: n1,
        nd_minus2: n2,
        negligible1,
        negligible2,
    })
}
