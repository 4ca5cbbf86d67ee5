//! Adaptive Simpson quadrature with Richardson correction.

use crate::error::{Error, Result};

/// Acceptance threshold for an integral estimate: `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-13)
    }
}

const INITIAL_PANELS: usize = 16;
const MAX_DEPTH: u32 = 50;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn refine<F: Fn(f64) -> f64>(f: &F, p: Panel, eps: f64, depth: u32) -> Result<f64> {
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    if !flm.is_finite() || !frm.is_finite() {
        return Err(Error::numerical(format!(
            "integrand not finite near t={lm} or t={rm}"
        )));
    }
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let delta = left + right - p.whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    // Break points shifted by rounding can leave a jump inside a panel a few
    // ulps wide; it contributes at most the width times the jump.
    if p.b - p.a <= 64.0 * f64::EPSILON * p.a.abs().max(p.b.abs()).max(1.0) {
        return Ok(left + right);
    }
    if depth == 0 || m <= p.a || m >= p.b {
        return Err(Error::numerical(format!(
            "adaptive Simpson failed to converge on [{}, {}]: residual {:.3e} vs tolerance {:.3e}",
            p.a,
            p.b,
            delta.abs(),
            15.0 * eps
        )));
    }
    let l = Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left };
    let r = Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right };
    Ok(refine(f, l, 0.5 * eps, depth - 1)? + refine(f, r, 0.5 * eps, depth - 1)?)
}

/// Integrates `f` over `[a, b]`.
///
/// The interval is first cut into 16 panels so that narrow features are not
/// missed by the coarse initial estimate; each panel is then refined until its
/// share of the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    let h = (b - a) / INITIAL_PANELS as f64;
    let xs: Vec<f64> = (0..=2 * INITIAL_PANELS)
        .map(|i| if i == 2 * INITIAL_PANELS { b } else { a + 0.5 * h * i as f64 })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    if let Some(i) = fs.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("integrand not finite at t={}", xs[i])));
    }
    let panels: Vec<Panel> = (0..INITIAL_PANELS)
        .map(|k| {
            let (i, j, l) = (2 * k, 2 * k + 1, 2 * k + 2);
            Panel {
                a: xs[i],
                b: xs[l],
                fa: fs[i],
                fm: fs[j],
                fb: fs[l],
                whole: simpson(xs[i], xs[l], fs[i], fs[j], fs[l]),
            }
        })
        .collect();
    let coarse: f64 = panels.iter().map(|p| p.whole).sum();
    let scale: f64 = panels.iter().map(|p| p.whole.abs()).sum::<f64>().max(coarse.abs());
    let eps = tol.abs.max(tol.rel * scale) / INITIAL_PANELS as f64;
    panels
        .into_iter()
        .map(|p| refine(&f, p, eps, MAX_DEPTH))
        .sum()
}

/// Integrates `f` over consecutive segments between sorted `breaks`.
///
/// Placing breaks at kinks or jumps keeps the refinement shallow.
pub fn integrate_segments<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    let seg_tol = Tolerance::new(tol.abs / n, tol.rel);
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], seg_tol))
        .sum()
}

/// Integrates a decaying `f` over `[a, ∞)` by summing panels of doubling
/// width until a panel contributes less than the tolerance.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    first_width: f64,
    tol: Tolerance,
) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = first_width;
    for _ in 0..200 {
        let hi = lo + width;
        let part = integrate(&f, lo, hi, Tolerance::new(tol.abs * 1e-2, tol.rel))?;
        total += part;
        if part.abs() <= tol.abs.max(tol.rel * total.abs()) && f(hi).abs() * width <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        lo = hi;
        width *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::numerical("tail integral did not decay".to_string()))
}
