use crate::error::{Error, Result};

/// Bisection on a bracket `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// Stops once the bracket is narrower than `x_tol`.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::numerical(format!(
            "bisection bracket [{lo}, {hi}] has no sign change ({f_lo}, {f_hi})"
        )));
    }
    // 200 halvings exhaust f64 resolution on any finite bracket.
    for _ in 0..200 {
        if hi - lo <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
