//! Running integrals of samples on a uniform grid.

/// `out[j] ≈ ∫_0^{t_j} f` for samples `f[j] = f(j h)`.
///
/// Each step integrates the cubic through the four nearest samples (shifted
/// inward at the ends), so the rule is fourth order for smooth `f`. Fewer than
/// four samples fall back to the trapezoid rule.
pub fn cumulative_uniform(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for j in 1..n {
        let step = if n < 4 {
            0.5 * h * (f[j - 1] + f[j])
        } else if j == 1 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if j == n - 1 {
            h / 24.0 * (f[j - 3] - 5.0 * f[j - 2] + 19.0 * f[j - 1] + 9.0 * f[j])
        } else {
            h / 24.0 * (-f[j - 2] + 13.0 * f[j - 1] + 13.0 * f[j] - f[j + 1])
        };
        out[j] = out[j - 1] + step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubics_are_exact() {
        let h = 0.1;
        let f: Vec<f64> = (0..12).map(|j| (j as f64 * h).powi(3) - 2.0 * j as f64 * h).collect();
        let out = cumulative_uniform(&f, h);
        for (j, v) in out.iter().enumerate() {
            let t = j as f64 * h;
            assert!((v - (t.powi(4) / 4.0 - t * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn fourth_order_on_exponential() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|j| (j as f64 * h).exp()).collect();
            (cumulative_uniform(&f, h)[n] - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(80) / err(160);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn short_inputs_use_trapezoid() {
        assert_eq!(cumulative_uniform(&[1.0, 3.0], 0.5), vec![0.0, 1.0]);
        assert!(cumulative_uniform(&[], 1.0).is_empty());
    }
}
