use num_complex::Complex64;

/// A state vector that RK4 can advance.
pub trait OdeState: Copy {
    /// Returns `self + h * k`.
    fn axpy(self, h: f64, k: Self) -> Self;

    fn is_finite(&self) -> bool;
}

impl<const N: usize> OdeState for [f64; N] {
    fn axpy(mut self, h: f64, k: Self) -> Self {
        for (y, k) in self.iter_mut().zip(k) {
            *y += h * k;
        }
        self
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl<const N: usize> OdeState for [Complex64; N] {
    fn axpy(mut self, h: f64, k: Self) -> Self {
        for (y, k) in self.iter_mut().zip(k) {
            *y += k * h;
        }
        self
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// One classical fourth-order Runge-Kutta step of `y' = f(t, y)`.
pub fn rk4_step<S, F>(f: &F, t: f64, y: S, h: f64) -> S
where
    S: OdeState,
    F: Fn(f64, S) -> S,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y.axpy(0.5 * h, k1));
    let k3 = f(t + 0.5 * h, y.axpy(0.5 * h, k2));
    let k4 = f(t + h, y.axpy(h, k3));
    y.axpy(h / 6.0, k1)
        .axpy(h / 3.0, k2)
        .axpy(h / 3.0, k3)
        .axpy(h / 6.0, k4)
}

/// Integrates from `t0` to `t1` with equal steps no longer than `max_step`.
pub fn rk4_integrate<S, F>(f: &F, t0: f64, y0: S, t1: f64, max_step: f64) -> S
where
    S: OdeState,
    F: Fn(f64, S) -> S,
{
    if t1 <= t0 {
        return y0;
    }
    let n = ((t1 - t0) / max_step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for i in 0..n {
        y = rk4_step(f, t0 + i as f64 * h, y, h);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_is_fourth_order() {
        let f = |_t: f64, y: [f64; 1]| [y[0]];
        let err = |h: f64| (rk4_integrate(&f, 0.0, [1.0], 1.0, h)[0] - 1f64.exp()).abs();
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn complex_rotation() {
        let i = Complex64::new(0.0, 1.0);
        let f = |_t: f64, y: [Complex64; 1]| [i * y[0]];
        let y = rk4_integrate(&f, 0.0, [Complex64::new(1.0, 0.0)], std::f64::consts::PI, 1e-3);
        assert!((y[0] + 1.0).norm() < 1e-10);
    }
}
