//! First and second moments of `(N_b, N_d)` from their closed ODE system.
//!
//! With `x = x_b − x_d` and `S_bb = E N_b²`, `S_dd = E N_d²`, `S_bd = E N_b N_d`:
//!
//! ```text
//! Ṡ_bb = 2λ_b (S_bb − S_bd) + λ_b x
//! Ṡ_dd = 2λ_d (S_bd − S_dd) + λ_d x
//! Ṡ_bd = λ_d S_bb − λ_b S_dd + (λ_b − λ_d) S_bd
//! ```
//!
//! The `λ x` terms come from the `+1` in `(N + 1)² − N²` for each jump.

use serde::{Deserialize, Serialize};

use crate::deterministic::validate_grid;
use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use crate::rates::RatePair;
use crate::stochastic::InitialLaw;

/// Moment curves on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub t: Vec<f64>,
    pub xb: Vec<f64>,
    pub xd: Vec<f64>,
    pub ebb: Vec<f64>,
    pub edd: Vec<f64>,
    pub ebd: Vec<f64>,
    /// `Cov(N_b, N_d)`.
    pub cov: Vec<f64>,
    /// `e^{−2Λ(t)} Cov(N_b, N_d)`.
    pub scaled_cov: Vec<f64>,
}

/// RK4 at step `10⁻³/λ⁺`, landing exactly on each grid time.
pub fn moment_odes(rp: &RatePair, law: &InitialLaw, grid: &[f64]) -> Result<SecondMoments> {
    validate_grid(grid)?;
    let f = |t: f64, y: [f64; 5]| {
        let (lb, ld) = (rp.birth.rate(t), rp.death.rate(t));
        let [xb, xd, sbb, sdd, sbd] = y;
        let x = xb - xd;
        [
            lb * x,
            ld * x,
            2.0 * lb * (sbb - sbd) + lb * x,
            2.0 * ld * (sbd - sdd) + ld * x,
            ld * sbb - lb * sdd + (lb - ld) * sbd,
        ]
    };
    let h_max = 1e-3 / rp.birth.upper_bound().max(rp.death.upper_bound());
    let mut y = [law.mean(), 0.0, law.second_moment(), 0.0, 0.0];
    let mut t = 0.0;
    let mut out = SecondMoments {
        t: grid.to_vec(),
        xb: vec![],
        xd: vec![],
        ebb: vec![],
        edd: vec![],
        ebd: vec![],
        cov: vec![],
        scaled_cov: vec![],
    };
    for &tg in grid {
        if tg > t {
            let n = ((tg - t) / h_max).ceil() as usize;
            let h = (tg - t) / n as f64;
            for i in 0..n {
                y = rk4_step(&f, t + i as f64 * h, y, h);
            }
            t = tg;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!("moment ODE overflowed before t={tg}")));
        }
        let cov = y[4] - y[0] * y[1];
        out.xb.push(y[0]);
        out.xd.push(y[1]);
        out.ebb.push(y[2]);
        out.edd.push(y[3]);
        out.ebd.push(y[4]);
        out.cov.push(cov);
        out.scaled_cov.push(cov * (-2.0 * rp.net_hazard(tg)).exp());
    }
    Ok(out)
}

/// `lim e^{−2λt} Cov(N_b, N_d)` for constant rates:
/// `λ_b λ_d/λ² · Var W` with `Var W = E N(0)·(λ_b + λ_d)/λ + Var N(0)`,
/// where `W = lim e^{−λt} N(t)`.
pub fn scaled_covariance_limit(lb: f64, ld: f64, law: &InitialLaw) -> Result<f64> {
    if !(lb > ld && ld > 0.0) {
        return Err(Error::regime(format!("covariance limit needs lb > ld > 0, got {lb}, {ld}")));
    }
    let l = lb - ld;
    let var_w = law.mean() * (lb + ld) / l + law.variance();
    Ok(lb * ld / (l * l) * var_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::solve_constant;

    #[test]
    fn initial_condition() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let law = InitialLaw::thinned(1.0, 0.5).unwrap();
        let m = moment_odes(&rp, &law, &[0.0, 1.0]).unwrap();
        assert_eq!((m.ebb[0], m.edd[0], m.ebd[0]), (law.second_moment(), 0.0, 0.0));
    }

    #[test]
    fn means_match_deterministic_curves() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let law = InitialLaw::thinned(1.0, 0.5).unwrap();
        let grid = [0.0, 1.0, 2.5];
        let m = moment_odes(&rp, &law, &grid).unwrap();
        let c = solve_constant(2.0, 1.0, law.mean(), &grid).unwrap();
        for i in 0..3 {
            assert!((m.xb[i] - c.xb[i]).abs() / c.xb[i] < 1e-12);
            if i > 0 {
                assert!((m.xd[i] - c.xd[i]).abs() / c.xd[i] < 1e-12);
            }
        }
    }

    #[test]
    fn variance_of_living_matches_pgf_formula() {
        // Var N(t) = S_bb − 2 S_bd + S_dd − x² against x0²(2p−1)ψ² + x0ψ(1+2η)
        // for the geometric law with p0 = 1, where x0 = 1/q.
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let p = 0.5;
        let law = InitialLaw::thinned(1.0, p).unwrap();
        let t = 1.5f64;
        let m = moment_odes(&rp, &law, &[t]).unwrap();
        let x = m.xb[0] - m.xd[0];
        let var = m.ebb[0] - 2.0 * m.ebd[0] + m.edd[0] - x * x;
        let psi = t.exp();
        let eta = psi * 2.0 * (1.0 - (-t).exp());
        let x0 = law.mean();
        let exact = x0 * x0 * (2.0 * p - 1.0) * psi * psi + x0 * psi * (1.0 + 2.0 * eta);
        assert!((var - exact).abs() / exact < 1e-10, "{var} vs {exact}");
    }

    #[test]
    fn scaled_covariance_limits() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let geo = InitialLaw::thinned(1.0, 0.5).unwrap();
        assert_eq!(scaled_covariance_limit(2.0, 1.0, &geo).unwrap(), 16.0);
        assert_eq!(scaled_covariance_limit(2.0, 1.0, &InitialLaw::single()).unwrap(), 6.0);
        let m = moment_odes(&rp, &geo, &[15.0]).unwrap();
        assert!((m.scaled_cov[0] - 16.0).abs() < 1e-3);
        let m = moment_odes(&rp, &InitialLaw::single(), &[15.0]).unwrap();
        assert!((m.scaled_cov[0] - 6.0).abs() < 1e-3);
    }
}
