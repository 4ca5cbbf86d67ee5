//! Cross-module invariants over random admissible inputs.

use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use popcross::age::{self, AgeGrid, AgeProfile, AgeTimeRate, Shape};
use popcross::deterministic::solve_time_dependent;
use popcross::pgf::{joint_pgf_general, joint_pgf_grid, joint_pgf_solvable, marginal_pgf, MarginalState};
use popcross::stochastic::{simulate_trajectory, InitialLaw};
use popcross::{RateFunction, RatePair};

fn nonincreasing_rate() -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|l| RateFunction::constant(l).unwrap()),
        (0.2f64..3.0, 0.0f64..2.0).prop_map(|(a, d)| RateFunction::homographic(a, a + d).unwrap()),
        (0.2f64..3.0, 0.0f64..2.0, 0.1f64..2.0).prop_map(|(a, d, al)| RateFunction::exp_decay(a, a + d, al).unwrap()),
    ]
}

fn law() -> impl Strategy<Value = InitialLaw> {
    prop_oneof![
        Just(InitialLaw::single()),
        (1u64..4).prop_map(InitialLaw::fixed),
        (0.1f64..1.0, 0.2f64..1.0).prop_map(|(p0, p)| InitialLaw::thinned(p0, p).unwrap()),
    ]
}

fn disk_point() -> impl Strategy<Value = C> {
    (0.0f64..=1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, th)| C::from_polar(r, th))
}

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (0.05f64..2.0).prop_map(|v| Shape::constant(v).unwrap()),
        (0.02f64..0.5, -0.3f64..0.3).prop_map(|(a, g)| Shape::gompertz(a, g).unwrap()),
        (0.2f64..2.0, 0.0f64..1.0, 0.5f64..2.0).prop_map(|(v, s, w)| Shape::window(v, s, s + w).unwrap()),
    ]
}

fn profile() -> impl Strategy<Value = AgeProfile> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|mass| AgeProfile::Cohort { mass }),
        (0.5f64..3.0, 0.5f64..3.0).prop_map(|(mass, max_age)| AgeProfile::Uniform { mass, max_age }),
        (0.5f64..3.0, 0.5f64..3.0).prop_map(|(mass, rate)| AgeProfile::Exponential { mass, rate }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paths_conserve_individuals(b in nonincreasing_rate(), d in nonincreasing_rate(), l in law(), seed: u64) {
        let rp = RatePair::new(b, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tr = simulate_trajectory(&rp, &l, 3.0, &mut rng);
        for s in tr.states() {
            prop_assert_eq!(s.n + s.nd, s.nb);
        }
        if let Some(te) = tr.extinction_time {
            prop_assert_eq!(tr.state_at(te).n, 0);
        }
    }

    #[test]
    fn determinant_is_conserved(b in nonincreasing_rate(), d in nonincreasing_rate(), t in 0.0f64..1.5) {
        let g = joint_pgf_grid(&RatePair::new(b, d), t, 16).unwrap();
        prop_assert!(g.max_det_drift() <= 1e-9, "{}", g.max_det_drift());
    }

    #[test]
    fn solvable_form_agrees_with_general(
        b in nonincreasing_rate(), rho in 0.1f64..3.0, l in law(), t in 0.0f64..2.0,
        zb in disk_point(), zd in disk_point(),
    ) {
        let rp = RatePair::proportional(b.clone(), rho).unwrap();
        let general = joint_pgf_general(&rp, &l, t, zb, zd).unwrap();
        let closed = joint_pgf_solvable(&b, rho, &l, t, zb, zd).unwrap();
        prop_assert!((general - closed).norm() <= 1e-8, "{general} vs {closed}");
    }

    #[test]
    fn joint_reduces_to_marginal_on_the_circle(
        b in nonincreasing_rate(), d in nonincreasing_rate(), l in law(), t in 0.0f64..2.0, th in 0.0f64..std::f64::consts::TAU,
    ) {
        let rp = RatePair::new(b, d);
        let z = C::from_polar(1.0, th);
        let joint = joint_pgf_general(&rp, &l, t, z, z.inv()).unwrap();
        let marg = marginal_pgf(&rp, &l, t, z).unwrap();
        prop_assert!((joint - marg).norm() <= 1e-8);
    }

    #[test]
    fn marginal_slope_at_one_is_the_mean(b in nonincreasing_rate(), d in nonincreasing_rate(), l in law(), t in 0.1f64..3.0) {
        let rp = RatePair::new(b, d);
        let mean = solve_time_dependent(&rp, l.mean(), &[t]).unwrap().x[0];
        // Richardson-extrapolated one-sided difference from inside the disk,
        // with the step scaled to the mean so the curvature term stays small.
        let h = 1e-4 / mean.max(1.0);
        let slope = |h: f64| (1.0 - marginal_pgf(&rp, &l, t, C::new(1.0 - h, 0.0)).unwrap().re) / h;
        let est = 2.0 * slope(h / 2.0) - slope(h);
        prop_assert!((est - mean).abs() <= 1e-6 * mean, "{est} vs {mean}");
    }

    #[test]
    fn eta_over_psi_lower_bound(b in nonincreasing_rate(), d in nonincreasing_rate(), t in 0.01f64..10.0) {
        let rp = RatePair::new(b, d);
        let s = MarginalState::new(&rp, t).unwrap();
        prop_assert!(s.eta_over_psi > 1.0 - s.inv_psi);
    }

    #[test]
    fn renewal_solution_is_consistent(birth in shape(), death in shape(), p in profile()) {
        let grid = AgeGrid::new(0.02, 3.0).with_snapshots(vec![0.0, 1.5, 3.0]);
        let sol = age::solve_time_independent_renewal(&birth, &death, &p, &grid).unwrap();
        let c = &sol.curves;
        for j in 0..c.len() {
            prop_assert!((c.xb[j] - c.xd[j] - c.x[j]).abs() <= 1e-9 * c.xb[j]);
        }
        for col in &sol.field.density {
            prop_assert!(col.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn full_solution_is_consistent(birth in shape(), death in shape(), p in profile()) {
        let grid = AgeGrid::new(0.02, 3.0).with_snapshots(vec![0.0, 3.0]);
        let sol = age::solve_full(
            &AgeTimeRate::TimeIndependent { rate: birth },
            &AgeTimeRate::TimeIndependent { rate: death },
            &p,
            &grid,
        )
        .unwrap();
        let c = &sol.curves;
        for j in 0..c.len() {
            prop_assert!((c.xb[j] - c.xd[j] - c.x[j]).abs() <= 1e-9 * c.xb[j]);
            prop_assert!(c.x[j] > 0.0);
        }
        for col in &sol.field.density {
            prop_assert!(col.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn age_independent_chain_reduces_to_means(b in nonincreasing_rate(), d in nonincreasing_rate(), p in profile()) {
        let rp = RatePair::new(b, d);
        let grid = AgeGrid::new(0.01, 2.0);
        let sol = age::solve_age_independent(&rp, &p, &grid).unwrap();
        let means = solve_time_dependent(&rp, p.mass(), &sol.curves.t).unwrap();
        for j in 0..means.len() {
            prop_assert!((sol.curves.x[j] / means.x[j] - 1.0).abs() <= 1e-9);
        }
    }
}
