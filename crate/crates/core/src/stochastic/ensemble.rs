//! Monte Carlo ensembles with per-trajectory RNG streams.
//!
//! Trajectory `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`,
//! so results do not depend on thread count or scheduling. Trajectories are
//! processed in fixed-size chunks whose partial results are merged in index
//! order; moment sums are exact integers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::initial::InitialLaw;
use super::trajectory::{
    crossing_of_death, run_chain, simulate_from, Crossing, CrossingType, EventKind, Limits, State,
    StopReason, Trajectory,
};
use crate::deterministic::validate_grid;
use crate::error::{Error, Result};
use crate::rates::RatePair;

const CHUNK: usize = 256;

pub(crate) fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Proportion `k/m` with binomial standard error.
    pub fn proportion(k: u64, m: u64) -> Self {
        let p = k as f64 / m as f64;
        Self { value: p, se: (p * (1.0 - p) / m as f64).sqrt() }
    }

    /// `|value − target| / se`; infinite when `se = 0` and the values differ.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

/// Empirical law of an integer quantity at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    pub t: f64,
    /// Value of `counts[0]`.
    pub min: i64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalPmf {
    fn from_values(t: f64, values: impl Iterator<Item = i64> + Clone) -> Self {
        let min = values.clone().min().unwrap_or(0);
        let max = values.clone().max().unwrap_or(0);
        let mut counts = vec![0u64; (max - min + 1) as usize];
        let mut total = 0;
        for v in values {
            counts[(v - min) as usize] += 1;
            total += 1;
        }
        Self { t, min, counts, total }
    }

    pub fn prob(&self, k: i64) -> f64 {
        if k < self.min || k >= self.min + self.counts.len() as i64 {
            0.0
        } else {
            self.counts[(k - self.min) as usize] as f64 / self.total as f64
        }
    }

    pub fn support(&self) -> std::ops::Range<i64> {
        self.min..self.min + self.counts.len() as i64
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|k| k as f64 * self.prob(k)).sum()
    }

    /// Total variation distance to a reference law over the union support.
    pub fn total_variation(&self, reference: impl Fn(i64) -> f64, reference_support: std::ops::Range<i64>) -> f64 {
        let lo = self.min.min(reference_support.start);
        let hi = (self.min + self.counts.len() as i64).max(reference_support.end);
        0.5 * (lo..hi).map(|k| (self.prob(k) - reference(k)).abs()).sum::<f64>()
    }
}

/// Exact integer sums `Σ N_b^i N_d^j` (`i, j ≤ 2`) plus `Σ N³`, `Σ N⁴`.
#[derive(Debug, Clone, Default, PartialEq)]
struct Moments {
    bd: [[u128; 3]; 3],
    n3: u128,
    n4: u128,
    zeros: u64,
}

impl Moments {
    fn add(&mut self, s: State) {
        let (b, d, n) = (s.nb as u128, s.nd as u128, s.n as u128);
        let bp = [1, b, b * b];
        let dp = [1, d, d * d];
        for i in 0..3 {
            for j in 0..3 {
                self.bd[i][j] += bp[i] * dp[j];
            }
        }
        self.n3 += n * n * n;
        self.n4 += n * n * n * n;
        self.zeros += (s.n == 0) as u64;
    }

    fn merge(&mut self, o: &Moments) {
        for i in 0..3 {
            for j in 0..3 {
                self.bd[i][j] += o.bd[i][j];
            }
        }
        self.n3 += o.n3;
        self.n4 += o.n4;
        self.zeros += o.zeros;
    }
}

/// Ensemble estimates at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub t: f64,
    pub mean_n: Estimate,
    pub var_n: Estimate,
    pub mean_nb: Estimate,
    pub mean_nd: Estimate,
    pub cov_bd: Estimate,
    /// `P(τ_e ≤ t)`.
    pub extinct: Estimate,
    /// `P(τ_Δ ≤ t)`, any crossing type.
    pub crossed: Estimate,
    pub crossed_type1: Estimate,
    pub crossed_type2: Estimate,
}

fn grid_estimate(t: f64, mo: &Moments, m: u64, crossed: [u64; 3]) -> GridEstimate {
    let mf = m as f64;
    let e = |i: usize, j: usize| mo.bd[i][j] as f64 / mf;
    let (mb, md) = (e(1, 0), e(0, 1));
    let (ebb, edd, ebd) = (e(2, 0), e(0, 2), e(1, 1));
    let mn = mb - md;
    let en2 = ebb - 2.0 * ebd + edd;
    let (en3, en4) = (mo.n3 as f64 / mf, mo.n4 as f64 / mf);
    let var_n = en2 - mn * mn;
    let mu4 = en4 - 4.0 * mn * en3 + 6.0 * mn * mn * en2 - 3.0 * mn.powi(4);
    let cov = ebd - mb * md;
    // E[(B − μ_b)²(D − μ_d)²] expanded in raw moments.
    let c = [1.0, -2.0, 1.0];
    let mut m22 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            m22 += c[i] * mb.powi(2 - i as i32) * c[j] * md.powi(2 - j as i32) * e(i, j);
        }
    }
    let bessel = mf / (mf - 1.0);
    let sd_se = |v: f64| (v.max(0.0) / mf).sqrt();
    GridEstimate {
        t,
        mean_n: Estimate { value: mn, se: sd_se(var_n * bessel) },
        var_n: Estimate { value: var_n * bessel, se: sd_se(mu4 - var_n * var_n) },
        mean_nb: Estimate { value: mb, se: sd_se((ebb - mb * mb) * bessel) },
        mean_nd: Estimate { value: md, se: sd_se((edd - md * md) * bessel) },
        cov_bd: Estimate { value: cov * bessel, se: sd_se(m22 - cov * cov) },
        extinct: Estimate::proportion(mo.zeros, m),
        crossed: Estimate::proportion(crossed[0] + crossed[1] + crossed[2], m),
        crossed_type1: Estimate::proportion(crossed[1], m),
        crossed_type2: Estimate::proportion(crossed[2], m),
    }
}

/// Rate of `Δ`-crossing events per unit time over `[t0, t1)`, counting every
/// crossing of each type, not only the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingIntensity {
    pub t0: f64,
    pub t1: f64,
    pub type1: Estimate,
    pub type2: Estimate,
}

/// How the first crossing relates to extinction, over paths that went extinct.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRelation {
    pub extinct: u64,
    /// Paths that reached `Δ ≥ 0` within the run.
    pub crossed: u64,
    /// Extinct paths whose first crossing came strictly before extinction.
    pub crossed_before_extinction: u64,
    /// Extinct paths whose first crossing was the extinction event itself.
    pub crossed_at_extinction: u64,
}

impl StoppingRelation {
    fn record(&mut self, extinction: Option<f64>, crossing: Option<Crossing>) {
        self.crossed += crossing.is_some() as u64;
        if let Some(te) = extinction {
            self.extinct += 1;
            let tc = crossing.expect("extinction implies a crossing").time;
            if tc < te {
                self.crossed_before_extinction += 1;
            } else {
                self.crossed_at_extinction += 1;
            }
        }
    }

    fn merge(&mut self, o: &Self) {
        self.extinct += o.extinct;
        self.crossed += o.crossed;
        self.crossed_before_extinction += o.crossed_before_extinction;
        self.crossed_at_extinction += o.crossed_at_extinction;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub trajectories: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Times at which moments and cdfs are estimated.
    pub grid: Vec<f64>,
    /// Times at which the laws of `N` and `Δ` are tabulated.
    pub pmf_times: Vec<f64>,
    /// Full event logs are kept only when `trajectories` is at most this.
    pub keep_trajectories: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            trajectories: 10_000,
            seed: 0,
            horizon: 1.0,
            grid: vec![0.0, 1.0],
            pmf_times: Vec::new(),
            keep_trajectories: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub trajectories: u64,
    pub seed: u64,
    pub horizon: f64,
    pub grid: Vec<GridEstimate>,
    /// One entry per interval between consecutive grid times.
    pub intensities: Vec<CrossingIntensity>,
    pub pmf_living: Vec<EmpiricalPmf>,
    pub pmf_delta: Vec<EmpiricalPmf>,
    pub relation: StoppingRelation,
    /// Per trajectory, in index order; `None` means no extinction within the horizon.
    #[serde(skip)]
    pub extinction_times: Vec<Option<f64>>,
    /// Per trajectory, in index order.
    #[serde(skip)]
    pub first_crossings: Vec<Option<Crossing>>,
    #[serde(skip)]
    pub paths: Vec<Trajectory>,
}

impl EnsembleSummary {
    /// Fraction of runs extinct by the horizon.
    pub fn extinct_fraction(&self) -> Estimate {
        Estimate::proportion(self.relation.extinct, self.trajectories)
    }

    /// Quantiles of the first crossing time over runs that crossed.
    pub fn crossing_quantiles(&self, qs: &[f64]) -> Vec<Option<f64>> {
        let mut ts: Vec<f64> = self.first_crossings.iter().flatten().map(|c| c.time).collect();
        ts.sort_by(f64::total_cmp);
        qs.iter()
            .map(|&q| {
                if ts.is_empty() {
                    None
                } else {
                    let k = ((q * ts.len() as f64).ceil() as usize).clamp(1, ts.len()) - 1;
                    Some(ts[k])
                }
            })
            .collect()
    }
}

#[derive(Default)]
struct Partial {
    moments: Vec<Moments>,
    crossed: Vec<[u64; 3]>,
    interval_sum: Vec<[u64; 2]>,
    interval_sq: Vec<[u64; 2]>,
    pmf_states: Vec<Vec<State>>,
    extinction_times: Vec<Option<f64>>,
    first_crossings: Vec<Option<Crossing>>,
    relation: StoppingRelation,
    paths: Vec<Trajectory>,
}

impl Partial {
    fn new(n_grid: usize, n_pmf: usize) -> Self {
        Self {
            moments: vec![Moments::default(); n_grid],
            crossed: vec![[0; 3]; n_grid],
            interval_sum: vec![[0; 2]; n_grid.saturating_sub(1)],
            interval_sq: vec![[0; 2]; n_grid.saturating_sub(1)],
            pmf_states: vec![Vec::new(); n_pmf],
            ..Default::default()
        }
    }

    fn merge(&mut self, o: Partial) {
        for (a, b) in self.moments.iter_mut().zip(&o.moments) {
            a.merge(b);
        }
        for (a, b) in self.crossed.iter_mut().zip(&o.crossed) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        for (a, b) in self.interval_sum.iter_mut().zip(&o.interval_sum) {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.interval_sq.iter_mut().zip(&o.interval_sq) {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.pmf_states.iter_mut().zip(o.pmf_states) {
            a.extend(b);
        }
        self.extinction_times.extend(o.extinction_times);
        self.first_crossings.extend(o.first_crossings);
        self.relation.merge(&o.relation);
        self.paths.extend(o.paths);
    }
}

fn check_times(name: &str, ts: &[f64], horizon: f64) -> Result<()> {
    if let Some(&t) = ts.iter().find(|&&t| !(t >= 0.0 && t <= horizon)) {
        return Err(Error::domain(format!("{name} time {t} lies outside [0, horizon={horizon}]")));
    }
    Ok(())
}

fn crossing_index(kind: CrossingType) -> usize {
    match kind {
        CrossingType::Initial => 0,
        CrossingType::Type1 => 1,
        CrossingType::Type2 => 2,
    }
}

/// Simulates `trajectories` independent paths and summarises them.
pub fn run_ensemble(rp: &RatePair, law: &InitialLaw, opts: &EnsembleOptions) -> Result<EnsembleSummary> {
    if opts.trajectories < 2 {
        return Err(Error::domain("an ensemble needs at least two trajectories"));
    }
    if !(opts.horizon.is_finite() && opts.horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive and finite, got {}", opts.horizon)));
    }
    validate_grid(&opts.grid)?;
    check_times("grid", &opts.grid, opts.horizon)?;
    let mut pmf_times = opts.pmf_times.clone();
    check_times("pmf", &pmf_times, opts.horizon)?;
    pmf_times.sort_by(f64::total_cmp);

    let grid = &opts.grid;
    let keep = opts.trajectories <= opts.keep_trajectories;
    let limits = Limits { horizon: opts.horizon, max_population: None };
    let n_chunks = opts.trajectories.div_ceil(CHUNK);

    let chunk = |c: usize| -> Partial {
        let mut part = Partial::new(grid.len(), pmf_times.len());
        let mut interval_scratch = vec![[0u64; 2]; grid.len().saturating_sub(1)];
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(opts.trajectories);
        for i in lo..hi {
            let mut rng = stream_rng(opts.seed, i as u64);
            let n0 = law.sample(&mut rng);
            let mut gi = 0;
            let mut pi = 0;
            let mut first = (n0 == 0).then_some(Crossing { time: 0.0, kind: CrossingType::Initial });
            interval_scratch.iter_mut().for_each(|v| *v = [0, 0]);
            let mut times = Vec::new();
            let mut kinds = Vec::new();
            let out = run_chain(rp, n0, limits, &mut rng, |t, kind, before| {
                while gi < grid.len() && grid[gi] < t {
                    part.moments[gi].add(before);
                    gi += 1;
                }
                while pi < pmf_times.len() && pmf_times[pi] < t {
                    part.pmf_states[pi].push(before);
                    pi += 1;
                }
                if kind == EventKind::Death {
                    if let Some(k) = crossing_of_death(before.delta()) {
                        if first.is_none() {
                            first = Some(Crossing { time: t, kind: k });
                        }
                        let slot = grid.partition_point(|&g| g <= t);
                        if slot >= 1 && slot < grid.len() {
                            interval_scratch[slot - 1][crossing_index(k) - 1] += 1;
                        }
                    }
                }
                if keep {
                    times.push(t);
                    kinds.push(kind);
                }
            });
            for m in &mut part.moments[gi..] {
                m.add(out.state);
            }
            for p in &mut part.pmf_states[pi..] {
                p.push(out.state);
            }
            for (k, (s, q)) in interval_scratch
                .iter()
                .zip(part.interval_sum.iter_mut().zip(part.interval_sq.iter_mut()))
            {
                for j in 0..2 {
                    s[j] += k[j];
                    q[j] += k[j] * k[j];
                }
            }
            if let Some(c) = first {
                let from = grid.partition_point(|&g| g < c.time);
                for cr in &mut part.crossed[from..] {
                    cr[crossing_index(c.kind)] += 1;
                }
            }
            let extinction = (out.stop == StopReason::Extinct).then_some(out.time);
            part.relation.record(extinction, first);
            part.extinction_times.push(extinction);
            part.first_crossings.push(first);
            if keep {
                part.paths.push(Trajectory {
                    n0,
                    times,
                    kinds,
                    stop: out.stop,
                    end: out.time,
                    extinction_time: extinction,
                    first_crossing: first,
                });
            }
        }
        part
    };

    let parts: Vec<Partial> = (0..n_chunks).into_par_iter().map(chunk).collect();
    let mut total = Partial::new(grid.len(), pmf_times.len());
    for p in parts {
        total.merge(p);
    }

    let m = opts.trajectories as u64;
    let mf = m as f64;
    let grid_est = grid
        .iter()
        .zip(total.moments.iter().zip(&total.crossed))
        .map(|(&t, (mo, cr))| grid_estimate(t, mo, m, *cr))
        .collect();
    let intensities = grid
        .windows(2)
        .zip(total.interval_sum.iter().zip(&total.interval_sq))
        .map(|(w, (s, q))| {
            let dt = w[1] - w[0];
            let est = |j: usize| {
                let mean = s[j] as f64 / mf;
                let var = (q[j] as f64 / mf - mean * mean) * mf / (mf - 1.0);
                Estimate { value: mean / dt, se: (var.max(0.0) / mf).sqrt() / dt }
            };
            CrossingIntensity { t0: w[0], t1: w[1], type1: est(0), type2: est(1) }
        })
        .collect();
    let pmf_living = pmf_times
        .iter()
        .zip(&total.pmf_states)
        .map(|(&t, s)| EmpiricalPmf::from_values(t, s.iter().map(|s| s.n as i64)))
        .collect();
    let pmf_delta = pmf_times
        .iter()
        .zip(&total.pmf_states)
        .map(|(&t, s)| EmpiricalPmf::from_values(t, s.iter().map(State::delta)))
        .collect();

    Ok(EnsembleSummary {
        trajectories: m,
        seed: opts.seed,
        horizon: opts.horizon,
        grid: grid_est,
        intensities,
        pmf_living,
        pmf_delta,
        relation: total.relation,
        extinction_times: total.extinction_times,
        first_crossings: total.first_crossings,
        paths: total.paths,
    })
}

/// Empirical first-crossing law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstCrossingStats {
    /// `(t, P(τ_Δ ≤ t), P(type 1 by t), P(type 2 by t))` on the ensemble grid.
    pub cdf: Vec<(f64, f64, f64, f64)>,
    pub initial: u64,
    pub type1: u64,
    pub type2: u64,
    /// Runs with no crossing within the horizon.
    pub none: u64,
}

pub fn first_crossing_stats(summary: &EnsembleSummary) -> FirstCrossingStats {
    let mut counts = [0u64; 3];
    let mut none = 0;
    for c in &summary.first_crossings {
        match c {
            Some(c) => counts[crossing_index(c.kind)] += 1,
            None => none += 1,
        }
    }
    FirstCrossingStats {
        cdf: summary
            .grid
            .iter()
            .map(|g| (g.t, g.crossed.value, g.crossed_type1.value, g.crossed_type2.value))
            .collect(),
        initial: counts[0],
        type1: counts[1],
        type2: counts[2],
        none,
    }
}

/// Settings for [`run_extinction_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionOptions {
    pub trajectories: usize,
    pub seed: u64,
    /// Runs reaching this many living individuals are stopped and counted as
    /// surviving.
    pub max_population: u64,
    pub horizon: f64,
}

impl Default for ExtinctionOptions {
    fn default() -> Self {
        Self { trajectories: 100_000, seed: 0, max_population: 1000, horizon: f64::INFINITY }
    }
}

/// Long-run extinction and progeny statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionSummary {
    pub trajectories: u64,
    pub seed: u64,
    pub max_population: u64,
    pub extinct_fraction: Estimate,
    /// Runs stopped at the population cap.
    pub capped: u64,
    /// Runs still alive below the cap at the horizon.
    pub censored: u64,
    pub relation: StoppingRelation,
    /// `N_d(τ_e)` for each extinct run, in index order.
    #[serde(skip)]
    pub progeny: Vec<u64>,
}

impl ExtinctionSummary {
    pub fn progeny_mean(&self) -> Estimate {
        let n = self.progeny.len() as f64;
        let mean = self.progeny.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = self.progeny.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { value: mean, se: (var / n).sqrt() }
    }

    pub fn progeny_pmf(&self) -> EmpiricalPmf {
        EmpiricalPmf::from_values(f64::INFINITY, self.progeny.iter().map(|&v| v as i64))
    }
}

/// Runs paths until extinction, the population cap or the horizon.
pub fn run_extinction_ensemble(
    rp: &RatePair,
    law: &InitialLaw,
    opts: &ExtinctionOptions,
) -> Result<ExtinctionSummary> {
    if opts.trajectories < 2 {
        return Err(Error::domain("an ensemble needs at least two trajectories"));
    }
    if opts.max_population == 0 {
        return Err(Error::domain("population cap must be positive"));
    }
    if !(opts.horizon > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let limits = Limits { horizon: opts.horizon, max_population: Some(opts.max_population) };
    let n_chunks = opts.trajectories.div_ceil(CHUNK);
    let parts: Vec<(Vec<u64>, u64, u64, StoppingRelation)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let (mut progeny, mut capped, mut censored) = (Vec::new(), 0, 0);
            let mut rel = StoppingRelation::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(opts.trajectories) {
                let mut rng = stream_rng(opts.seed, i as u64);
                let n0 = law.sample(&mut rng);
                let tr = simulate_from(rp, n0, limits, &mut rng);
                match tr.stop {
                    StopReason::Extinct => progeny.push(tr.state_at(tr.end).nd),
                    StopReason::PopulationCap => capped += 1,
                    StopReason::Horizon => censored += 1,
                }
                rel.record(tr.extinction_time, tr.first_crossing);
            }
            (progeny, capped, censored, rel)
        })
        .collect();
    let mut progeny = Vec::new();
    let (mut capped, mut censored) = (0, 0);
    let mut relation = StoppingRelation::default();
    for (p, c, s, r) in parts {
        progeny.extend(p);
        capped += c;
        censored += s;
        relation.merge(&r);
    }
    let m = opts.trajectories as u64;
    Ok(ExtinctionSummary {
        trajectories: m,
        seed: opts.seed,
        max_population: opts.max_population,
        extinct_fraction: Estimate::proportion(relation.extinct, m),
        capped,
        censored,
        relation,
        progeny,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(m: usize, horizon: f64, grid: Vec<f64>) -> EnsembleOptions {
        EnsembleOptions { trajectories: m, seed: 42, horizon, grid, ..Default::default() }
    }

    #[test]
    fn mean_tracks_exponential_growth() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let s = run_ensemble(&rp, &InitialLaw::single(), &opts(10_000, 5.0, vec![0.0, 1.0, 2.0, 3.0])).unwrap();
        for g in &s.grid[1..] {
            assert!(g.mean_n.z_score(g.t.exp()) < 3.0, "{g:?}");
        }
        assert_eq!(s.grid[0].mean_n.value, 1.0);
        assert_eq!(s.grid[0].var_n.value, 0.0);
    }

    #[test]
    fn seed_determinism_is_bitwise() {
        let rp = RatePair::constant(1.3, 1.0).unwrap();
        let law = InitialLaw::thinned(0.8, 0.4).unwrap();
        let mut o = opts(3000, 2.0, vec![0.0, 0.5, 1.0, 2.0]);
        o.pmf_times = vec![1.0];
        let a = run_ensemble(&rp, &law, &o).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_ensemble(&rp, &law, &o).unwrap());
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn initial_variance_matches_law() {
        let law = InitialLaw::thinned(1.0, 0.5).unwrap();
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let s = run_ensemble(&rp, &law, &opts(20_000, 0.1, vec![0.0])).unwrap();
        assert!(s.grid[0].var_n.z_score(law.variance()) < 3.0);
    }

    #[test]
    fn pmf_sums_to_one_and_keeps_paths() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let mut o = opts(500, 1.0, vec![0.0, 1.0]);
        o.pmf_times = vec![0.5, 1.0];
        let s = run_ensemble(&rp, &InitialLaw::single(), &o).unwrap();
        for p in s.pmf_living.iter().chain(&s.pmf_delta) {
            let total: f64 = p.support().map(|k| p.prob(k)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(s.paths.len(), 500);
        for (p, c) in s.paths.iter().zip(&s.first_crossings) {
            assert_eq!(p.first_crossing, *c);
        }
    }

    #[test]
    fn grid_beyond_horizon_is_rejected() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let r = run_ensemble(&rp, &InitialLaw::single(), &opts(10, 1.0, vec![0.0, 2.0]));
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = run_ensemble(&rp, &InitialLaw::single(), &opts(1, 1.0, vec![0.0]));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn extinction_never_precedes_crossing() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let law = InitialLaw::thinned(1.0, 0.5).unwrap();
        let s = run_ensemble(&rp, &law, &opts(5000, 4.0, vec![0.0, 4.0])).unwrap();
        for (te, c) in s.extinction_times.iter().zip(&s.first_crossings) {
            if let Some(te) = te {
                assert!(c.unwrap().time <= *te);
            }
        }
        let r = s.relation;
        assert_eq!(r.extinct, r.crossed_at_extinction + r.crossed_before_extinction);
        assert!(r.crossed >= r.extinct);
    }

    #[test]
    fn covariance_positive_for_random_initial_size() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let law = InitialLaw::thinned(1.0, 0.5).unwrap();
        let s = run_ensemble(&rp, &law, &opts(5000, 4.0, vec![0.0, 4.0])).unwrap();
        assert!(s.grid[1].cov_bd.value > 3.0 * s.grid[1].cov_bd.se);
    }

    #[test]
    fn extinction_ensemble_for_single_ancestor() {
        let rp = RatePair::constant(2.0, 1.0).unwrap();
        let o = ExtinctionOptions { trajectories: 20_000, seed: 1, ..Default::default() };
        let s = run_extinction_ensemble(&rp, &InitialLaw::single(), &o).unwrap();
        assert!(s.extinct_fraction.z_score(0.5) < 3.0);
        assert_eq!(s.censored, 0);
        assert_eq!(s.progeny.len() as u64, s.relation.extinct);
    }
}
