//! Exact simulation of the linear birth-death chain by thinning.
//!
//! In state `n` at time `t`, candidate events arrive at the constant rate
//! `n(λ_b⁺ + λ_d⁺)`. A candidate at `t'` is a birth with probability
//! `λ_b(t')/(λ_b⁺ + λ_d⁺)`, a death with probability
//! `λ_d(t')/(λ_b⁺ + λ_d⁺)`, and is discarded otherwise.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::rates::RatePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    Death,
}

/// `(N, N_b, N_d)` with `N = N_b − N_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct State {
    pub n: u64,
    pub nb: u64,
    pub nd: u64,
}

impl State {
    pub fn initial(n0: u64) -> Self {
        Self { n: n0, nb: n0, nd: 0 }
    }

    /// `Δ = 2N_d − N_b`.
    pub fn delta(&self) -> i64 {
        2 * self.nd as i64 - self.nb as i64
    }

    fn apply(&mut self, kind: EventKind) {
        match kind {
            EventKind::Birth => {
                self.n += 1;
                self.nb += 1;
            }
            EventKind::Death => {
                self.n -= 1;
                self.nd += 1;
            }
        }
    }
}

/// How `Δ` first reached a nonnegative value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingType {
    /// `Δ(0) ≥ 0`, which happens only for `N(0) = 0`.
    Initial,
    /// A death moved `Δ` from −1 to +1.
    Type1,
    /// A death moved `Δ` from −2 to 0.
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time: f64,
    pub kind: CrossingType,
}

/// Classifies a death that starts from `Δ = delta_before`.
pub(crate) fn crossing_of_death(delta_before: i64) -> Option<CrossingType> {
    match delta_before {
        -1 => Some(CrossingType::Type1),
        -2 => Some(CrossingType::Type2),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Extinct,
    Horizon,
    /// `N` reached the configured population cap.
    PopulationCap,
}

/// Stopping rules for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub horizon: f64,
    pub max_population: Option<u64>,
}

/// Final state of [`run_chain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub state: State,
    pub stop: StopReason,
    /// Extinction time, cap time, or the horizon.
    pub time: f64,
}

/// Runs the chain from `n0` ancestors, calling `on_event(t, kind, before)` for
/// every accepted event before it is applied.
pub fn run_chain<R, F>(rp: &RatePair, n0: u64, limits: Limits, rng: &mut R, mut on_event: F) -> Outcome
where
    R: Rng + ?Sized,
    F: FnMut(f64, EventKind, State),
{
    let envelope = rp.envelope();
    let mut state = State::initial(n0);
    let mut t = 0.0;
    loop {
        if state.n == 0 {
            return Outcome { state, stop: StopReason::Extinct, time: t };
        }
        if limits.max_population.is_some_and(|cap| state.n >= cap) {
            return Outcome { state, stop: StopReason::PopulationCap, time: t };
        }
        let e: f64 = Exp1.sample(rng);
        t += e / (state.n as f64 * envelope);
        if t > limits.horizon {
            return Outcome { state, stop: StopReason::Horizon, time: limits.horizon };
        }
        let u = rng.random::<f64>() * envelope;
        let lb = rp.birth.rate(t);
        let kind = if u < lb {
            EventKind::Birth
        } else if u < lb + rp.death.rate(t) {
            EventKind::Death
        } else {
            continue;
        };
        on_event(t, kind, state);
        state.apply(kind);
    }
}

/// Full event log of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n0: u64,
    pub times: Vec<f64>,
    pub kinds: Vec<EventKind>,
    pub stop: StopReason,
    /// Time at which simulation stopped.
    pub end: f64,
    pub extinction_time: Option<f64>,
    pub first_crossing: Option<Crossing>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State right after all events at times `≤ t`.
    pub fn state_at(&self, t: f64) -> State {
        let k = self.times.partition_point(|&s| s <= t);
        let mut s = State::initial(self.n0);
        for &kind in &self.kinds[..k] {
            s.apply(kind);
        }
        s
    }

    /// States after each event, starting with the initial state.
    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        let mut s = State::initial(self.n0);
        std::iter::once(s).chain(self.kinds.iter().map(move |&k| {
            s.apply(k);
            s
        }))
    }
}

/// Simulates one path from `n0` ancestors and keeps the whole event log.
pub fn simulate_from<R: Rng + ?Sized>(rp: &RatePair, n0: u64, limits: Limits, rng: &mut R) -> Trajectory {
    let mut times = Vec::new();
    let mut kinds = Vec::new();
    let mut first_crossing = (n0 == 0).then_some(Crossing { time: 0.0, kind: CrossingType::Initial });
    let out = run_chain(rp, n0, limits, rng, |t, kind, before| {
        times.push(t);
        kinds.push(kind);
        if first_crossing.is_none() && kind == EventKind::Death {
            if let Some(k) = crossing_of_death(before.delta()) {
                first_crossing = Some(Crossing { time: t, kind: k });
            }
        }
    });
    Trajectory {
        n0,
        times,
        kinds,
        stop: out.stop,
        end: out.time,
        extinction_time: (out.stop == StopReason::Extinct).then_some(out.time),
        first_crossing,
    }
}

/// Draws `N(0)` from `law` and simulates up to `horizon`.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    rp: &RatePair,
    law: &super::InitialLaw,
    horizon: f64,
    rng: &mut R,
) -> Trajectory {
    let n0 = law.sample(rng);
    simulate_from(rp, n0, Limits { horizon, max_population: None }, rng)
}
