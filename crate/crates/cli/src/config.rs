//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use popcross::age::{AgeGrid, AgeProfile, AgeTimeRate};
use popcross::deterministic::{uniform_grid, validate_grid, TerminalCensus};
use popcross::stochastic::InitialLaw;
use popcross::{RateFunction, RatePair};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Deterministic,
    Stochastic,
    Pgf,
    Age,
}

/// One output table; each is written as `<name>.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Report {
    Curves,
    Crossover,
    Inference,
    Spectrum,
    Ensemble,
    Pmf,
    Delta,
    Crossings,
    Extinction,
    Moments,
    CrossingRates,
    Progeny,
    Field,
    Effective,
    Laplace,
}

impl Report {
    pub fn name(self) -> &'static str {
        match self {
            Self::Curves => "curves",
            Self::Crossover => "crossover",
            Self::Inference => "inference",
            Self::Spectrum => "spectrum",
            Self::Ensemble => "ensemble",
            Self::Pmf => "pmf",
            Self::Delta => "delta",
            Self::Crossings => "crossings",
            Self::Extinction => "extinction",
            Self::Moments => "moments",
            Self::CrossingRates => "crossing_rates",
            Self::Progeny => "progeny",
            Self::Field => "field",
            Self::Effective => "effective",
            Self::Laplace => "laplace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub birth: RateFunction,
    pub death: RateFunction,
}

/// Output times: explicit `times`, or `points` evenly spaced on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub horizon: f64,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
}

impl TimeGrid {
    pub fn times(&self) -> CliResult<Vec<f64>> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CliError::config(format!("grid.horizon must be positive, got {}", self.horizon)));
        }
        let times = match (&self.times, self.points) {
            (Some(_), Some(_)) => return Err(CliError::config("grid takes either times or points, not both")),
            (Some(ts), None) => ts.clone(),
            (None, points) => {
                let n = points.unwrap_or(101);
                if n < 2 {
                    return Err(CliError::config("grid.points must be at least 2"));
                }
                uniform_grid(self.horizon, n - 1)
            }
        };
        validate_grid(&times).map_err(|e| CliError::config(format!("grid: {e}")))?;
        if times.last().is_some_and(|&t| t > self.horizon) {
            return Err(CliError::config("grid times must not exceed the horizon"));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterministicConfig {
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default)]
    pub census: Option<TerminalCensus>,
    /// Time of the mean-matrix spectrum; defaults to the horizon.
    #[serde(default)]
    pub spectrum_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    pub trajectories: usize,
    #[serde(default)]
    pub pmf_times: Vec<f64>,
    #[serde(default)]
    pub extinction: Option<ExtinctionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionConfig {
    /// Defaults to the ensemble size.
    #[serde(default)]
    pub trajectories: Option<usize>,
    #[serde(default = "default_cap")]
    pub max_population: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgfConfig {
    #[serde(default)]
    pub pmf_times: Vec<f64>,
    /// Tail mass left untabulated in each pmf.
    #[serde(default = "default_tail")]
    pub pmf_tail: f64,
    #[serde(default)]
    pub delta_times: Vec<f64>,
    /// Defaults to the output grid.
    #[serde(default)]
    pub crossing_times: Option<Vec<f64>>,
    #[serde(default = "default_progeny_max")]
    pub progeny_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeSolver {
    AgeIndependent,
    Renewal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeConfig {
    pub solver: AgeSolver,
    pub birth: AgeTimeRate,
    pub death: AgeTimeRate,
    pub profile: AgeProfile,
    pub grid: AgeGrid,
    #[serde(default)]
    pub laplace_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Empty selects every report the model can produce from this config.
    #[serde(default)]
    pub reports: Vec<Report>,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub initial: Option<InitialLaw>,
    #[serde(default)]
    pub grid: Option<TimeGrid>,
    #[serde(default)]
    pub deterministic: Option<DeterministicConfig>,
    #[serde(default)]
    pub stochastic: Option<StochasticConfig>,
    #[serde(default)]
    pub pgf: Option<PgfConfig>,
    #[serde(default)]
    pub age: Option<AgeConfig>,
}

fn one() -> f64 {
    1.0
}

fn default_cap() -> u64 {
    1000
}

fn default_tail() -> f64 {
    1e-12
}

fn default_progeny_max() -> usize {
    200
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn require<'a, T>(&self, v: &'a Option<T>, what: &str) -> CliResult<&'a T> {
        v.as_ref().ok_or_else(|| CliError::config(format!("model {:?} needs a [{what}] section", self.model)))
    }

    pub fn rate_pair(&self) -> CliResult<RatePair> {
        let r = self.require(&self.rates, "rates")?;
        Ok(RatePair::new(r.birth.clone(), r.death.clone()))
    }

    pub fn initial_law(&self) -> InitialLaw {
        self.initial.unwrap_or_else(InitialLaw::single)
    }

    pub fn time_grid(&self) -> CliResult<Vec<f64>> {
        self.require(&self.grid, "grid")?.times()
    }

    pub fn horizon(&self) -> CliResult<f64> {
        Ok(self.require(&self.grid, "grid")?.horizon)
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::config("stochastic runs need a seed (config `seed` or --seed)"))
    }

    pub fn deterministic(&self) -> DeterministicConfig {
        self.deterministic.clone().unwrap_or(DeterministicConfig { x0: 1.0, census: None, spectrum_time: None })
    }

    pub fn stochastic(&self) -> CliResult<&StochasticConfig> {
        self.require(&self.stochastic, "stochastic")
    }

    pub fn pgf(&self) -> PgfConfig {
        self.pgf.clone().unwrap_or(PgfConfig {
            pmf_times: Vec::new(),
            pmf_tail: default_tail(),
            delta_times: Vec::new(),
            crossing_times: None,
            progeny_max: default_progeny_max(),
        })
    }

    pub fn age(&self) -> CliResult<&AgeConfig> {
        self.require(&self.age, "age")
    }

    /// Rejects sections that do not belong to the model and checks the
    /// pieces each model needs.
    pub fn validate(&self) -> CliResult<()> {
        let stray = |present: bool, name: &str, allowed: &[Model]| {
            if present && !allowed.contains(&self.model) {
                Err(CliError::config(format!("[{name}] does not apply to model {:?}", self.model)))
            } else {
                Ok(())
            }
        };
        use Model::*;
        stray(self.rates.is_some(), "rates", &[Deterministic, Stochastic, Pgf])?;
        stray(self.initial.is_some(), "initial", &[Stochastic, Pgf])?;
        stray(self.grid.is_some(), "grid", &[Deterministic, Stochastic, Pgf])?;
        stray(self.deterministic.is_some(), "deterministic", &[Deterministic])?;
        stray(self.stochastic.is_some(), "stochastic", &[Stochastic])?;
        stray(self.pgf.is_some(), "pgf", &[Pgf])?;
        stray(self.age.is_some(), "age", &[Age])?;
        match self.model {
            Deterministic | Pgf => {
                self.rate_pair()?;
                self.time_grid()?;
            }
            Stochastic => {
                self.rate_pair()?;
                self.time_grid()?;
                let s = self.stochastic()?;
                if s.trajectories < 2 {
                    return Err(CliError::config("stochastic.trajectories must be at least 2"));
                }
            }
            Age => {
                let a = self.age()?;
                a.grid.steps().map_err(|e| CliError::config(format!("age.grid: {e}")))?;
                a.profile.validate().map_err(|e| CliError::config(format!("age.profile: {e}")))?;
                for (name, r) in [("birth", &a.birth), ("death", &a.death)] {
                    r.validate().map_err(|e| CliError::config(format!("age.{name}: {e}")))?;
                    let ok = match a.solver {
                        AgeSolver::AgeIndependent => matches!(r, AgeTimeRate::AgeIndependent { .. }),
                        AgeSolver::Renewal => matches!(r, AgeTimeRate::TimeIndependent { .. }),
                        AgeSolver::Full => true,
                    };
                    if !ok {
                        return Err(CliError::config(format!("age.{name} has the wrong kind for solver {:?}", a.solver)));
                    }
                }
                if !a.laplace_z.is_empty() && a.solver != AgeSolver::Renewal {
                    return Err(CliError::config("age.laplace_z needs the renewal solver"));
                }
            }
        }
        for r in &self.reports {
            if !self.available_reports().contains(r) {
                return Err(CliError::config(format!(
                    "report {:?} is not available for model {:?} with this config",
                    r.name(),
                    self.model
                )));
            }
        }
        Ok(())
    }

    /// Reports this config can produce.
    pub fn available_reports(&self) -> Vec<Report> {
        use Report::*;
        match self.model {
            Model::Deterministic => {
                let mut v = vec![Curves, Crossover, Spectrum];
                if self.deterministic.as_ref().is_some_and(|d| d.census.is_some()) {
                    v.push(Inference);
                }
                v
            }
            Model::Stochastic => {
                let mut v = vec![Ensemble, Crossings];
                let s = self.stochastic.as_ref();
                if s.is_some_and(|s| !s.pmf_times.is_empty()) {
                    v.extend([Pmf, Delta]);
                }
                if s.is_some_and(|s| s.extinction.is_some()) {
                    v.extend([Extinction, Progeny]);
                }
                v
            }
            Model::Pgf => {
                let p = self.pgf();
                let mut v = vec![Moments, Extinction, CrossingRates];
                if !p.pmf_times.is_empty() {
                    v.push(Pmf);
                }
                if !p.delta_times.is_empty() {
                    v.push(Delta);
                }
                if self.rate_pair().is_ok_and(|rp| proportional_ratio(&rp, self.horizon().unwrap_or(1.0)).is_some()) {
                    v.push(Progeny);
                }
                v
            }
            Model::Age => {
                let mut v = vec![Curves, Effective];
                if self.age.as_ref().is_some_and(|a| !a.grid.snapshots.is_empty()) {
                    v.push(Field);
                }
                if self.age.as_ref().is_some_and(|a| !a.laplace_z.is_empty()) {
                    v.push(Laplace);
                }
                v
            }
        }
    }

    pub fn selected_reports(&self) -> Vec<Report> {
        let mut v = if self.reports.is_empty() { self.available_reports() } else { self.reports.clone() };
        v.sort();
        v.dedup();
        v
    }

    /// SHA-256 of the canonical JSON form of the effective config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `ρ` when `λ_d = ρ λ_b` on a dense sample of `[0, 4·horizon]`.
pub fn proportional_ratio(rp: &RatePair, horizon: f64) -> Option<f64> {
    let rho = rp.death.rate(0.0) / rp.birth.rate(0.0);
    (0..=256)
        .map(|k| 4.0 * horizon * k as f64 / 256.0)
        .all(|t| (rp.death.rate(t) - rho * rp.birth.rate(t)).abs() <= 1e-12 * rp.death.rate(t))
        .then_some(rho)
}

/// Annotated example of every section, printed by `popcross schema`.
pub const SCHEMA: &str = r#"# popcross experiment config (TOML)
#
# model = "deterministic" | "stochastic" | "pgf" | "age"     (required)
# seed = 42                      stochastic only; --seed overrides
# output_dir = "out"             --out overrides; default "out"
# reports = ["curves", ...]      subset of the model's reports; default all
#
# Reports per model:
#   deterministic: curves, crossover, spectrum, inference (needs census)
#   stochastic:    ensemble, crossings, pmf + delta (need pmf_times),
#                  extinction + progeny (need [stochastic.extinction])
#   pgf:           moments, extinction, crossing_rates, pmf (pmf_times),
#                  delta (delta_times), progeny (λ_d proportional to λ_b)
#   age:           curves, effective, field (needs snapshots), laplace (laplace_z)
#
# Rate functions (deterministic, stochastic, pgf):
# [rates]
# birth = { kind = "constant", level = 2.0 }
# death = { kind = "homographic", a = 0.5, b = 1.0 }        # (a t + b)/(t + 1)
#         { kind = "exp_decay", a = 0.5, b = 1.0, alpha = 0.3 }
#         { kind = "piecewise_linear", knots = [[0.0, 1.0], [5.0, 0.5]] }
#
# Initial law (stochastic, pgf); default one individual:
# [initial]
# p0 = 0.8                       thinned geometric: P(N0 = 0) = p0 ...
# p = 0.3                        ... with success parameter p
# # or: count = 2                a fixed number of individuals
#
# [grid]                          output times
# horizon = 5.0
# points = 51                    evenly spaced on [0, horizon]; or
# # times = [0.0, 1.0, 2.0]
#
# [deterministic]
# x0 = 1.0
# spectrum_time = 50.0           default: the horizon
# census = { t_f = 1e4, x0 = 1e6, x_tf = 7e9, xb_tf = 1.05e11 }
#
# [stochastic]
# trajectories = 100000
# pmf_times = [1.0]
# extinction = { trajectories = 100000, max_population = 1000 }
#
# [pgf]
# pmf_times = [1.0]
# pmf_tail = 1e-12
# delta_times = [0.5, 1.0]
# crossing_times = [0.0, 0.5]    default: the grid
# progeny_max = 200
#
# [age]
# solver = "age_independent" | "renewal" | "full"
# birth = { kind = "time_independent", rate = { kind = "window", value = 0.9, start = 1.0, end = 3.0 } }
# death = { kind = "time_independent", rate = { kind = "gompertz", initial = 0.01, growth = 0.1 } }
#   age-time rate kinds: age_independent { rate = <rate function> },
#     time_independent { rate = <shape> }, separable { age = <shape>, time = <shape> },
#     tabulated { ages = [...], times = [...], values = [[...], ...] }
#   shapes: constant { value }, gompertz { initial, growth },
#     window { value, start, end }, piecewise_linear { knots }
# profile = { kind = "cohort", mass = 1.0 }
#   profiles: cohort { mass }, uniform { mass, max_age },
#     exponential { mass, rate }, tabulated { knots }
# grid = { step = 0.01, horizon = 30.0, snapshots = [0.0, 10.0], max_age = 120.0 }
# laplace_z = [2.0, 3.0, 5.0]    renewal solver only
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_deterministic_config() {
        let cfg = ExperimentConfig::parse(
            r#"
            model = "deterministic"
            [rates]
            birth = { kind = "constant", level = 0.015 }
            death = { kind = "constant", level = 0.014 }
            [grid]
            horizon = 100.0
            points = 11
            "#,
        )
        .unwrap();
        assert_eq!(cfg.time_grid().unwrap().len(), 11);
        assert_eq!(cfg.selected_reports(), vec![Report::Curves, Report::Crossover, Report::Spectrum]);
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            "model = \"nope\"",
            "model = \"deterministic\"",
            "model = \"deterministic\"\n[rates]\nbirth = { kind = \"constant\", level = -1.0 }\ndeath = { kind = \"constant\", level = 1.0 }\n[grid]\nhorizon = 1.0",
            "model = \"pgf\"\nunknown = 3",
            "model = \"stochastic\"\n[rates]\nbirth = { kind = \"constant\", level = 2.0 }\ndeath = { kind = \"constant\", level = 1.0 }\n[grid]\nhorizon = 1.0\n[stochastic]\ntrajectories = 1",
            "model = \"age\"\n[grid]\nhorizon = 1.0",
        ];
        for text in cases {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(e.category(), "config", "{text}");
        }
    }

    #[test]
    fn hash_tracks_the_seed() {
        let text = "model = \"stochastic\"\nseed = 1\n[rates]\nbirth = { kind = \"constant\", level = 2.0 }\ndeath = { kind = \"constant\", level = 1.0 }\n[grid]\nhorizon = 1.0\n[stochastic]\ntrajectories = 10";
        let a = ExperimentConfig::parse(text).unwrap();
        let mut b = a.clone();
        b.seed = Some(2);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentConfig::parse(text).unwrap().hash());
    }

    #[test]
    fn schema_example_sections_parse() {
        let text = r#"
            model = "age"
            [age]
            solver = "full"
            birth = { kind = "time_independent", rate = { kind = "window", value = 0.9, start = 1.0, end = 3.0 } }
            death = { kind = "time_independent", rate = { kind = "gompertz", initial = 0.01, growth = 0.1 } }
            profile = { kind = "cohort", mass = 1.0 }
            grid = { step = 0.05, horizon = 10.0, snapshots = [0.0, 10.0] }
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert!(cfg.selected_reports().contains(&Report::Field));
    }
}
