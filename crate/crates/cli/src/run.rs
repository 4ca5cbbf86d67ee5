//! `popcross run`: one model per config, all outputs assembled in memory.

use serde_json::json;

use popcross::age::{self, AgeSolution, AgeTimeRate};
use popcross::deterministic::{
    asymptotic_ratios, crossover_time, infer_from_terminal, mean_matrix_spectrum, solve_time_dependent,
    CrossoverOptions,
};
use popcross::pgf::{
    crossing_rates, delta_distribution, extinction_cdf, extinction_prob, moment_odes, pmf_living_table,
    progeny_at_extinction, FourierOptions,
};
use popcross::stochastic::{run_ensemble, run_extinction_ensemble, EnsembleOptions, EmpiricalPmf, ExtinctionOptions};
use popcross::{RatePair, Regime};

use crate::config::{proportional_ratio, AgeSolver, ExperimentConfig, Model, Report};
use crate::error::{CliError, CliResult};
use crate::output::{header, num, Artifacts, Table};

/// Result of a run: the one-line summary and the files to write.
pub struct RunOutput {
    pub line: String,
    pub artifacts: Artifacts,
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    let reports = cfg.selected_reports();
    let (line, tables, summary) = match cfg.model {
        Model::Deterministic => deterministic(cfg, &reports)?,
        Model::Stochastic => stochastic(cfg, &reports)?,
        Model::Pgf => pgf(cfg, &reports)?,
        Model::Age => age_model(cfg, &reports)?,
    };
    let mut summary = summary;
    summary["model"] = json!(cfg.model);
    summary["reports"] = json!(reports.iter().map(|r| r.name()).collect::<Vec<_>>());
    Ok(RunOutput { line, artifacts: Artifacts { header: header(&cfg.hash()), tables, summary, summary_file: "summary.json" } })
}

type Parts = (String, Vec<Table>, serde_json::Value);

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.6}"))
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Supercritical => "supercritical",
        Regime::Critical => "critical",
        Regime::Subcritical => "subcritical",
    }
}

fn deterministic(cfg: &ExperimentConfig, reports: &[Report]) -> CliResult<Parts> {
    let rp = cfg.rate_pair()?;
    let d = cfg.deterministic();
    let times = cfg.time_grid()?;
    let mut tables = Vec::new();
    let mut summary = json!({ "regime": regime_name(rp.regime()) });
    let mut line = format!("deterministic regime={}", regime_name(rp.regime()));

    if reports.contains(&Report::Curves) {
        let c = solve_time_dependent(&rp, d.x0, &times)?;
        let mut t = Table::new("curves", &["t", "x", "xb", "xd"]);
        for j in 0..c.len() {
            t.push_nums(&[c.t[j], c.x[j], c.xb[j], c.xd[j]]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Crossover) {
        let tstar = if rp.regime() == Regime::Supercritical {
            crossover_time(&rp, &CrossoverOptions::default())?
        } else {
            None
        };
        let ratios = asymptotic_ratios(&rp).ok();
        let mut t = Table::new("crossover", &["quantity", "value"]);
        t.push(vec!["t_star".into(), tstar.map_or("none".into(), num)]);
        if let Some((b, dd)) = ratios {
            t.push(vec!["born_ratio_limit".into(), num(b)]);
            t.push(vec!["dead_ratio_limit".into(), num(dd)]);
        }
        tables.push(t);
        summary["t_star"] = json!(tstar);
        summary["asymptotic_ratios"] = json!(ratios);
        line += &format!(" t_star={}", opt(tstar));
    }
    if reports.contains(&Report::Spectrum) {
        let at = d.spectrum_time.unwrap_or(cfg.horizon()?);
        let s = mean_matrix_spectrum(&rp, at)?;
        let mut t = Table::new("spectrum", &["t", "eigenvalue_0", "eigenvalue_1", "y00", "y01", "y10", "y11"]);
        t.push_nums(&[s.t, s.eigenvalues.0, s.eigenvalues.1, s.scaled[0][0], s.scaled[0][1], s.scaled[1][0], s.scaled[1][1]]);
        tables.push(t);
    }
    if reports.contains(&Report::Inference) {
        let census = d.census.expect("availability checked");
        let r = infer_from_terminal(&census)?;
        let mut t = Table::new("inference", &["quantity", "value"]);
        for (k, v) in [
            ("lambda", r.lambda),
            ("lambda_b", r.lambda_b),
            ("lambda_d", r.lambda_d),
            ("born_ratio", r.born_ratio),
            ("dead_ratio", r.dead_ratio),
        ] {
            t.push(vec![k.into(), num(v)]);
        }
        t.push(vec!["t_star".into(), r.t_star.map_or("none".into(), num)]);
        tables.push(t);
        summary["inference"] = json!(r);
        line += &format!(" inferred_t_star={}", opt(r.t_star));
    }
    Ok((line, tables, summary))
}

fn pmf_table(name: &str, value_col: &str, pmfs: &[EmpiricalPmf]) -> Table {
    let mut t = Table::new(name, &["t", value_col, "count", "p"]);
    for p in pmfs {
        for (i, &c) in p.counts.iter().enumerate() {
            if c > 0 {
                let k = p.min + i as i64;
                t.push(vec![num(p.t), k.to_string(), c.to_string(), num(p.prob(k))]);
            }
        }
    }
    t
}

fn stochastic(cfg: &ExperimentConfig, reports: &[Report]) -> CliResult<Parts> {
    let rp = cfg.rate_pair()?;
    let law = cfg.initial_law();
    let s = cfg.stochastic()?;
    let seed = cfg.seed()?;
    let opts = EnsembleOptions {
        trajectories: s.trajectories,
        seed,
        horizon: cfg.horizon()?,
        grid: cfg.time_grid()?,
        pmf_times: s.pmf_times.clone(),
        keep_trajectories: 0,
    };
    let e = run_ensemble(&rp, &law, &opts)?;
    let mut tables = Vec::new();
    let ext = e.extinct_fraction();
    let crossed = popcross::stochastic::Estimate::proportion(e.relation.crossed, e.trajectories);
    let mut summary = json!({
        "trajectories": e.trajectories,
        "seed": seed,
        "horizon": e.horizon,
        "extinct_fraction": ext,
        "crossed_fraction": crossed,
        "relation": e.relation,
        "crossing_quantiles": { "q25": e.crossing_quantiles(&[0.25])[0], "q50": e.crossing_quantiles(&[0.5])[0], "q75": e.crossing_quantiles(&[0.75])[0] },
    });
    let mut line = format!(
        "stochastic trajectories={} extinct_fraction={:.6}±{:.6} crossed_fraction={:.6}",
        e.trajectories, ext.value, ext.se, crossed.value
    );

    if reports.contains(&Report::Ensemble) {
        let mut t = Table::new(
            "ensemble",
            &[
                "t", "mean_n", "mean_n_se", "var_n", "var_n_se", "mean_nb", "mean_nb_se", "mean_nd", "mean_nd_se",
                "cov_bd", "cov_bd_se", "extinct", "extinct_se", "crossed", "crossed_se", "crossed_type1", "crossed_type2",
            ],
        );
        for g in &e.grid {
            t.push_nums(&[
                g.t, g.mean_n.value, g.mean_n.se, g.var_n.value, g.var_n.se, g.mean_nb.value, g.mean_nb.se,
                g.mean_nd.value, g.mean_nd.se, g.cov_bd.value, g.cov_bd.se, g.extinct.value, g.extinct.se,
                g.crossed.value, g.crossed.se, g.crossed_type1.value, g.crossed_type2.value,
            ]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Crossings) {
        let mut t = Table::new("crossings", &["t0", "t1", "type1", "type1_se", "type2", "type2_se"]);
        for c in &e.intensities {
            t.push_nums(&[c.t0, c.t1, c.type1.value, c.type1.se, c.type2.value, c.type2.se]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Pmf) {
        tables.push(pmf_table("pmf", "n", &e.pmf_living));
    }
    if reports.contains(&Report::Delta) {
        tables.push(pmf_table("delta", "k", &e.pmf_delta));
    }
    if reports.contains(&Report::Extinction) || reports.contains(&Report::Progeny) {
        let x = s.extinction.as_ref().expect("availability checked");
        let xs = run_extinction_ensemble(
            &rp,
            &law,
            &ExtinctionOptions {
                trajectories: x.trajectories.unwrap_or(s.trajectories),
                seed,
                max_population: x.max_population,
                horizon: f64::INFINITY,
            },
        )?;
        let progeny_mean = (xs.progeny.len() >= 2).then(|| xs.progeny_mean());
        summary["extinction"] = json!({
            "trajectories": xs.trajectories,
            "max_population": xs.max_population,
            "extinct_fraction": xs.extinct_fraction,
            "capped": xs.capped,
            "censored": xs.censored,
            "progeny_mean": progeny_mean,
        });
        line += &format!(" long_run_extinct_fraction={:.6}", xs.extinct_fraction.value);
        if reports.contains(&Report::Progeny) && !xs.progeny.is_empty() {
            let mut pm = xs.progeny_pmf();
            pm.t = f64::NAN;
            let mut t = Table::new("progeny", &["n", "count", "p"]);
            for (i, &c) in pm.counts.iter().enumerate() {
                if c > 0 {
                    let k = pm.min + i as i64;
                    t.push(vec![k.to_string(), c.to_string(), num(pm.prob(k))]);
                }
            }
            tables.push(t);
        }
        if reports.contains(&Report::Extinction) {
            let mut t = Table::new("extinction", &["quantity", "value"]);
            t.push(vec!["extinct_fraction".into(), num(xs.extinct_fraction.value)]);
            t.push(vec!["extinct_fraction_se".into(), num(xs.extinct_fraction.se)]);
            t.push(vec!["capped".into(), xs.capped.to_string()]);
            t.push(vec!["censored".into(), xs.censored.to_string()]);
            tables.push(t);
        }
    }
    Ok((line, tables, summary))
}

fn pgf(cfg: &ExperimentConfig, reports: &[Report]) -> CliResult<Parts> {
    let rp = cfg.rate_pair()?;
    let law = cfg.initial_law();
    let p = cfg.pgf();
    let times = cfg.time_grid()?;
    let mut tables = Vec::new();
    let rho_e = extinction_prob(&rp, &law)?;
    let mut summary = json!({ "regime": regime_name(rp.regime()), "rho_e": rho_e });
    let mut line = format!("pgf regime={} rho_e={rho_e:.6}", regime_name(rp.regime()));

    if reports.contains(&Report::Moments) {
        let m = moment_odes(&rp, &law, &times)?;
        let mut t = Table::new("moments", &["t", "x", "xb", "xd", "var_n", "var_nb", "var_nd", "cov_bd", "scaled_cov"]);
        for j in 0..m.t.len() {
            let var_nb = m.ebb[j] - m.xb[j] * m.xb[j];
            let var_nd = m.edd[j] - m.xd[j] * m.xd[j];
            let var_n = var_nb + var_nd - 2.0 * m.cov[j];
            t.push_nums(&[m.t[j], m.xb[j] - m.xd[j], m.xb[j], m.xd[j], var_n, var_nb, var_nd, m.cov[j], m.scaled_cov[j]]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Extinction) {
        let mut t = Table::new("extinction", &["t", "cdf"]);
        for &s in &times {
            t.push_nums(&[s, extinction_cdf(&rp, &law, s)?]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Pmf) {
        let mut t = Table::new("pmf", &["t", "n", "p"]);
        for &s in &p.pmf_times {
            for (n, q) in pmf_living_table(&rp, &law, s, p.pmf_tail)?.into_iter().enumerate() {
                t.push(vec![num(s), n.to_string(), num(q)]);
            }
        }
        tables.push(t);
    }
    let fourier = FourierOptions::default();
    if reports.contains(&Report::Delta) {
        let mut t = Table::new("delta", &["t", "k", "p"]);
        for &s in &p.delta_times {
            let d = delta_distribution(&rp, &law, s, &fourier)?;
            for k in d.support() {
                t.push(vec![num(s), k.to_string(), num(d.prob(k))]);
            }
        }
        tables.push(t);
    }
    if reports.contains(&Report::CrossingRates) {
        let at = p.crossing_times.clone().unwrap_or_else(|| times.clone());
        let mut t = Table::new("crossing_rates", &["t", "lambda1", "lambda2", "p_minus1", "p_minus2"]);
        for &s in &at {
            let r = crossing_rates(&rp, &law, s, &fourier)?;
            t.push_nums(&[s, r.lambda1, r.lambda2, r.p_minus1, r.p_minus2]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Progeny) {
        let rho = proportional_ratio(&rp, cfg.horizon()?).expect("availability checked");
        let law_p = progeny_at_extinction(&law, rho)?;
        let mut t = Table::new("progeny", &["n", "p"]);
        for (n, q) in law_p.pmf(p.progeny_max)?.into_iter().enumerate() {
            t.push(vec![n.to_string(), num(q)]);
        }
        tables.push(t);
        summary["progeny_mean"] = json!(law_p.mean);
    }
    if let Ok(k) = popcross::pgf::kappa(&rp) {
        summary["kappa"] = json!(k);
    }
    line += &format!(" horizon={}", num(cfg.horizon()?));
    Ok((line, tables, summary))
}

fn age_model(cfg: &ExperimentConfig, reports: &[Report]) -> CliResult<Parts> {
    let a = cfg.age()?;
    let sol: AgeSolution = match a.solver {
        AgeSolver::AgeIndependent => {
            let (AgeTimeRate::AgeIndependent { rate: b }, AgeTimeRate::AgeIndependent { rate: d }) = (&a.birth, &a.death)
            else {
                return Err(CliError::config("age_independent solver needs age_independent rates"));
            };
            age::solve_age_independent(&RatePair::new(b.clone(), d.clone()), &a.profile, &a.grid)?
        }
        AgeSolver::Renewal => {
            let (AgeTimeRate::TimeIndependent { rate: b }, AgeTimeRate::TimeIndependent { rate: d }) = (&a.birth, &a.death)
            else {
                return Err(CliError::config("renewal solver needs time_independent rates"));
            };
            age::solve_time_independent_renewal(b, d, &a.profile, &a.grid)?
        }
        AgeSolver::Full => age::solve_full(&a.birth, &a.death, &a.profile, &a.grid)?,
    };
    let c = &sol.curves;
    let n = c.len() - 1;
    let mut tables = Vec::new();
    let mut summary = json!({
        "solver": a.solver,
        "t_star": sol.tstar,
        "x_final": c.x[n],
        "truncated_fraction": sol.truncated_fraction,
    });
    let line = format!("age solver={:?} t_star={} x_final={}", a.solver, opt(sol.tstar), num(c.x[n])).to_lowercase();

    if reports.contains(&Report::Curves) {
        let mut t = Table::new("curves", &["t", "x", "xb", "xd", "birth_rate", "death_rate"]);
        for j in 0..=n {
            t.push_nums(&[c.t[j], c.x[j], c.xb[j], c.xd[j], sol.birth_rate[j], sol.death_rate[j]]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Effective) {
        let mut t = Table::new("effective", &["t", "lambda_b_star", "lambda_d_star"]);
        for j in 0..=n {
            t.push_nums(&[c.t[j], sol.effective.lambda_b_star[j], sol.effective.lambda_d_star[j]]);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Field) {
        let f = &sol.field;
        let cols: Vec<String> =
            std::iter::once("age".to_string()).chain(f.times.iter().map(|t| format!("t={}", num(*t)))).collect();
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new("field", &col_refs);
        for i in 0..f.ages() {
            let mut row = vec![i as f64 * f.step];
            row.extend(f.density.iter().map(|d| d[i]));
            t.push_nums(&row);
        }
        tables.push(t);
    }
    if reports.contains(&Report::Laplace) {
        let (AgeTimeRate::TimeIndependent { rate: b }, AgeTimeRate::TimeIndependent { rate: d }) = (&a.birth, &a.death)
        else {
            return Err(CliError::config("laplace check needs time_independent rates"));
        };
        let r = age::laplace_consistency(b, d, &a.profile, &a.laplace_z, &a.grid)?;
        let mut t = Table::new(
            "laplace",
            &["z", "alpha", "alpha0", "beta", "predicted", "newborn_form", "numerical", "residual"],
        );
        for s in &r.samples {
            t.push_nums(&[s.z, s.alpha, s.alpha0, s.beta, s.predicted, s.newborn_form, s.numerical, s.residual]);
        }
        tables.push(t);
        summary["laplace_max_residual"] = json!(r.max_residual);
        summary["growth_rate"] = json!(r.growth_rate);
    }
    Ok((line, tables, summary))
}
