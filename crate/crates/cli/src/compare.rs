//! `popcross compare`: analytic (pgf) outputs against a Monte Carlo ensemble.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{num, read_table, Artifacts, Table, TOOL};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    /// Largest admissible |z| for any grid point.
    pub sigma: f64,
    /// Largest admissible total-variation distance.
    pub tv: f64,
    /// Restrict curve comparisons to these grid times; all shared times if `None`.
    pub times: Option<Vec<f64>>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { sigma: 3.0, tv: 0.015, times: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub quantity: String,
    pub kind: &'static str,
    /// Grid time of the worst point.
    pub t: f64,
    /// Worst |z| or TV distance.
    pub statistic: f64,
    pub threshold: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub checks: Vec<Check>,
}

const TIME_MATCH: f64 = 1e-9;

struct Columns {
    cols: Vec<String>,
    rows: Vec<Vec<f64>>,
    name: String,
}

impl Columns {
    fn read(dir: &Path, file: &str) -> CliResult<Option<Self>> {
        let p = dir.join(file);
        if !p.exists() {
            return Ok(None);
        }
        let (cols, rows) = read_table(&p)?;
        Ok(Some(Self { cols, rows, name: p.display().to_string() }))
    }

    fn col(&self, name: &str) -> CliResult<Vec<f64>> {
        let i = self
            .cols
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::domain(format!("{}: no column `{name}`", self.name)))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TIME_MATCH * (1.0 + x.abs()))
}

fn selected(t: f64, times: &Option<Vec<f64>>) -> bool {
    times.as_ref().is_none_or(|ts| ts.iter().any(|s| (s - t).abs() <= TIME_MATCH * (1.0 + t.abs())))
}

/// |z| of an estimate against its target; a zero standard error passes only
/// on exact agreement.
fn z_abs(estimate: f64, se: f64, target: f64) -> f64 {
    let d = (estimate - target).abs();
    if se > 0.0 {
        d / se
    } else if d <= 1e-12 * (1.0 + target.abs()) {
        0.0
    } else {
        f64::INFINITY
    }
}

fn worst(quantity: &str, kind: &'static str, threshold: f64, pts: &[(f64, f64)]) -> Check {
    let (t, statistic) = pts
        .iter()
        .copied()
        .fold((f64::NAN, 0.0), |acc, p| if p.1 > acc.1 || acc.0.is_nan() { p } else { acc });
    Check { quantity: quantity.into(), kind, t, statistic, threshold, points: pts.len(), pass: statistic <= threshold }
}

/// Groups `(t, k, p)` rows into one pmf per time.
fn pmfs(c: &Columns, key: &str) -> CliResult<BTreeMap<u64, (f64, BTreeMap<i64, f64>)>> {
    let (t, k, p) = (c.col("t")?, c.col(key)?, c.col("p")?);
    let mut out: BTreeMap<u64, (f64, BTreeMap<i64, f64>)> = BTreeMap::new();
    for i in 0..t.len() {
        let e = out.entry(t[i].to_bits()).or_insert((t[i], BTreeMap::new()));
        *e.1.entry(k[i] as i64).or_default() += p[i];
    }
    Ok(out)
}

fn tv_checks(
    analytic: &Columns,
    ensemble: &Columns,
    key: &str,
    quantity: &str,
    opts: &CompareOptions,
    checks: &mut Vec<Check>,
) -> CliResult<()> {
    let a = pmfs(analytic, key)?;
    let e = pmfs(ensemble, key)?;
    let at: Vec<f64> = a.values().map(|v| v.0).collect();
    let et: Vec<f64> = e.values().map(|v| v.0).collect();
    if !same_grid(&at, &et) {
        return Err(CliError::domain(format!("{quantity}: analytic times {at:?} differ from ensemble times {et:?}")));
    }
    for ((t, pa), (_, pe)) in a.values().zip(e.values()) {
        // Analytic mass outside the tabulated support counts towards the distance.
        let missing = (1.0 - pa.values().sum::<f64>()).max(0.0);
        let mut tv = missing;
        for k in pa.keys().chain(pe.keys()).collect::<std::collections::BTreeSet<_>>() {
            tv += (pa.get(k).copied().unwrap_or(0.0) - pe.get(k).copied().unwrap_or(0.0)).abs();
        }
        checks.push(worst(&format!("{quantity}(t={})", num(*t)), "tv", opts.tv, &[(*t, 0.5 * tv)]));
    }
    Ok(())
}

pub fn compare(analytic_dir: &Path, ensemble_dir: &Path, opts: &CompareOptions) -> CliResult<Verdict> {
    let need = |dir: &Path, f: &str| {
        Columns::read(dir, f)?.ok_or_else(|| CliError::domain(format!("{} is missing", dir.join(f).display())))
    };
    let ens = need(ensemble_dir, "ensemble.csv")?;
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(ensemble_dir.join("summary.json"))?)
        .map_err(|e| CliError::domain(format!("ensemble summary.json: {e}")))?;
    let m = summary["trajectories"]
        .as_u64()
        .ok_or_else(|| CliError::domain("ensemble summary.json has no trajectory count"))? as f64;
    let et = ens.col("t")?;
    if et.is_empty() {
        return Err(CliError::domain("ensemble grid is empty"));
    }
    let mut checks = Vec::new();

    if let Some(mom) = Columns::read(analytic_dir, "moments.csv")? {
        let at = mom.col("t")?;
        if !same_grid(&at, &et) {
            return Err(CliError::domain(format!(
                "grid mismatch: analytic moments have {} points, ensemble has {}",
                at.len(),
                et.len()
            )));
        }
        for (q, a_col, e_col) in [
            ("mean_n", "x", "mean_n"),
            ("mean_nb", "xb", "mean_nb"),
            ("mean_nd", "xd", "mean_nd"),
            ("var_n", "var_n", "var_n"),
        ] {
            let (a, e, se) = (mom.col(a_col)?, ens.col(e_col)?, ens.col(&format!("{e_col}_se"))?);
            let pts: Vec<(f64, f64)> = (0..et.len())
                .filter(|&j| selected(et[j], &opts.times))
                .map(|j| (et[j], z_abs(e[j], se[j], a[j])))
                .collect();
            checks.push(worst(q, "z", opts.sigma, &pts));
        }
    }
    if let Some(ext) = Columns::read(analytic_dir, "extinction.csv")? {
        let at = ext.col("t")?;
        if !same_grid(&at, &et) {
            return Err(CliError::domain(format!(
                "grid mismatch: analytic extinction cdf has {} points, ensemble has {}",
                at.len(),
                et.len()
            )));
        }
        let (cdf, emp) = (ext.col("cdf")?, ens.col("extinct")?);
        let pts: Vec<(f64, f64)> = (0..et.len())
            .filter(|&j| selected(et[j], &opts.times))
            .map(|j| (et[j], z_abs(emp[j], (cdf[j] * (1.0 - cdf[j]) / m).sqrt(), cdf[j])))
            .collect();
        checks.push(worst("extinction_cdf", "z", opts.sigma, &pts));
    }
    for (file, key, q) in [("pmf.csv", "n", "pmf_living"), ("delta.csv", "k", "pmf_delta")] {
        if let (Some(a), Some(e)) = (Columns::read(analytic_dir, file)?, Columns::read(ensemble_dir, file)?) {
            tv_checks(&a, &e, key, q, opts, &mut checks)?;
        }
    }
    if checks.is_empty() {
        return Err(CliError::domain("no comparable outputs found in the two directories"));
    }
    if checks.iter().any(|c| c.points == 0) {
        return Err(CliError::domain("requested comparison times are not on the shared grid"));
    }
    Ok(Verdict { pass: checks.iter().all(|c| c.pass), checks })
}

impl Verdict {
    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.pass).map(|c| c.quantity.as_str()).collect();
        if failed.is_empty() {
            format!("compare verdict=pass checks={}", self.checks.len())
        } else {
            format!("compare verdict=fail checks={} failed={}", self.checks.len(), failed.join(","))
        }
    }

    pub fn artifacts(&self, analytic: &Path, ensemble: &Path) -> Artifacts {
        let mut t = Table::new("verdict", &["quantity", "kind", "t", "statistic", "threshold", "points", "pass"]);
        for c in &self.checks {
            t.push(vec![
                c.quantity.clone(),
                c.kind.into(),
                num(c.t),
                num(c.statistic),
                num(c.threshold),
                c.points.to_string(),
                c.pass.to_string(),
            ]);
        }
        Artifacts {
            header: format!("{TOOL} compare analytic={} ensemble={}", analytic.display(), ensemble.display()),
            tables: vec![t],
            summary: json!({ "pass": self.pass, "checks": self.checks }),
            summary_file: "verdict.json",
        }
    }
}
