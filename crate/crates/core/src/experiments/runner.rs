//! Expands a manifest into jobs, runs them on a bounded worker pool and
//! aggregates the per-job records into result tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Check, Estimator, ExperimentKind, ExperimentManifest};
use crate::error::{Error, Result};
use crate::inference::estimators::{default_start, independence_mle, pairwise_mle, stephenson_tawn_mle, trend_bayes_factor_from_draws};
use crate::inference::{posterior_summary, run_chain, Dist, MarginTemplate, McmcConfig, ModelTemplate, TrendBayesFactor};
use crate::numerics::stats::median;
use crate::rng::derive_seed;
use crate::simulate::{write_csv, Dataset};

/// One estimator's output on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub estimator: Estimator,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default)]
    pub boundary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_blocks: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bayes_factor: Option<TrendBayesFactor>,
}

/// The record of one `(cell, replicate)` job; its file doubles as the
/// completion marker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub cell: String,
    pub rep: u64,
    pub fits: Vec<FitRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub cell: String,
    pub rep: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub cell: String,
    pub estimator: Estimator,
    pub param: String,
    pub n: usize,
    /// Multiplier applied to `rmse`, `bias` and `mc_se`.
    pub scale: f64,
    pub rmse: f64,
    pub bias: f64,
    pub mc_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub cell: String,
    pub estimator: Estimator,
    pub param: String,
    pub n: usize,
    /// Percent.
    pub coverage: f64,
    pub mc_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorRow {
    pub cell: String,
    pub n: usize,
    pub median_b12: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTables {
    pub rmse: Vec<RmseRow>,
    pub coverage: Vec<CoverageRow>,
    pub bayes_factors: Vec<BayesFactorRow>,
    pub checks: Vec<CheckResult>,
    pub failures: Vec<JobFailure>,
}

impl ResultTables {
    pub fn rmse_of(&self, cell: &str, estimator: Estimator, param: &str) -> Option<&RmseRow> {
        self.rmse.iter().find(|r| r.cell == cell && r.estimator == estimator && r.param == param)
    }

    pub fn coverage_of(&self, cell: &str, param: &str) -> Option<&CoverageRow> {
        self.coverage.iter().find(|r| r.cell == cell && r.param == param)
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.json";

fn job_path(out: &Path, cell: &str, rep: u64, ext: &str) -> PathBuf {
    out.join("jobs").join(cell).join(format!("rep-{rep:05}.{ext}"))
}

/// Writes `bytes` via a temporary file and a rename, so a file that exists
/// is complete.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Starting point for chains and optimizers: free margins from the
/// independence fit (Gumbel moments if that fails), dependence at the
/// template default.
pub fn data_driven_start(template: &ModelTemplate, data: &Dataset, fit: &crate::inference::FitConfig) -> Result<Vec<f64>> {
    let mut x = default_start(template, data)?;
    if !matches!(template.margins, MarginTemplate::UnitFrechet | MarginTemplate::Fixed { .. }) {
        if let Ok(est) = independence_mle(data, template, fit) {
            let d = template.n_dependence();
            x[d..].copy_from_slice(&est.x);
        }
    }
    Ok(x)
}

fn run_job(m: &ExperimentManifest, cell_idx: usize, rep: u64, out: &Path) -> Result<JobRecord> {
    let cell = &m.cells[cell_idx];
    let data = cell.sim_job(m.seed, cell_idx).run(rep)?;
    if m.kind == ExperimentKind::SimulateOnly {
        write_csv(&job_path(out, &cell.name, rep, "data.csv"), std::slice::from_ref(&data))?;
        return Ok(JobRecord { cell: cell.name.clone(), rep, fits: Vec::new() });
    }
    let t = &cell.template;
    let start = data_driven_start(t, &data, &m.fit)?;
    let chain_seed = derive_seed(m.seed, "fit", &[cell_idx as u64, rep]);
    let mut fits = Vec::new();
    for est in m.estimators() {
        let rec = match est {
            Estimator::Bayes | Estimator::BayesFactor => {
                let cfg = McmcConfig { init: m.mcmc.init.clone().or_else(|| Some(start.clone())), ..m.mcmc.clone() };
                let trace = run_chain(&data, t, &cfg, chain_seed)?;
                if m.keep_traces || m.kind == ExperimentKind::SingleFit {
                    trace.write(&job_path(out, &cell.name, rep, "trace.csv"))?;
                }
                let s = posterior_summary(&trace, m.level)?;
                let bayes_factor = if est == Estimator::BayesFactor {
                    let b = t.index_of("beta").expect("validated trend template");
                    let Dist::SpikeAndSlab { p0, .. } = t.params()[b].prior.dist else {
                        return Err(Error::Config("beta needs a spike-and-slab prior".into()));
                    };
                    Some(trend_bayes_factor_from_draws(&trace.post_burn(b), p0))
                } else {
                    None
                };
                FitRecord {
                    estimator: est,
                    names: trace.names.clone(),
                    values: s.params.iter().map(|p| p.median).collect(),
                    lower: Some(s.params.iter().map(|p| p.lower).collect()),
                    upper: Some(s.params.iter().map(|p| p.upper).collect()),
                    boundary: false,
                    mean_blocks: Some(s.mean_blocks.median),
                    bayes_factor,
                }
            }
            Estimator::Pairwise | Estimator::StephensonTawn | Estimator::Independence => {
                let e = match est {
                    Estimator::Pairwise => pairwise_mle(&data, t, Some(&start), &m.fit)?,
                    Estimator::StephensonTawn => stephenson_tawn_mle(&data, t, Some(&start), &m.fit)?,
                    _ => independence_mle(&data, t, &m.fit)?,
                };
                FitRecord {
                    estimator: est,
                    names: e.names,
                    values: e.x,
                    lower: None,
                    upper: None,
                    boundary: e.boundary,
                    mean_blocks: None,
                    bayes_factor: None,
                }
            }
        };
        fits.push(rec);
    }
    Ok(JobRecord { cell: cell.name.clone(), rep, fits })
}

/// Runs every job of `m` whose record is not yet in `out` and aggregates.
/// Failed jobs are recorded and retried on the next run. With `workers`
/// unset the global rayon pool is used.
pub fn run_experiment(m: &ExperimentManifest, out: &Path, workers: Option<usize>) -> Result<ResultTables> {
    m.validate()?;
    std::fs::create_dir_all(out)?;
    let manifest_json = serde_json::to_string_pretty(m)?;
    let mpath = out.join(MANIFEST_FILE);
    if mpath.exists() {
        let existing: ExperimentManifest = serde_json::from_str(&std::fs::read_to_string(&mpath)?)?;
        if existing != *m {
            return Err(Error::Config(format!("{} holds a different manifest; use a fresh output directory", out.display())));
        }
    } else {
        write_atomic(&mpath, manifest_json.as_bytes())?;
    }
    for c in &m.cells {
        std::fs::create_dir_all(out.join("jobs").join(&c.name))?;
    }
    let jobs: Vec<(usize, u64)> = (0..m.cells.len()).flat_map(|c| (0..m.replicates).map(move |r| (c, r))).collect();
    let work = || -> Result<()> {
        jobs.par_iter().try_for_each(|&(c, rep)| -> Result<()> {
            let name = &m.cells[c].name;
            let done = job_path(out, name, rep, "json");
            if done.exists() {
                return Ok(());
            }
            let failed = job_path(out, name, rep, "failed.json");
            match run_job(m, c, rep, out) {
                Ok(rec) => {
                    if failed.exists() {
                        std::fs::remove_file(&failed)?;
                    }
                    write_atomic(&done, serde_json::to_string_pretty(&rec)?.as_bytes())
                }
                Err(e) => {
                    let f = JobFailure { cell: name.clone(), rep, error: e.to_string() };
                    write_atomic(&failed, serde_json::to_string_pretty(&f)?.as_bytes())
                }
            }
        })
    };
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(work)?,
        None => work()?,
    }
    aggregate(out)
}

/// Re-runs the manifest stored in `dir`, skipping completed jobs.
pub fn resume_experiment(dir: &Path, workers: Option<usize>) -> Result<ResultTables> {
    let m = ExperimentManifest::read(&dir.join(MANIFEST_FILE))?;
    run_experiment(&m, dir, workers)
}

/// Reads the job records under `out` in `(cell, replicate)` order.
pub fn load_records(out: &Path, m: &ExperimentManifest) -> Result<(Vec<JobRecord>, Vec<JobFailure>)> {
    let mut recs = Vec::new();
    let mut fails = Vec::new();
    for c in &m.cells {
        for rep in 0..m.replicates {
            let p = job_path(out, &c.name, rep, "json");
            let f = job_path(out, &c.name, rep, "failed.json");
            if p.exists() {
                recs.push(serde_json::from_str(&std::fs::read_to_string(&p)?)?);
            } else if f.exists() {
                fails.push(serde_json::from_str(&std::fs::read_to_string(&f)?)?);
            } else {
                fails.push(JobFailure { cell: c.name.clone(), rep, error: "not run".into() });
            }
        }
    }
    Ok((recs, fails))
}

/// Builds all tables from the job records in `out` and writes `raw.csv`,
/// `results.csv`, `coverage.csv`, `bayes_factors.csv` and `results.json`.
pub fn aggregate(out: &Path) -> Result<ResultTables> {
    let m = ExperimentManifest::read(&out.join(MANIFEST_FILE))?;
    let (recs, failures) = load_records(out, &m)?;
    let mut raw = csv::Writer::from_path(out.join("raw.csv"))?;
    raw.write_record(["cell", "rep", "estimator", "param", "truth", "estimate", "lower", "upper"])?;
    // (cell, estimator, param) -> (errors, covered)
    let mut errs: BTreeMap<(usize, Estimator, usize), (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    let mut bfs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let cell_idx = |name: &str| m.cells.iter().position(|c| c.name == name).expect("record of a manifest cell");
    for r in &recs {
        let ci = cell_idx(&r.cell);
        let cell = &m.cells[ci];
        let names = cell.template.names();
        for f in &r.fits {
            if let Some(bf) = &f.bayes_factor {
                bfs.entry(ci).or_default().push(bf.bayes_factor.value());
            }
            for (j, name) in f.names.iter().enumerate() {
                let truth = cell.truth.get(name).copied();
                let fmt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
                raw.write_record([
                    r.cell.clone(),
                    r.rep.to_string(),
                    f.estimator.name().to_string(),
                    name.clone(),
                    fmt(truth),
                    fmt(Some(f.values[j])),
                    fmt(f.lower.as_ref().map(|l| l[j])),
                    fmt(f.upper.as_ref().map(|u| u[j])),
                ])?;
                if let Some(t) = truth {
                    let p = names.iter().position(|n| n == name).expect("template parameter");
                    let e = errs.entry((ci, f.estimator, p)).or_default();
                    e.0.push(f.values[j] - t);
                    if let (Some(l), Some(u)) = (&f.lower, &f.upper) {
                        e.1.push(l[j] <= t && t <= u[j]);
                    }
                }
            }
        }
    }
    raw.flush()?;
    let mut tables = ResultTables { failures, ..Default::default() };
    for ((ci, est, p), (e, cov)) in &errs {
        let cell = &m.cells[*ci];
        let param = cell.template.names()[*p].clone();
        let scale = if *p < cell.template.n_dependence() { 1e4 } else { 1e3 };
        let n = e.len();
        let (rmse, bias, se) = rmse_bias_se(e);
        tables.rmse.push(RmseRow { cell: cell.name.clone(), estimator: *est, param: param.clone(), n, scale, rmse: rmse * scale, bias: bias * scale, mc_se: se * scale });
        if !cov.is_empty() {
            let c = cov.iter().filter(|&&b| b).count() as f64 / cov.len() as f64;
            tables.coverage.push(CoverageRow {
                cell: cell.name.clone(),
                estimator: *est,
                param,
                n: cov.len(),
                coverage: 100.0 * c,
                mc_se: 100.0 * (c * (1.0 - c) / cov.len() as f64).sqrt(),
            });
        }
    }
    for (ci, v) in bfs {
        tables.bayes_factors.push(BayesFactorRow { cell: m.cells[ci].name.clone(), n: v.len(), median_b12: median(&v), values: v });
    }
    tables.checks = m.checks.iter().map(|c| evaluate_check(c, &tables)).collect();
    write_tables(out, &tables)?;
    Ok(tables)
}

/// RMSE, bias and the delta-method Monte Carlo standard error of the RMSE.
pub fn rmse_bias_se(errors: &[f64]) -> (f64, f64, f64) {
    let n = errors.len() as f64;
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for &e in errors {
        s1 += e;
        s2 += e * e;
        s4 += e * e * e * e;
    }
    let mse = s2 / n;
    let rmse = mse.sqrt();
    let var_sq = if n > 1.0 { (s4 / n - mse * mse).max(0.0) * n / (n - 1.0) } else { f64::NAN };
    let se = if rmse > 0.0 { (var_sq / n).sqrt() / (2.0 * rmse) } else { 0.0 };
    (rmse, s1 / n, se)
}

fn evaluate_check(c: &Check, t: &ResultTables) -> CheckResult {
    let (passed, detail) = match c {
        Check::RmseRatio { cell, param, numerator, denominator, max_ratio, min_gap_se } => {
            match (t.rmse_of(cell, *numerator, param), t.rmse_of(cell, *denominator, param)) {
                (Some(a), Some(b)) => {
                    let ratio = a.rmse / b.rmse;
                    let se = a.mc_se.hypot(b.mc_se);
                    let gap = (b.rmse - a.rmse) / se;
                    (
                        ratio < *max_ratio && gap > *min_gap_se,
                        format!("{} {:.1} / {} {:.1} = {ratio:.3} (< {max_ratio}); gap {gap:.2} combined SE (> {min_gap_se})", numerator.name(), a.rmse, denominator.name(), b.rmse),
                    )
                }
                _ => (false, "missing RMSE rows".into()),
            }
        }
        Check::RmseClose { cell, param, a, b, rel_tol } => match (t.rmse_of(cell, *a, param), t.rmse_of(cell, *b, param)) {
            (Some(x), Some(y)) => {
                let rel = (x.rmse - y.rmse).abs() / x.rmse.max(y.rmse);
                (rel <= *rel_tol, format!("{} {:.1} vs {} {:.1}: relative difference {rel:.3} (<= {rel_tol})", a.name(), x.rmse, b.name(), y.rmse))
            }
            _ => (false, "missing RMSE rows".into()),
        },
        Check::Coverage { cell, param, lo, hi } => match t.coverage_of(cell, param) {
            Some(r) => (*lo <= r.coverage && r.coverage <= *hi, format!("coverage {:.1}% +- {:.1} in [{lo}, {hi}]", r.coverage, r.mc_se)),
            None => (false, "missing coverage row".into()),
        },
        Check::BayesFactorMedian { cell, above, below } => match t.bayes_factors.iter().find(|r| &r.cell == cell) {
            Some(r) => {
                let ok = above.is_none_or(|a| r.median_b12 > a) && below.is_none_or(|b| r.median_b12 < b);
                (ok, format!("median B12 {:.3} over {} replicates (above {above:?}, below {below:?})", r.median_b12, r.n))
            }
            None => (false, "missing Bayes factor row".into()),
        },
    };
    CheckResult { check: c.clone(), passed, detail }
}

fn write_tables(out: &Path, t: &ResultTables) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("results.csv"))?;
    w.write_record(["cell", "estimator", "param", "n", "scale", "rmse", "bias", "mc_se"])?;
    for r in &t.rmse {
        w.write_record([r.cell.clone(), r.estimator.name().into(), r.param.clone(), r.n.to_string(), format!("{:?}", r.scale), format!("{:?}", r.rmse), format!("{:?}", r.bias), format!("{:?}", r.mc_se)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("coverage.csv"))?;
    w.write_record(["cell", "estimator", "param", "n", "coverage", "mc_se"])?;
    for r in &t.coverage {
        w.write_record([r.cell.clone(), r.estimator.name().into(), r.param.clone(), r.n.to_string(), format!("{:?}", r.coverage), format!("{:?}", r.mc_se)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("bayes_factors.csv"))?;
    w.write_record(["cell", "n", "median_b12"])?;
    for r in &t.bayes_factors {
        w.write_record([r.cell.clone(), r.n.to_string(), format!("{:?}", r.median_b12)])?;
    }
    w.flush()?;
    write_atomic(&out.join(RESULTS_FILE), serde_json::to_string_pretty(t)?.as_bytes())
}

/// Plain-text tables of a finished experiment directory.
pub fn report(dir: &Path) -> Result<String> {
    let t: ResultTables = serde_json::from_str(&std::fs::read_to_string(dir.join(RESULTS_FILE))?)?;
    let m = ExperimentManifest::read(&dir.join(MANIFEST_FILE))?;
    let mut s = format!("experiment {} ({:?}), {} replicates per cell\n", m.name, m.kind, m.replicates);
    if !t.rmse.is_empty() {
        s += "\ncell                 estimator        param        n      rmse      bias     mc_se\n";
        for r in &t.rmse {
            s += &format!("{:<20} {:<16} {:<8} {:>5} {:>9.1} {:>9.1} {:>9.1}   (x{})\n", r.cell, r.estimator.name(), r.param, r.n, r.rmse, r.bias, r.mc_se, r.scale);
        }
    }
    if !t.coverage.is_empty() {
        s += "\ncell                 param        n  coverage%   mc_se\n";
        for r in &t.coverage {
            s += &format!("{:<20} {:<8} {:>5} {:>9.1} {:>7.1}\n", r.cell, r.param, r.n, r.coverage, r.mc_se);
        }
    }
    for r in &t.bayes_factors {
        s += &format!("\n{}: median B12 = {:.4} over {} replicates\n", r.cell, r.median_b12, r.n);
    }
    for c in &t.checks {
        s += &format!("{} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    for f in &t.failures {
        s += &format!("FAILED JOB {} rep {}: {}\n", f.cell, f.rep, f.error);
    }
    Ok(s)
}
