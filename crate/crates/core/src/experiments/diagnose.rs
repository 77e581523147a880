//! Plot data for chains: histograms, kernel density estimates, ACF and
//! mean-block-count series, plus a replication check across traces.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::summary::batch_median_se;
use crate::inference::Trace;
use crate::numerics::stats::{acf, median, quantile_sorted, variance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    pub bins: usize,
    pub kde_points: usize,
    pub max_lag: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { bins: 30, kde_points: 200, max_lag: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over the data range; a constant series yields a
/// single bin.
pub fn histogram(x: &[f64], bins: usize) -> Histogram {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() {
        return Histogram { edges: vec![], counts: vec![] };
    }
    if !(hi > lo) {
        return Histogram { edges: vec![lo, hi], counts: vec![x.len()] };
    }
    let bins = bins.max(1);
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for &v in x {
        counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
    }
    Histogram { edges: (0..=bins).map(|i| lo + i as f64 * w).collect(), counts }
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let sd = variance(x).sqrt();
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (x.len() as f64).powf(-0.2)
}

/// Gaussian kernel density on `points` grid points spanning the data
/// range plus three bandwidths. Empty for a constant series.
pub fn kde(x: &[f64], points: usize) -> Vec<(f64, f64)> {
    let h = silverman_bandwidth(x);
    if !(h > 0.0) || points < 2 {
        return Vec::new();
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..points)
        .map(|i| {
            let g = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (g, norm * x.iter().map(|&v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub median: f64,
    pub median_se: f64,
    pub bandwidth: f64,
    pub occupied_bins: usize,
    pub acf_lag30: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceDiagnostics {
    pub path: PathBuf,
    pub seed: u64,
    pub n_post_burn: usize,
    pub params: Vec<ParamDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCheck {
    pub param: String,
    pub traces: (usize, usize),
    pub difference: f64,
    pub combined_se: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub traces: Vec<TraceDiagnostics>,
    /// First trace against each other trace: medians within two combined
    /// Monte Carlo standard errors.
    pub replication: Vec<ReplicationCheck>,
}

impl DiagnoseReport {
    pub fn all_passed(&self) -> bool {
        self.replication.iter().all(|r| r.passed)
    }
}

fn stem(path: &Path, i: usize) -> String {
    let s = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    format!("{i:02}-{s}")
}

/// Reads each trace, writes `<stem>.hist.csv`, `.kde.csv`, `.acf.csv` and
/// `.blocks.csv` plus `diagnose.json` into `out`.
pub fn diagnose(paths: &[PathBuf], out: &Path, cfg: &DiagnoseConfig) -> Result<DiagnoseReport> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("diagnose needs at least one trace".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut traces = Vec::new();
    let mut loaded = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let t = Trace::read(p)?;
        if t.samples.len() <= t.burn_in {
            return Err(Error::Parse(format!("{}: no draws after burn-in", p.display())));
        }
        let st = stem(p, i);
        let mut hist = csv::Writer::from_path(out.join(format!("{st}.hist.csv")))?;
        hist.write_record(["param", "lo", "hi", "count", "density"])?;
        let mut dens = csv::Writer::from_path(out.join(format!("{st}.kde.csv")))?;
        dens.write_record(["param", "x", "density"])?;
        let mut ac = csv::Writer::from_path(out.join(format!("{st}.acf.csv")))?;
        ac.write_record(["param", "lag", "acf"])?;
        let mut params = Vec::new();
        for (j, name) in t.names.iter().enumerate() {
            let x = t.post_burn(j);
            let h = histogram(&x, cfg.bins);
            let n = x.len() as f64;
            for b in 0..h.counts.len() {
                let w = h.edges[b + 1] - h.edges[b];
                let d = if w > 0.0 { h.counts[b] as f64 / (n * w) } else { f64::INFINITY };
                hist.write_record([name.clone(), format!("{:?}", h.edges[b]), format!("{:?}", h.edges[b + 1]), h.counts[b].to_string(), format!("{d:?}")])?;
            }
            for (g, d) in kde(&x, cfg.kde_points) {
                dens.write_record([name.clone(), format!("{g:?}"), format!("{d:?}")])?;
            }
            for lag in 0..=cfg.max_lag.min(x.len().saturating_sub(1)) {
                ac.write_record([name.clone(), lag.to_string(), format!("{:?}", acf(&x, lag))])?;
            }
            params.push(ParamDiagnostics {
                name: name.clone(),
                median: median(&x),
                median_se: batch_median_se(&x),
                bandwidth: silverman_bandwidth(&x),
                occupied_bins: h.counts.iter().filter(|&&c| c > 0).count(),
                acf_lag30: if x.len() > 30 { acf(&x, 30) } else { f64::NAN },
            });
        }
        hist.flush()?;
        dens.flush()?;
        ac.flush()?;
        let mut bl = csv::Writer::from_path(out.join(format!("{st}.blocks.csv")))?;
        bl.write_record(["iter", "mean_blocks"])?;
        for (it, m) in t.mean_blocks.iter().enumerate() {
            bl.write_record([it.to_string(), format!("{m:?}")])?;
        }
        bl.flush()?;
        traces.push(TraceDiagnostics { path: p.clone(), seed: t.seed, n_post_burn: t.samples.len() - t.burn_in, params });
        loaded.push(t);
    }
    let mut replication = Vec::new();
    for b in 1..traces.len() {
        if loaded[b].names != loaded[0].names {
            continue;
        }
        for (pa, pb) in traces[0].params.iter().zip(&traces[b].params) {
            let combined_se = pa.median_se.hypot(pb.median_se);
            let difference = (pa.median - pb.median).abs();
            replication.push(ReplicationCheck {
                param: pa.name.clone(),
                traces: (0, b),
                difference,
                combined_se,
                passed: difference <= 2.0 * combined_se || difference == 0.0,
            });
        }
    }
    let report = DiagnoseReport { traces, replication };
    std::fs::write(out.join("diagnose.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
