//! Posterior summaries of a trace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::chain::Trace;
use crate::error::{Error, Result};
use crate::numerics::stats::{acf, mean, quantile_sorted, variance};

/// Lags reported by default.
pub const DEFAULT_LAGS: [usize; 4] = [1, 5, 10, 30];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub name: String,
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    /// Batch-means standard error of the median.
    pub median_se: f64,
    pub acf: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub n_samples: usize,
    pub params: Vec<SeriesSummary>,
    pub mean_blocks: SeriesSummary,
    pub acceptance_rates: Vec<f64>,
}

impl PosteriorSummary {
    pub fn param(&self, name: &str) -> Option<&SeriesSummary> {
        self.params.iter().find(|s| s.name == name)
    }
}

/// Median, mean, equal-tailed interval at `level` and autocorrelations of
/// a series of draws.
pub fn summarize_series(name: &str, x: &[f64], level: f64, lags: &[usize]) -> Result<SeriesSummary> {
    if x.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("credible level must lie in (0, 1), got {level}")));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(SeriesSummary {
        name: name.to_string(),
        median: quantile_sorted(&s, 0.5),
        mean: mean(x),
        sd: variance(x).sqrt(),
        lower: quantile_sorted(&s, (1.0 - level) / 2.0),
        upper: quantile_sorted(&s, (1.0 + level) / 2.0),
        median_se: batch_median_se(x),
        acf: lags.iter().map(|&l| (l, acf(x, l))).collect(),
    })
}

/// Standard error of the median from 20 contiguous batches.
pub fn batch_median_se(x: &[f64]) -> f64 {
    const B: usize = 20;
    if x.len() < 2 * B {
        return f64::NAN;
    }
    let len = x.len() / B;
    let meds: Vec<f64> = (0..B)
        .map(|b| {
            let mut s = x[b * len..(b + 1) * len].to_vec();
            s.sort_by(f64::total_cmp);
            quantile_sorted(&s, 0.5)
        })
        .collect();
    (variance(&meds) / B as f64).sqrt()
}

pub fn posterior_summary(trace: &Trace, level: f64) -> Result<PosteriorSummary> {
    if trace.samples.len() <= trace.burn_in {
        return Err(Error::EmptyTrace);
    }
    let params = trace
        .names
        .iter()
        .enumerate()
        .map(|(p, n)| summarize_series(n, &trace.post_burn(p), level, &DEFAULT_LAGS))
        .collect::<Result<_>>()?;
    Ok(PosteriorSummary {
        level,
        n_samples: trace.samples.len() - trace.burn_in,
        params,
        mean_blocks: summarize_series("mean_blocks", &trace.post_burn_blocks(), level, &DEFAULT_LAGS)?,
        acceptance_rates: trace.acceptance_rates.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_trace() {
        let s = summarize_series("c", &[2.5; 100], 0.95, &DEFAULT_LAGS).unwrap();
        assert_eq!((s.median, s.lower, s.upper), (2.5, 2.5, 2.5));
        assert!(s.acf.values().all(|&a| a == 1.0));
        assert!(summarize_series("e", &[], 0.95, &[1]).is_err());
    }

    #[test]
    fn iid_normal_trace() {
        let mut rng = stream(1, "summary", &[]);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = summarize_series("n", &x, 0.95, &DEFAULT_LAGS).unwrap();
        assert!(s.median.abs() < 0.04);
        assert!((s.lower + 1.96).abs() < 0.1 && (s.upper - 1.96).abs() < 0.1);
        assert!(s.median_se > 0.005 && s.median_se < 0.03);
    }

    #[test]
    fn ar1_autocorrelation() {
        let mut rng = stream(2, "summary", &[]);
        let phi: f64 = 0.8;
        let mut x = vec![0.0f64];
        for _ in 1..20_000 {
            let e: f64 = StandardNormal.sample(&mut rng);
            x.push(phi * x.last().unwrap() + e);
        }
        let s = summarize_series("ar", &x, 0.9, &[1, 2, 5, 10]).unwrap();
        for (&lag, &a) in &s.acf {
            assert!((a - phi.powi(lag as i32)).abs() < 0.1, "lag {lag}: {a}");
        }
    }
}
