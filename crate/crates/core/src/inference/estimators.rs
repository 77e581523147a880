//! Frequentist baselines (pairwise, independence and Stephenson–Tawn
//! maximum likelihood), the extremal-coefficient test and Bayes factors
//! for a linear trend in the shape parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chain::{run_chain, McmcConfig};
use super::optimize::{nelder_mead, NelderMeadConfig};
use super::prior::Transform;
use super::template::{MarginTemplate, ModelTemplate};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::numerics::stats::{mean, variance};
use crate::simulate::Dataset;

/// Unconstrained coordinates of bounded parameters are clipped to this
/// magnitude, which keeps e.g. a logistic `theta` above `1e-13`.
const CLAMP: f64 = 30.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub starts: usize,
    pub max_evals: usize,
    pub ftol: f64,
    pub xtol: f64,
    /// Edge of the initial simplex on the unconstrained scale.
    pub step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let nm = NelderMeadConfig::default();
        Self { starts: 5, max_evals: nm.max_evals, ftol: nm.ftol, xtol: nm.xtol, step: 0.5 }
    }
}

/// A maximizer of some log-likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    /// Maximized objective.
    pub log_lik: f64,
    /// Some coordinate sits at the edge of its parameter space.
    pub boundary: bool,
    pub converged: bool,
    pub evals: usize,
}

impl Estimate {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.x[i])
    }
}

struct Coord {
    name: String,
    transform: Transform,
    range: (f64, f64),
}

fn to_y(c: &Coord, x: f64) -> f64 {
    let y = c.transform.to_unconstrained(x);
    match c.transform {
        Transform::Identity => y,
        _ => y.clamp(-CLAMP, CLAMP),
    }
}

fn from_y(c: &Coord, y: f64) -> f64 {
    match c.transform {
        Transform::Identity => y,
        _ => c.transform.from_unconstrained(y.clamp(-CLAMP, CLAMP)),
    }
}

fn at_boundary(c: &Coord, x: f64) -> bool {
    match c.transform {
        Transform::Identity => false,
        Transform::Logit { lo, hi } => {
            let u = (x - lo) / (hi - lo);
            !(1e-4..=1.0 - 1e-4).contains(&u)
        }
        _ => to_y(c, x).abs() >= CLAMP - 5.0,
    }
}

/// Maximizes `objective` over the coordinates `free` of `x0` (others are
/// held fixed) from several starts. Objective errors count as `-inf`.
fn maximize(
    template: &ModelTemplate,
    free: &[usize],
    x0: &[f64],
    cfg: &FitConfig,
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Estimate> {
    let params = template.params();
    let coords: Vec<Coord> = free
        .iter()
        .map(|&p| Coord { name: params[p].name.clone(), transform: params[p].transform, range: params[p].prior.range() })
        .collect();
    let expand = |y: &[f64]| {
        let mut x = x0.to_vec();
        for ((&p, c), &v) in free.iter().zip(&coords).zip(y) {
            x[p] = from_y(c, v);
        }
        x
    };
    let y0: Vec<f64> = free.iter().zip(&coords).map(|(&p, c)| to_y(c, x0[p])).collect();
    let starts = start_points(&coords, &y0, cfg.starts.max(1));
    let nm = NelderMeadConfig { max_evals: cfg.max_evals, ftol: cfg.ftol, xtol: cfg.xtol };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut evals = 0;
    for s in &starts {
        let m = nelder_mead(|y| objective(&expand(y)).map(|v| -v).unwrap_or(f64::INFINITY), s, cfg.step, &nm);
        evals += m.evals;
        if best.as_ref().is_none_or(|b| m.f < b.1) {
            best = Some((m.x, m.f, m.converged));
        }
    }
    let (y, f, converged) = best.expect("at least one start");
    if !f.is_finite() {
        return Err(Error::Estimation(format!("objective not finite at any of {} starts ({evals} evaluations)", starts.len())));
    }
    let x = expand(&y);
    let boundary = free.iter().zip(&coords).any(|(&p, c)| at_boundary(c, x[p]));
    Ok(Estimate {
        names: coords.into_iter().map(|c| c.name).collect(),
        x: free.iter().map(|&p| x[p]).collect(),
        log_lik: -f,
        boundary,
        converged,
        evals,
    })
}

/// The given start, then points spread over bounded prior ranges or around
/// the start for unbounded coordinates.
fn start_points(coords: &[Coord], y0: &[f64], n: usize) -> Vec<Vec<f64>> {
    const QUANTILES: [f64; 4] = [0.15, 0.85, 0.35, 0.65];
    const OFFSETS: [f64; 4] = [-1.0, 1.0, -0.5, 0.5];
    let mut out = vec![y0.to_vec()];
    for j in 0..n - 1 {
        let s = coords
            .iter()
            .zip(y0)
            .map(|(c, &y)| {
                let (lo, hi) = c.range;
                let q = QUANTILES[j % 4];
                match c.transform {
                    Transform::Logit { .. } | Transform::Reflect { .. } if lo.is_finite() && hi.is_finite() => {
                        let x = lo + q * (hi - lo);
                        to_y(c, if matches!(c.transform, Transform::Reflect { .. }) { x / 4.0 } else { x })
                    }
                    Transform::Identity => y + OFFSETS[j % 4] * (0.25 * y.abs()).max(0.2),
                    _ => y + OFFSETS[j % 4],
                }
            })
            .collect();
        out.push(s);
    }
    out
}

/// Template initial values with free margins replaced by Gumbel moment
/// estimates from the pooled data (`xi`, trend `alpha` and `beta` at 0).
pub fn default_start(template: &ModelTemplate, data: &Dataset) -> Result<Vec<f64>> {
    let mut x = template.init();
    if matches!(template.margins, MarginTemplate::UnitFrechet | MarginTemplate::Fixed { .. }) {
        return Ok(x);
    }
    let all: Vec<f64> = data.obs.iter().flatten().copied().collect();
    let var = variance(&all);
    if !(var > 0.0) {
        return Err(Error::Estimation("degenerate sample: all observations are equal".into()));
    }
    let sigma = var.sqrt() * 6f64.sqrt() / std::f64::consts::PI;
    let mu = mean(&all) - EULER_GAMMA * sigma;
    let d = template.n_dependence();
    x[d] = mu;
    x[d + 1] = sigma;
    for v in &mut x[d + 2..] {
        *v = 0.0;
    }
    Ok(x)
}

fn check_data(template: &ModelTemplate, data: &Dataset) -> Result<()> {
    data.validate()?;
    if data.k != template.k {
        return Err(Error::InvalidArgument(format!("data has k = {}, template k = {}", data.k, template.k)));
    }
    if data.n() == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    Ok(())
}

/// Sum over observations and pairs `i < j` of the bivariate log densities.
pub fn pairwise_log_lik(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    let mut zz = [0.0; 2];
    for i in 0..spec.k {
        for j in i + 1..spec.k {
            let m = spec.marginal(&[i, j])?;
            for z in &data.obs {
                zz[0] = z[i];
                zz[1] = z[j];
                total += m.log_density_partition_sum(&zz)?;
            }
        }
    }
    Ok(total)
}

/// Sum of univariate GEV log densities over all components.
pub fn independence_log_lik(template: &ModelTemplate, x: &[f64], data: &Dataset) -> f64 {
    let margins: Vec<_> = (0..template.k).map(|i| template.margin_at(x, i).expect("free margins")).collect();
    if margins.iter().any(|g| !(g.sigma > 0.0)) {
        return f64::NEG_INFINITY;
    }
    data.obs.iter().map(|z| z.iter().zip(&margins).map(|(&v, g)| g.log_pdf(v)).sum::<f64>()).sum()
}

/// Stephenson–Tawn log-likelihood at the recorded partitions.
pub fn joint_log_lik(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    let parts = data.partitions.as_ref().ok_or(Error::MissingPartitions)?;
    data.obs.iter().zip(parts).map(|(z, t)| spec.joint_log_likelihood(z, t)).sum()
}

/// Maximum pairwise likelihood over all template parameters.
pub fn pairwise_mle(data: &Dataset, template: &ModelTemplate, init: Option<&[f64]>, cfg: &FitConfig) -> Result<Estimate> {
    check_data(template, data)?;
    let x0 = match init {
        Some(x) => x.to_vec(),
        None => default_start(template, data)?,
    };
    let free: Vec<usize> = (0..x0.len()).collect();
    maximize(template, &free, &x0, cfg, |x| pairwise_log_lik(&template.build(x)?, data))
}

/// Maximum independence likelihood over the free marginal parameters;
/// dependence is ignored.
pub fn independence_mle(data: &Dataset, template: &ModelTemplate, cfg: &FitConfig) -> Result<Estimate> {
    check_data(template, data)?;
    if matches!(template.margins, MarginTemplate::UnitFrechet | MarginTemplate::Fixed { .. }) {
        return Err(Error::InvalidArgument("template has no free margins".into()));
    }
    let x0 = default_start(template, data)?;
    let free: Vec<usize> = (template.n_dependence()..x0.len()).collect();
    maximize(template, &free, &x0, cfg, |x| Ok(independence_log_lik(template, x, data)))
}

/// Maximum joint likelihood at the partitions recorded with the data.
pub fn stephenson_tawn_mle(data: &Dataset, template: &ModelTemplate, init: Option<&[f64]>, cfg: &FitConfig) -> Result<Estimate> {
    check_data(template, data)?;
    if data.partitions.is_none() {
        return Err(Error::MissingPartitions);
    }
    let x0 = match init {
        Some(x) => x.to_vec(),
        None => default_start(template, data)?,
    };
    let free: Vec<usize> = (0..x0.len()).collect();
    maximize(template, &free, &x0, cfg, |x| joint_log_lik(&template.build(x)?, data))
}

/// Standard errors from the inverse of the observed information of `f` at
/// `x` (central differences). `None` if the Hessian is not negative
/// definite.
pub fn hessian_se(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    for i in 0..n {
        for j in i..n {
            let mut at = |di: f64, dj: f64| {
                y.copy_from_slice(x);
                y[i] += di * h[i];
                y[j] += dj * h[j];
                f(&y)
            };
            let v = if i == j {
                (at(1.0, 0.0) - 2.0 * f0 + at(-1.0, 0.0)) / (h[i] * h[i])
            } else {
                (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h[i] * h[j])
            };
            hess[(i, j)] = -v;
            hess[(j, i)] = -v;
        }
    }
    let inv = hess.cholesky()?.inverse();
    Some((0..n).map(|i| inv[(i, i)].sqrt()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStatistic {
    /// 1-based components.
    pub i: usize,
    pub j: usize,
    /// `(1/N) sum_l 1 / max(z_i, z_j)`.
    pub t_inv: f64,
    /// Its expectation `1 / tau_ij` under the hypothesized model.
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalCoeffTest {
    pub pairs: Vec<PairStatistic>,
    pub max_deviation: f64,
    pub delta: f64,
    pub reject: bool,
    /// Chebyshev bound `k(k-1) / (2 N delta^2)` on the false alarm rate.
    pub chebyshev_bound: f64,
}

/// Tests a unit Fréchet sample against the pairwise extremal coefficients
/// of `spec`: rejects when some `|T^-1 - 1/tau|` exceeds `delta`.
pub fn extremal_coeff_test(data: &Dataset, spec: &ModelSpec, delta: f64) -> Result<ExtremalCoeffTest> {
    data.validate()?;
    if data.k != spec.k || data.n() == 0 {
        return Err(Error::InvalidArgument("data and model dimensions differ or data is empty".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let n = data.n() as f64;
    let k = spec.k;
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let t_inv = data.obs.iter().map(|z| 1.0 / z[i].max(z[j])).sum::<f64>() / n;
            let expected = 1.0 / spec.pairwise_extremal_coefficient(i, j)?;
            pairs.push(PairStatistic { i: i + 1, j: j + 1, t_inv, expected });
        }
    }
    let max_deviation = pairs.iter().map(|p| (p.t_inv - p.expected).abs()).fold(0.0, f64::max);
    Ok(ExtremalCoeffTest {
        pairs,
        max_deviation,
        delta,
        reject: max_deviation > delta,
        chebyshev_bound: (k * (k - 1)) as f64 / (2.0 * n * delta * delta),
    })
}

/// `B12` for "no trend" against "trend", or a one-sided bound when one of
/// the models was never visited.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BayesFactor {
    Point { value: f64, mc_se: f64 },
    AtLeast { value: f64 },
    AtMost { value: f64 },
}

impl BayesFactor {
    pub fn value(&self) -> f64 {
        match *self {
            BayesFactor::Point { value, .. } | BayesFactor::AtLeast { value } | BayesFactor::AtMost { value } => value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendBayesFactor {
    pub bayes_factor: BayesFactor,
    /// Post-burn-in draws with `beta = 0` and `beta != 0`.
    pub n_null: usize,
    pub n_alt: usize,
    pub prior_null: f64,
}

/// Bayes factor of `beta = 0` against `beta != 0` under a trend template
/// whose `beta` prior is spike-and-slab. Posterior model probabilities are
/// trace frequencies; the Monte Carlo error uses 20 batch means.
pub fn bayes_factor_trend(data: &Dataset, template: &ModelTemplate, cfg: &McmcConfig, seed: u64) -> Result<TrendBayesFactor> {
    if template.margins != MarginTemplate::Trend {
        return Err(Error::Config("Bayes factor for a trend needs trend margins".into()));
    }
    let b = template.index_of("beta").expect("trend template has beta");
    let prior = template.params()[b].prior;
    let crate::inference::Dist::SpikeAndSlab { p0, .. } = prior.dist else {
        return Err(Error::Config("beta needs a spike-and-slab prior".into()));
    };
    let trace = run_chain(data, template, cfg, seed)?;
    Ok(trend_bayes_factor_from_draws(&trace.post_burn(b), p0))
}

/// Bayes factor from post-burn-in draws of `beta` and the prior atom mass.
pub fn trend_bayes_factor_from_draws(beta: &[f64], p0: f64) -> TrendBayesFactor {
    let ind: Vec<f64> = beta.iter().map(|&v| (v == 0.0) as u8 as f64).collect();
    let n_null = ind.iter().filter(|&&v| v == 1.0).count();
    let n = ind.len();
    let n_alt = n - n_null;
    let prior_odds = (1.0 - p0) / p0;
    let bayes_factor = if n_alt == 0 {
        BayesFactor::AtLeast { value: prior_odds * n as f64 }
    } else if n_null == 0 {
        BayesFactor::AtMost { value: prior_odds / n as f64 }
    } else {
        let p = n_null as f64 / n as f64;
        let se = batch_mean_se(&ind);
        let se = if se.is_finite() { se } else { (p * (1.0 - p) / n as f64).sqrt() };
        BayesFactor::Point { value: prior_odds * p / (1.0 - p), mc_se: prior_odds * se / (1.0 - p).powi(2) }
    };
    TrendBayesFactor { bayes_factor, n_null, n_alt, prior_null: p0 }
}

/// Standard error of a mean from 20 contiguous batches.
pub fn batch_mean_se(x: &[f64]) -> f64 {
    const B: usize = 20;
    if x.len() < 2 * B {
        return f64::NAN;
    }
    let len = x.len() / B;
    let means: Vec<f64> = (0..B).map(|b| mean(&x[b * len..(b + 1) * len])).collect();
    (variance(&means) / B as f64).sqrt()
}
