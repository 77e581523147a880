//! Metropolis–Hastings within Gibbs over the parameter vector and the latent
//! partitions of all observations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prior::ParamInfo;
use super::template::ModelTemplate;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::partition::Partition;
use crate::rng::{stream, StreamRng};
use crate::simulate::Dataset;

/// What the parameter moves see as the likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodKind {
    /// Joint likelihood of data and latent partitions.
    #[default]
    Full,
    /// Product of marginal GEV densities; partitions are not sampled.
    Independence,
    /// No data; the chain samples the prior.
    Off,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPartitions {
    #[default]
    Singletons,
    OneBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    /// Random-scan partition updates per iteration; `None` means `N * k`.
    pub gibbs_updates: Option<usize>,
    /// Initial proposal standard deviation on the transformed scale.
    pub init_step: f64,
    /// Robbins–Monro step adaptation during burn-in.
    pub adapt: bool,
    pub target_accept: f64,
    /// Proposal probability of jumping to the atom of a spike-and-slab prior.
    pub spike_prob: f64,
    pub init: Option<Vec<f64>>,
    pub init_partitions: InitPartitions,
    pub likelihood: LikelihoodKind,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_iter: 1500,
            burn_in: 500,
            gibbs_updates: None,
            init_step: 0.3,
            adapt: true,
            target_accept: 0.3,
            spike_prob: 0.5,
            init: None,
            init_partitions: InitPartitions::Singletons,
            likelihood: LikelihoodKind::Full,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return Err(Error::Config(format!("n_iter ({}) must exceed burn_in ({})", self.n_iter, self.burn_in)));
        }
        if !(self.init_step > 0.0) || !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("step and target acceptance must be positive (target < 1)".into()));
        }
        if !(self.spike_prob > 0.0 && self.spike_prob < 1.0) {
            return Err(Error::Config("spike_prob must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct ObsState {
    z: Vec<f64>,
    log_jac: f64,
    v: f64,
    w: FxHashMap<u64, f64>,
}

/// Parameter vector, partitions and per-observation caches valid for the
/// current parameter (unit Fréchet data, `V`, Jacobian, block weights).
pub struct ChainState<'a> {
    template: &'a ModelTemplate,
    data: &'a Dataset,
    pub theta: Vec<f64>,
    spec: ModelSpec,
    pub partitions: Vec<Partition>,
    obs: Vec<ObsState>,
}

fn obs_state(spec: &ModelSpec, z: &[f64]) -> Result<ObsState> {
    let (zf, log_jac) = spec.to_frechet(z)?;
    let v = spec.exponent(&zf)?;
    Ok(ObsState { z: zf, log_jac, v, w: FxHashMap::default() })
}

impl<'a> ChainState<'a> {
    pub fn new(template: &'a ModelTemplate, data: &'a Dataset, theta: Vec<f64>, partitions: Vec<Partition>) -> Result<Self> {
        if data.k != template.k {
            return Err(Error::InvalidArgument(format!("data have k = {}, model k = {}", data.k, template.k)));
        }
        if data.n() == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        if partitions.len() != data.n() || partitions.iter().any(|p| p.k() != data.k) {
            return Err(Error::InvalidArgument("one partition of {1..k} per observation required".into()));
        }
        let spec = template.build(&theta)?;
        let obs = data.obs.iter().map(|z| obs_state(&spec, z)).collect::<Result<_>>()?;
        Ok(Self { template, data, theta, spec, partitions, obs })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    fn weight(&mut self, l: usize, mask: u64) -> Result<f64> {
        let o = &mut self.obs[l];
        if let Some(&w) = o.w.get(&mask) {
            return Ok(w);
        }
        let w = self.spec.log_weight_unchecked(mask, &o.z)?;
        if w.is_nan() {
            return Err(Error::Numeric(format!("NaN weight for block {mask:#b} of observation {l}")));
        }
        o.w.insert(mask, w);
        Ok(w)
    }

    /// `ln L(z_l, tau_l; theta)` using cached weights.
    pub fn log_lik_obs(&mut self, l: usize) -> Result<f64> {
        let masks = self.partitions[l].masks().to_vec();
        let mut s = self.obs[l].log_jac - self.obs[l].v;
        for m in masks {
            s += self.weight(l, m)?;
        }
        Ok(s)
    }

    pub fn log_likelihood(&mut self) -> Result<f64> {
        (0..self.n()).map(|l| self.log_lik_obs(l)).sum()
    }

    /// The same quantity evaluated without any cache.
    pub fn log_likelihood_from_scratch(&self) -> Result<f64> {
        let spec = self.template.build(&self.theta)?;
        self.data.obs.iter().zip(&self.partitions).map(|(z, t)| spec.joint_log_likelihood(z, t)).sum()
    }

    pub fn mean_blocks(&self) -> f64 {
        self.partitions.iter().map(|p| p.len() as f64).sum::<f64>() / self.n() as f64
    }

    /// Candidates for component `i` of observation `l` given the rest of its
    /// partition, with normalized probabilities.
    pub fn gibbs_candidates(&mut self, l: usize, i: usize) -> Result<(Vec<Vec<u64>>, Vec<f64>)> {
        let k = self.data.k;
        if l >= self.n() || i >= k {
            return Err(Error::IndexOutOfRange { index: if l >= self.n() { l } else { i }, k });
        }
        let masks = self.partitions[l].masks().to_vec();
        conditional(&masks, i, |m| self.weight(l, m))
    }

    /// One exact Gibbs update of component `i` of partition `l`.
    pub fn gibbs_partition_step<R: Rng + ?Sized>(&mut self, l: usize, i: usize, rng: &mut R) -> Result<()> {
        let (cands, probs) = self.gibbs_candidates(l, i)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (j, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = j;
                break;
            }
        }
        self.partitions[l] = Partition::from_masks(self.data.k, cands[pick].clone())?;
        Ok(())
    }

    /// Log-likelihood at `x` under `kind`, with the caches that would replace
    /// the current ones; `None` when `x` is outside the model.
    fn evaluate(&self, x: &[f64], kind: LikelihoodKind) -> Result<Option<(f64, ModelSpec, Vec<ObsState>)>> {
        let spec = match self.template.build(x) {
            Ok(s) => s,
            Err(Error::InvalidArgument(_) | Error::NotPositiveDefinite(_) | Error::Config(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        match kind {
            LikelihoodKind::Off => Ok(Some((0.0, spec, Vec::new()))),
            LikelihoodKind::Independence => {
                let mut s = 0.0;
                for z in &self.data.obs {
                    for (i, &v) in z.iter().enumerate() {
                        let g = self.template.margin_at(x, i).unwrap_or_else(crate::models::GevMargin::unit_frechet);
                        s += g.log_pdf(v);
                    }
                }
                Ok(if s.is_finite() { Some((s, spec, Vec::new())) } else { None })
            }
            LikelihoodKind::Full => {
                let mut obs = Vec::with_capacity(self.n());
                let mut total = 0.0;
                for (z, tau) in self.data.obs.iter().zip(&self.partitions) {
                    let mut o = match obs_state(&spec, z) {
                        Ok(o) => o,
                        Err(Error::OutOfSupport { .. }) => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    let mut s = o.log_jac - o.v;
                    for &m in tau.masks() {
                        let w = spec.log_weight_unchecked(m, &o.z)?;
                        o.w.insert(m, w);
                        s += w;
                    }
                    obs.push(o);
                    total += s;
                }
                Ok(if total.is_finite() { Some((total, spec, obs)) } else { None })
            }
        }
    }

    fn current_log_lik(&mut self, kind: LikelihoodKind) -> Result<f64> {
        match kind {
            LikelihoodKind::Full => self.log_likelihood(),
            _ => Ok(self.evaluate(&self.theta.clone(), kind)?.map(|e| e.0).unwrap_or(f64::NEG_INFINITY)),
        }
    }

    /// Metropolis–Hastings update of parameter `p` with proposal scale
    /// `step`. Returns whether the move was accepted.
    pub fn mh_parameter_step<R: Rng + ?Sized>(
        &mut self,
        p: usize,
        info: &ParamInfo,
        step: f64,
        cfg: &McmcConfig,
        rng: &mut R,
    ) -> Result<bool> {
        let cur = self.current_log_lik(cfg.likelihood)?;
        let mut pending = None;
        let kind = cfg.likelihood;
        let theta = self.theta.clone();
        let accepted = {
            let this = &*self;
            mh_component(&theta, p, info, step, cfg.spike_prob, cur, rng, |x| {
                Ok(this.evaluate(x, kind)?.map(|(ll, spec, obs)| {
                    pending = Some((x.to_vec(), spec, obs));
                    ll
                }))
            })?
        };
        if accepted {
            if let Some((x, spec, obs)) = pending {
                self.theta = x;
                self.spec = spec;
                if kind == LikelihoodKind::Full {
                    self.obs = obs;
                }
            }
        }
        Ok(accepted)
    }
}

/// Candidate partitions (as block masks) for component `i` and their
/// normalized probabilities. Only the block that receives `i` changes, so
/// each candidate's weight is `w(B + i) / w(B)`, or `w({i})` for a new block.
pub fn conditional(masks: &[u64], i: usize, mut log_w: impl FnMut(u64) -> Result<f64>) -> Result<(Vec<Vec<u64>>, Vec<f64>)> {
    let bit = 1u64 << i;
    let rest: Vec<u64> = masks.iter().map(|&m| m & !bit).filter(|&m| m != 0).collect();
    let mut cands = Vec::with_capacity(rest.len() + 1);
    let mut lw = Vec::with_capacity(rest.len() + 1);
    for j in 0..rest.len() {
        let mut c = rest.clone();
        c[j] |= bit;
        lw.push(log_w(c[j])? - log_w(rest[j])?);
        cands.push(c);
    }
    let mut c = rest;
    c.push(bit);
    lw.push(log_w(bit)?);
    cands.push(c);
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric(format!("no candidate with finite weight for component {}", i + 1)));
    }
    let e: Vec<f64> = lw.iter().map(|w| (w - max).exp()).collect();
    let tot: f64 = e.iter().sum();
    Ok((cands, e.into_iter().map(|v| v / tot).collect()))
}

/// Exact conditional law of the partition at component `i` given the rest,
/// computed directly from the model (no caching).
pub fn gibbs_conditional(spec: &ModelSpec, z: &[f64], tau: &Partition, i: usize) -> Result<Vec<(Partition, f64)>> {
    let (zf, _) = spec.to_frechet(z)?;
    let (cands, probs) = conditional(tau.masks(), i, |m| spec.log_weight(m, &zf))?;
    cands.into_iter().zip(probs).map(|(c, p)| Ok((Partition::from_masks(tau.k(), c)?, p))).collect()
}

/// Componentwise Metropolis–Hastings kernel on parameter `p` of `x`.
///
/// `eval` returns the log-likelihood at a proposed vector, or `None` if the
/// vector is outside the model. Priors with an atom at zero get a mixed
/// proposal: the atom with probability `spike_prob`, otherwise a Gaussian
/// step; the acceptance ratio treats the atom as a point mass.
#[allow(clippy::too_many_arguments)]
pub fn mh_component<R: Rng + ?Sized>(
    x: &[f64],
    p: usize,
    info: &ParamInfo,
    step: f64,
    spike_prob: f64,
    cur_log_lik: f64,
    rng: &mut R,
    mut eval: impl FnMut(&[f64]) -> Result<Option<f64>>,
) -> Result<bool> {
    let old = x[p];
    let (new, log_q) = if info.prior.has_atom() {
        let n: f64 = StandardNormal.sample(rng);
        let new = if rng.random::<f64>() < spike_prob { 0.0 } else { old + step * n };
        let log_q_to = |from: f64, to: f64| {
            if to == 0.0 {
                spike_prob.ln()
            } else {
                let u = (to - from) / step;
                (1.0 - spike_prob).ln() - 0.5 * u * u - step.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        };
        if new == 0.0 && old == 0.0 {
            return Ok(true);
        }
        (new, log_q_to(new, old) - log_q_to(old, new))
    } else {
        info.transform.propose(old, step, rng)
    };
    let lp_new = info.prior.log_density(new);
    if lp_new == f64::NEG_INFINITY {
        return Ok(false);
    }
    let lp_old = info.prior.log_density(old);
    let mut y = x.to_vec();
    y[p] = new;
    let Some(ll_new) = eval(&y)? else {
        return Ok(false);
    };
    let log_a = ll_new - cur_log_lik + lp_new - lp_old + log_q;
    let u: f64 = rng.random();
    Ok(log_a >= 0.0 || u.ln() < log_a)
}

/// A chain's record: every iteration's parameter vector, mean block count
/// and number of accepted parameter moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub names: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub mean_blocks: Vec<f64>,
    pub accepted: Vec<u32>,
    pub burn_in: usize,
    pub seed: u64,
    pub config_hash: String,
    pub acceptance_rates: Vec<f64>,
    pub final_steps: Vec<f64>,
    pub runtime_secs: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    names: Vec<String>,
    burn_in: usize,
    seed: u64,
    config_hash: String,
    acceptance_rates: Vec<f64>,
    final_steps: Vec<f64>,
    runtime_secs: f64,
}

impl Trace {
    /// Post-burn-in draws of parameter `p`.
    pub fn post_burn(&self, p: usize) -> Vec<f64> {
        self.samples[self.burn_in.min(self.samples.len())..].iter().map(|s| s[p]).collect()
    }

    pub fn post_burn_blocks(&self) -> Vec<f64> {
        self.mean_blocks[self.burn_in.min(self.mean_blocks.len())..].to_vec()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// CSV `iter,<names..>,mean_blocks,accepted` plus a JSON sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["iter".to_string()];
        header.extend(self.names.iter().cloned());
        header.push("mean_blocks".into());
        header.push("accepted".into());
        w.write_record(&header)?;
        for (t, s) in self.samples.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(s.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", self.mean_blocks[t]));
            rec.push(self.accepted[t].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        let side = Sidecar {
            names: self.names.clone(),
            burn_in: self.burn_in,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            acceptance_rates: self.acceptance_rates.clone(),
            final_steps: self.final_steps.clone(),
            runtime_secs: self.runtime_secs,
        };
        std::fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    /// Reads a trace CSV; the sidecar is used when present, otherwise the
    /// burn-in is taken as zero.
    pub fn read(path: &Path) -> Result<Trace> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let n = header.len();
        if n < 4 || &header[0] != "iter" || &header[n - 2] != "mean_blocks" || &header[n - 1] != "accepted" {
            return Err(Error::Parse(format!("{}: expected iter,<params>,mean_blocks,accepted", path.display())));
        }
        let names: Vec<String> = header.iter().skip(1).take(n - 3).map(String::from).collect();
        let mut t = Trace {
            names,
            samples: Vec::new(),
            mean_blocks: Vec::new(),
            accepted: Vec::new(),
            burn_in: 0,
            seed: 0,
            config_hash: String::new(),
            acceptance_rates: Vec::new(),
            final_steps: Vec::new(),
            runtime_secs: 0.0,
        };
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| !v.is_nan())
                    .ok_or_else(|| Error::Parse(format!("{}: bad value in row {}, column {}", path.display(), row + 2, j + 1)))
            };
            t.samples.push((1..n - 2).map(num).collect::<Result<_>>()?);
            t.mean_blocks.push(num(n - 2)?);
            t.accepted.push(num(n - 1)? as u32);
        }
        if t.samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let side = Self::sidecar_path(path);
        if side.exists() {
            let s: Sidecar = serde_json::from_str(&std::fs::read_to_string(side)?)?;
            if s.names != t.names {
                return Err(Error::Parse("trace sidecar names do not match the CSV header".into()));
            }
            t.burn_in = s.burn_in;
            t.seed = s.seed;
            t.config_hash = s.config_hash;
            t.acceptance_rates = s.acceptance_rates;
            t.final_steps = s.final_steps;
            t.runtime_secs = s.runtime_secs;
        }
        Ok(t)
    }
}

/// Short hex digest identifying a run (model, configuration, seed, data).
pub fn config_hash(template: &ModelTemplate, cfg: &McmcConfig, seed: u64, data: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(template).unwrap_or_default());
    h.update(serde_json::to_vec(cfg).unwrap_or_default());
    h.update(seed.to_le_bytes());
    for z in &data.obs {
        for v in z {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Runs the sampler on `data` with the stream derived from `seed`.
pub fn run_chain(data: &Dataset, template: &ModelTemplate, cfg: &McmcConfig, seed: u64) -> Result<Trace> {
    let mut rng = stream(seed, "chain", &[]);
    run_chain_with(data, template, cfg, seed, &mut rng)
}

pub fn run_chain_with(data: &Dataset, template: &ModelTemplate, cfg: &McmcConfig, seed: u64, rng: &mut StreamRng) -> Result<Trace> {
    cfg.validate()?;
    template.validate()?;
    if data.k < 2 || data.n() == 0 {
        return Err(Error::Config("need N >= 1 observations with k >= 2".into()));
    }
    let start = Instant::now();
    let params = template.params();
    let np = params.len();
    let init = cfg.init.clone().unwrap_or_else(|| template.init());
    if init.len() != np {
        return Err(Error::Config(format!("init has {} values, model has {np} parameters", init.len())));
    }
    let p0 = match cfg.init_partitions {
        InitPartitions::Singletons => Partition::singletons(data.k),
        InitPartitions::OneBlock => Partition::one_block(data.k),
    };
    let mut state = ChainState::new(template, data, init, vec![p0; data.n()])?;
    let gibbs = if cfg.likelihood == LikelihoodKind::Full { cfg.gibbs_updates.unwrap_or(data.n() * data.k) } else { 0 };
    // Burn-in runs on the slab alone so the step adapts to the posterior
    // scale; atom-to-atom moves are always accepted and would drive the
    // Robbins-Monro step towards its upper clamp.
    let burn_params: Vec<ParamInfo> = params.iter().map(|p| ParamInfo { prior: p.prior.slab(), ..p.clone() }).collect();
    let mut steps = vec![cfg.init_step; np];
    let mut acc_post = vec![0usize; np];
    let mut t = Trace {
        names: params.iter().map(|p| p.name.clone()).collect(),
        samples: Vec::with_capacity(cfg.n_iter),
        mean_blocks: Vec::with_capacity(cfg.n_iter),
        accepted: Vec::with_capacity(cfg.n_iter),
        burn_in: cfg.burn_in,
        seed,
        config_hash: config_hash(template, cfg, seed, data),
        acceptance_rates: Vec::new(),
        final_steps: Vec::new(),
        runtime_secs: 0.0,
    };
    for it in 0..cfg.n_iter {
        let mut n_acc = 0u32;
        for p in 0..np {
            let info = if it < cfg.burn_in { &burn_params[p] } else { &params[p] };
            let a = state.mh_parameter_step(p, info, steps[p], cfg, rng)?;
            n_acc += a as u32;
            if it < cfg.burn_in {
                if cfg.adapt {
                    let gain = 1.0 / ((it + 1) as f64).powf(0.6);
                    steps[p] = (steps[p].ln() + gain * (a as u8 as f64 - cfg.target_accept)).exp().clamp(1e-6, 1e3);
                }
            } else {
                acc_post[p] += a as usize;
            }
        }
        for _ in 0..gibbs {
            let l = rng.random_range(0..data.n());
            let i = rng.random_range(0..data.k);
            state.gibbs_partition_step(l, i, rng)?;
        }
        t.samples.push(state.theta.clone());
        t.mean_blocks.push(state.mean_blocks());
        t.accepted.push(n_acc);
    }
    let kept = (cfg.n_iter - cfg.burn_in) as f64;
    t.acceptance_rates = acc_post.iter().map(|&a| a as f64 / kept).collect();
    t.final_steps = steps;
    t.runtime_secs = start.elapsed().as_secs_f64();
    Ok(t)
}
