//! Samplers for max-stable vectors and for block maxima in their domain of
//! attraction.

pub mod dataset;
pub mod extremal;
pub mod stable;

pub use dataset::{read_csv, write_csv, Dataset};
pub use extremal::ExtremalSampler;
pub use stable::{sample_logistic, OuterPowerClayton};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dependence, ModelSpec};
use crate::partition::Partition;
use crate::rng::stream;

/// How observations are generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SimMode {
    /// Exact draws from the max-stable model.
    ExactMaxStable,
    /// Componentwise maxima of `block_size` outer-power Clayton vectors,
    /// divided by `block_size`. The model must be logistic; its `theta` is
    /// the attractor parameter.
    BlockMaxima {
        block_size: usize,
        #[serde(default = "default_clayton_c")]
        clayton_c: f64,
    },
}

fn default_clayton_c() -> f64 {
    1.0
}

/// A fully specified simulation: replicate `r` of the job is drawn from the
/// stream `(seed, "sim", r)`, so any replicate can be regenerated alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimJob {
    pub spec: ModelSpec,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub mode: SimMode,
}

impl SimJob {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        if let SimMode::BlockMaxima { block_size, clayton_c } = self.mode {
            if block_size == 0 {
                return Err(Error::Config("block_size must be >= 1".into()));
            }
            let Dependence::Logistic(p) = &self.spec.dependence else {
                return Err(Error::Config("block maxima are drawn for logistic targets only".into()));
            };
            OuterPowerClayton::for_logistic(p.theta, clayton_c)?;
        }
        Ok(())
    }

    /// Replicate `rep` on the scale of the model's margins.
    pub fn run(&self, rep: u64) -> Result<Dataset> {
        self.validate()?;
        let mut rng = stream(self.seed, "sim", &[rep]);
        let k = self.spec.k;
        let mut data = match (&self.mode, &self.spec.dependence) {
            (SimMode::ExactMaxStable, Dependence::Logistic(p)) => {
                let obs = (0..self.n_samples).map(|_| sample_logistic(p.theta, k, &mut rng)).collect::<Result<_>>()?;
                Dataset::new(k, obs)?
            }
            (SimMode::ExactMaxStable, _) => {
                let sampler = ExtremalSampler::new(&self.spec)?;
                let (obs, parts): (Vec<_>, Vec<_>) =
                    (0..self.n_samples).map(|_| sampler.sample(&mut rng)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
                Dataset::new(k, obs)?.with_partitions(parts)?
            }
            (SimMode::BlockMaxima { block_size, clayton_c }, Dependence::Logistic(p)) => {
                let cop = OuterPowerClayton::for_logistic(p.theta, *clayton_c)?;
                block_maxima(&cop, k, *block_size, self.n_samples, &mut rng)?
            }
            (SimMode::BlockMaxima { .. }, _) => unreachable!("validated"),
        };
        if let Some(m) = &self.spec.margins {
            for z in &mut data.obs {
                for (v, g) in z.iter_mut().zip(m) {
                    *v = g.from_frechet(*v);
                }
            }
        }
        Ok(data)
    }

    /// Replicates `0..n_reps`, computed in parallel; identical to calling
    /// [`SimJob::run`] for each.
    pub fn run_replicates(&self, n_reps: u64) -> Result<Vec<Dataset>> {
        (0..n_reps).into_par_iter().map(|r| self.run(r)).collect()
    }
}

/// `n` rescaled block maxima of `b` outer-power Clayton vectors attracted to
/// the logistic law with `theta_target`, with the occurrence-time partitions
/// (components whose maxima occur in the same vector share a block; the
/// first occurrence wins exact ties).
pub fn sample_block_maxima_clayton<R: Rng + ?Sized>(
    theta_target: f64,
    k: usize,
    b: usize,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    let cop = OuterPowerClayton::for_logistic(theta_target, 1.0)?;
    block_maxima(&cop, k, b, n, rng)
}

fn block_maxima<R: Rng + ?Sized>(cop: &OuterPowerClayton, k: usize, b: usize, n: usize, rng: &mut R) -> Result<Dataset> {
    if b == 0 {
        return Err(Error::InvalidArgument("block size must be >= 1".into()));
    }
    let mut obs = Vec::with_capacity(n);
    let mut parts = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(k);
    for _ in 0..n {
        let mut max = vec![f64::NEG_INFINITY; k];
        let mut when = vec![0usize; k];
        for t in 0..b {
            cop.sample_frechet(k, rng, &mut x);
            for i in 0..k {
                if x[i] > max[i] {
                    max[i] = x[i];
                    when[i] = t;
                }
            }
        }
        let mut times: Vec<usize> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &t) in when.iter().enumerate() {
            match times.iter().position(|&s| s == t) {
                Some(j) => blocks[j].push(i),
                None => {
                    times.push(t);
                    blocks.push(vec![i]);
                }
            }
        }
        parts.push(Partition::new(k, blocks)?);
        obs.push(max.into_iter().map(|m| m / b as f64).collect());
    }
    Dataset::new(k, obs)?.with_partitions(parts)
}
