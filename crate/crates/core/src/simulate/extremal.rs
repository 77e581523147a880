//! Exact simulation by extremal functions.
//!
//! For each site `j` a Poisson process of spectral functions drawn from the
//! size-biased law `P_j` (normalized so that `Y_j = 1`) is run until its
//! points can no longer exceed the current maximum at `j`. Functions that
//! would have exceeded the maximum at an earlier site were already counted
//! and are discarded.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::models::{Dependence, ModelSpec};
use crate::partition::Partition;

/// Default cap on spectral functions per site.
pub const DEFAULT_BUDGET: usize = 10_000;

#[derive(Clone, Debug)]
struct GaussSite {
    others: Vec<usize>,
    chol: DMatrix<f64>,
    shift: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Law {
    Dirichlet { alpha: Vec<f64>, base: Vec<Gamma<f64>>, biased: Vec<Gamma<f64>> },
    HuslerReiss { sites: Vec<GaussSite> },
    ExtremalT { nu: f64, chi: ChiSquared<f64>, sites: Vec<GaussSite> },
}

/// Sampler for the Dirichlet, Hüsler–Reiss and extremal-t families.
#[derive(Clone, Debug)]
pub struct ExtremalSampler {
    k: usize,
    law: Law,
    budget: usize,
}

fn lower_chol(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m);
    }
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

impl ExtremalSampler {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.k;
        let law = match &spec.dependence {
            Dependence::Logistic(_) => {
                return Err(Error::InvalidArgument("logistic data use the stable-mixture sampler".into()))
            }
            Dependence::Dirichlet(p) => {
                let gamma = |a: f64| Gamma::new(a, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()));
                Law::Dirichlet {
                    alpha: p.alpha.clone(),
                    base: p.alpha.iter().map(|&a| gamma(a)).collect::<Result<_>>()?,
                    biased: p.alpha.iter().map(|&a| gamma(a + 1.0)).collect::<Result<_>>()?,
                }
            }
            Dependence::HuslerReiss(p) => {
                let l = p.lambda_sq();
                let sites = (0..k)
                    .map(|j| {
                        let others: Vec<usize> = (0..k).filter(|&i| i != j).collect();
                        let chol = lower_chol(p.sigma_p(j, &others), "Hüsler–Reiss conditional covariance")?;
                        let shift = others.iter().map(|&i| -2.0 * l[(i, j)]).collect();
                        Ok(GaussSite { others, chol, shift })
                    })
                    .collect::<Result<_>>()?;
                Law::HuslerReiss { sites }
            }
            Dependence::ExtremalT(p) => {
                let s = p.sigma().matrix();
                let nu = p.nu;
                let sites = (0..k)
                    .map(|j| {
                        let others: Vec<usize> = (0..k).filter(|&i| i != j).collect();
                        let m = others.len();
                        let cov = DMatrix::from_fn(m, m, |a, b| {
                            let (i, l) = (others[a], others[b]);
                            (s[(i, l)] - s[(i, j)] * s[(l, j)]) / (nu + 1.0)
                        });
                        let chol = lower_chol(cov, "extremal-t conditional scale")?;
                        let shift = others.iter().map(|&i| s[(i, j)]).collect();
                        Ok(GaussSite { others, chol, shift })
                    })
                    .collect::<Result<_>>()?;
                let chi = ChiSquared::new(nu + 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Law::ExtremalT { nu, chi, sites }
            }
        };
        Ok(Self { k, law, budget: DEFAULT_BUDGET })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget.max(1);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// One spectral function from `P_j`, written into `y` (`y[j] = 1`).
    pub fn spectral<R: Rng + ?Sized>(&self, j: usize, rng: &mut R, y: &mut [f64]) {
        match &self.law {
            Law::Dirichlet { alpha, base, biased } => {
                let wj = biased[j].sample(rng) / alpha[j];
                for i in 0..self.k {
                    y[i] = if i == j { 1.0 } else { base[i].sample(rng) / alpha[i] / wj };
                }
            }
            Law::HuslerReiss { sites } => {
                let site = &sites[j];
                let x = gauss(&site.chol, rng);
                y[j] = 1.0;
                for (a, &i) in site.others.iter().enumerate() {
                    y[i] = (x[a] + site.shift[a]).exp();
                }
            }
            Law::ExtremalT { nu, chi, sites } => {
                let site = &sites[j];
                let x = gauss(&site.chol, rng);
                let w = ((nu + 1.0) / chi.sample(rng)).sqrt();
                y[j] = 1.0;
                for (a, &i) in site.others.iter().enumerate() {
                    y[i] = (site.shift[a] + w * x[a]).max(0.0).powf(*nu);
                }
            }
        }
    }

    /// One exact draw with unit Fréchet margins and the partition of
    /// components by the spectral function that attains their maximum.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<f64>, Partition)> {
        let k = self.k;
        let mut z = vec![0.0; k];
        let mut owner = vec![usize::MAX; k];
        let mut y = vec![0.0; k];
        let mut next_id = 0usize;
        for j in 0..k {
            let mut gamma: f64 = Exp1.sample(rng);
            let mut count = 0usize;
            while 1.0 / gamma > z[j] {
                count += 1;
                if count > self.budget {
                    return Err(Error::SamplerBudget { site: j, budget: self.budget });
                }
                let zeta = 1.0 / gamma;
                self.spectral(j, rng, &mut y);
                if (0..j).all(|i| zeta * y[i] < z[i]) {
                    for i in 0..k {
                        let v = zeta * y[i];
                        if v > z[i] {
                            z[i] = v;
                            owner[i] = next_id;
                        }
                    }
                    next_id += 1;
                }
                let e: f64 = Exp1.sample(rng);
                gamma += e;
            }
            debug_assert!(1.0 / gamma <= z[j]);
        }
        debug_assert!(owner.iter().all(|&o| o != usize::MAX));
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut ids: Vec<usize> = Vec::new();
        for (i, &o) in owner.iter().enumerate() {
            match ids.iter().position(|&x| x == o) {
                Some(b) => blocks[b].push(i),
                None => {
                    ids.push(o);
                    blocks.push(vec![i]);
                }
            }
        }
        Ok((z, Partition::new(k, blocks)?))
    }
}

fn gauss<R: Rng + ?Sized>(chol: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let n = DVector::from_fn(chol.nrows(), |_, _| StandardNormal.sample(rng));
    chol * n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DirichletParams, ExtremalTParams, HuslerReissParams};
    use crate::numerics::mvn::CovMatrix;
    use crate::numerics::stats::ks_test;
    use crate::rng::stream;

    fn specs() -> Vec<ModelSpec> {
        let corr = CovMatrix::from_rows(&[vec![1.0, 0.6, 0.3], vec![0.6, 1.0, 0.5], vec![0.3, 0.5, 1.0]]).unwrap();
        vec![
            ModelSpec::dirichlet(vec![0.5, 1.0, 3.0]).unwrap(),
            ModelSpec::husler_reiss(HuslerReissParams::brown_resnick(vec![vec![0.0], vec![1.0], vec![2.5]], 2.0, 1.0).unwrap()).unwrap(),
            ModelSpec::extremal_t(ExtremalTParams::new(corr, 2.5).unwrap()).unwrap(),
            ModelSpec::extremal_t(ExtremalTParams::schlather(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]], 1.5, 1.0).unwrap())
                .unwrap(),
        ]
    }

    fn mc_sigma(p: f64, n: usize) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn bivariate_husler_reiss_orthant() {
        let spec = ModelSpec::husler_reiss(HuslerReissParams::bivariate(1.0).unwrap()).unwrap();
        let s = ExtremalSampler::new(&spec).unwrap();
        let mut rng = stream(11, "ef", &[]);
        let n = 50_000;
        let hits = (0..n).filter(|_| s.sample(&mut rng).unwrap().0.iter().all(|&v| v <= 1.0)).count();
        let p = (-2.0 * crate::numerics::norm_cdf(1.0)).exp();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * mc_sigma(p, n));
    }

    #[test]
    fn dirichlet_pair_coefficient() {
        let spec = ModelSpec::dirichlet(vec![1.0, 1.0]).unwrap();
        let s = ExtremalSampler::new(&spec).unwrap();
        let mut rng = stream(12, "ef", &[]);
        let n = 50_000;
        let tau = DirichletParams::extremal_coefficient(1.0, 1.0).unwrap();
        let hits = (0..n).filter(|_| s.sample(&mut rng).unwrap().0.iter().all(|&v| v <= 1.0)).count();
        let p = (-tau).exp();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * mc_sigma(p, n));
    }

    #[test]
    fn margins_and_pair_maxima_pass_goodness_of_fit() {
        // 1/max(Z_i, Z_j) ~ Exp(tau_ij), and single margins ~ Exp(1)
        for (c, spec) in specs().into_iter().enumerate() {
            let s = ExtremalSampler::new(&spec).unwrap();
            let mut rng = stream(13, "ef", &[c as u64]);
            let draws: Vec<Vec<f64>> = (0..10_000).map(|_| s.sample(&mut rng).unwrap().0).collect();
            let p = (-1f64).exp();
            let below = draws.iter().filter(|z| z[0] <= 1.0).count();
            assert!((below as f64 / 1e4 - p).abs() < 3.0 * mc_sigma(p, 10_000), "{}", spec.dependence.name());
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let tau = spec.pairwise_extremal_coefficient(i, j).unwrap();
                let x: Vec<f64> = draws.iter().map(|z| 1.0 / z[i].max(z[j])).collect();
                let (_, pval) = ks_test(&x, |t| -(-tau * t).exp_m1());
                assert!(pval > 1e-3, "{} ({i},{j}) p = {pval}", spec.dependence.name());
            }
        }
    }

    #[test]
    fn partitions_are_valid_and_vary() {
        let spec = &specs()[1];
        let s = ExtremalSampler::new(spec).unwrap();
        let mut rng = stream(14, "ef", &[]);
        let mut sizes = [0usize; 4];
        for _ in 0..2000 {
            let (z, p) = s.sample(&mut rng).unwrap();
            assert_eq!(p.k(), 3);
            assert!(z.iter().all(|&v| v > 0.0 && v.is_finite()));
            sizes[p.len()] += 1;
        }
        assert!(sizes[1] > 0 && sizes[2] > 0 && sizes[3] > 0);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let spec = ModelSpec::dirichlet(vec![0.05, 0.05, 0.05]).unwrap();
        let s = ExtremalSampler::new(&spec).unwrap().with_budget(1);
        let mut rng = stream(15, "ef", &[]);
        let errs = (0..200).filter(|_| matches!(s.sample(&mut rng), Err(Error::SamplerBudget { .. }))).count();
        assert!(errs > 0);
        assert!(ExtremalSampler::new(&ModelSpec::logistic(3, 0.5).unwrap()).is_err());
    }

    #[test]
    fn deterministic_given_stream() {
        let s = ExtremalSampler::new(&specs()[2]).unwrap();
        let a: Vec<_> = (0..10).map({
            let mut r = stream(3, "d", &[]);
            move |_| s.sample(&mut r).unwrap().0
        }).collect();
        let s = ExtremalSampler::new(&specs()[2]).unwrap();
        let mut r = stream(3, "d", &[]);
        let b: Vec<_> = (0..10).map(|_| s.sample(&mut r).unwrap().0).collect();
        assert_eq!(a, b);
    }
}
