//! Parametric model templates: which quantities are free and how a
//! parameter vector maps to a [`ModelSpec`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::prior::{Dist, ParamInfo, Prior, Transform};
use crate::error::{Error, Result};
use crate::models::{Dependence, ExtremalTParams, GevMargin, HuslerReissParams, ModelSpec, SpatialModel};
use crate::numerics::mvn::QmcConfig;

/// Free dependence parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DependenceTemplate {
    /// `theta`.
    Logistic,
    /// `alpha_1 .. alpha_k`.
    Dirichlet,
    /// Brown–Resnick on `sites`: `range`, and `smoothness` unless fixed.
    HuslerReiss {
        sites: Vec<Vec<f64>>,
        #[serde(default)]
        smoothness: Option<f64>,
    },
    /// Extremal-t with spatial correlation on `sites`: `range`, plus
    /// `smoothness` and `nu` unless fixed.
    ExtremalT {
        sites: Vec<Vec<f64>>,
        #[serde(default)]
        smoothness: Option<f64>,
        #[serde(default)]
        nu: Option<f64>,
    },
    /// No free dependence parameters.
    Fixed { dependence: Dependence },
}

/// Free marginal parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginTemplate {
    /// Data already on unit Fréchet scale.
    UnitFrechet,
    Fixed { margins: Vec<GevMargin> },
    /// One GEV margin `(mu, sigma, xi)` shared by all components.
    Common,
    /// Shared `mu`, `sigma` and shapes `xi_i = alpha + i * beta`, `i = 1..k`.
    Trend,
}

/// A dependence and a margin template on `k` components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTemplate {
    pub k: usize,
    pub dependence: DependenceTemplate,
    #[serde(default = "unit_frechet")]
    pub margins: MarginTemplate,
    #[serde(default)]
    pub qmc: QmcConfig,
    /// Prior overrides by parameter name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub priors: BTreeMap<String, Prior>,
}

fn unit_frechet() -> MarginTemplate {
    MarginTemplate::UnitFrechet
}

fn param(name: &str, transform: Transform, prior: Prior, init: f64) -> ParamInfo {
    ParamInfo { name: name.to_string(), transform, prior, init }
}

impl ModelTemplate {
    pub fn new(k: usize, dependence: DependenceTemplate, margins: MarginTemplate) -> Result<Self> {
        let t = Self { k, dependence, margins, qmc: QmcConfig::default(), priors: BTreeMap::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn logistic(k: usize) -> Self {
        Self::new(k, DependenceTemplate::Logistic, MarginTemplate::UnitFrechet).expect("valid")
    }

    pub fn with_margins(mut self, margins: MarginTemplate) -> Result<Self> {
        self.margins = margins;
        self.validate()?;
        Ok(self)
    }

    pub fn with_prior(mut self, name: &str, prior: Prior) -> Result<Self> {
        self.priors.insert(name.to_string(), prior);
        self.validate()?;
        Ok(self)
    }

    pub fn with_qmc(mut self, qmc: QmcConfig) -> Self {
        self.qmc = qmc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config("models need k >= 2".into()));
        }
        let sites_ok = |s: &Vec<Vec<f64>>| s.len() == self.k;
        match &self.dependence {
            DependenceTemplate::HuslerReiss { sites, .. } | DependenceTemplate::ExtremalT { sites, .. } if !sites_ok(sites) => {
                return Err(Error::Config(format!("{} sites for k = {}", sites.len(), self.k)));
            }
            DependenceTemplate::Fixed { dependence } => {
                if dependence.fixed_k().is_some_and(|k| k != self.k) {
                    return Err(Error::Config("fixed dependence has the wrong dimension".into()));
                }
            }
            _ => {}
        }
        if let MarginTemplate::Fixed { margins } = &self.margins {
            if margins.len() != self.k {
                return Err(Error::Config(format!("{} fixed margins for k = {}", margins.len(), self.k)));
            }
        }
        let names: Vec<String> = self.params().into_iter().map(|p| p.name).collect();
        for (name, prior) in &self.priors {
            if !names.contains(name) {
                return Err(Error::Config(format!("prior given for unknown parameter {name:?}")));
            }
            prior.validate()?;
        }
        self.qmc.validate()
    }

    /// The free parameters in vector order: dependence first, then margins.
    pub fn params(&self) -> Vec<ParamInfo> {
        let wide = Prior::on_log_scale(Dist::Normal { mean: 0.0, sd: 10.0 });
        let mut out = Vec::new();
        match &self.dependence {
            DependenceTemplate::Logistic => {
                out.push(param("theta", Transform::Logit { lo: 0.0, hi: 1.0 }, Prior::uniform(0.0, 1.0), 0.5))
            }
            DependenceTemplate::Dirichlet => {
                for i in 1..=self.k {
                    out.push(param(&format!("alpha_{i}"), Transform::Reflect { at: 0.0 }, Prior::uniform(0.0, 50.0), 1.0));
                }
            }
            DependenceTemplate::HuslerReiss { smoothness, .. } => {
                out.push(param("range", Transform::Log, wide, 1.0));
                if smoothness.is_none() {
                    out.push(param("smoothness", Transform::Logit { lo: 0.0, hi: 2.0 }, Prior::uniform(0.0, 2.0), 1.0));
                }
            }
            DependenceTemplate::ExtremalT { smoothness, nu, .. } => {
                out.push(param("range", Transform::Log, wide, 1.0));
                if smoothness.is_none() {
                    out.push(param("smoothness", Transform::Logit { lo: 0.0, hi: 2.0 }, Prior::uniform(0.0, 2.0), 1.0));
                }
                if nu.is_none() {
                    out.push(param("nu", Transform::Log, Prior::uniform(0.0, 50.0), 2.0));
                }
            }
            DependenceTemplate::Fixed { .. } => {}
        }
        let flat = Prior::normal(0.0, 100.0);
        let log_flat = Prior::on_log_scale(Dist::Normal { mean: 0.0, sd: 100.0 });
        match self.margins {
            MarginTemplate::UnitFrechet | MarginTemplate::Fixed { .. } => {}
            MarginTemplate::Common => {
                out.push(param("mu", Transform::Identity, flat, 1.0));
                out.push(param("sigma", Transform::Log, log_flat, 1.0));
                out.push(param("xi", Transform::Identity, flat, 0.1));
            }
            MarginTemplate::Trend => {
                out.push(param("mu", Transform::Identity, flat, 1.0));
                out.push(param("sigma", Transform::Log, log_flat, 1.0));
                out.push(param("alpha", Transform::Identity, Prior::normal(0.0, 1.0), 0.1));
                out.push(param("beta", Transform::Identity, Prior::new(Dist::SpikeAndSlab { p0: 0.5, sd: 0.5 }), 0.0));
            }
        }
        for p in &mut out {
            if let Some(pr) = self.priors.get(&p.name) {
                p.prior = *pr;
            }
        }
        out
    }

    pub fn names(&self) -> Vec<String> {
        self.params().into_iter().map(|p| p.name).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params().iter().position(|p| p.name == name)
    }

    /// Number of dependence parameters (they precede the marginal ones).
    pub fn n_dependence(&self) -> usize {
        match &self.dependence {
            DependenceTemplate::Logistic => 1,
            DependenceTemplate::Dirichlet => self.k,
            DependenceTemplate::HuslerReiss { smoothness, .. } => 1 + smoothness.is_none() as usize,
            DependenceTemplate::ExtremalT { smoothness, nu, .. } => 1 + smoothness.is_none() as usize + nu.is_none() as usize,
            DependenceTemplate::Fixed { .. } => 0,
        }
    }

    pub fn init(&self) -> Vec<f64> {
        self.params().into_iter().map(|p| p.init).collect()
    }

    /// The model at parameter vector `x`.
    pub fn build(&self, x: &[f64]) -> Result<ModelSpec> {
        let np = self.params().len();
        if x.len() != np {
            return Err(Error::InvalidArgument(format!("expected {np} parameters, got {}", x.len())));
        }
        let mut it = x.iter().copied();
        let mut next = || it.next().expect("length checked");
        let k = self.k;
        let spec = match &self.dependence {
            DependenceTemplate::Logistic => ModelSpec::logistic(k, next())?,
            DependenceTemplate::Dirichlet => ModelSpec::dirichlet((0..k).map(|_| next()).collect())?,
            DependenceTemplate::HuslerReiss { sites, smoothness } => {
                let range = next();
                let smooth = smoothness.unwrap_or_else(&mut next);
                ModelSpec::husler_reiss(HuslerReissParams::brown_resnick(sites.clone(), range, smooth)?)?
            }
            DependenceTemplate::ExtremalT { sites, smoothness, nu } => {
                let range = next();
                let smooth = smoothness.unwrap_or_else(&mut next);
                let nu = nu.unwrap_or_else(&mut next);
                ModelSpec::extremal_t(ExtremalTParams::spatial(SpatialModel::new(sites.clone(), range, smooth)?, nu)?)?
            }
            DependenceTemplate::Fixed { dependence } => ModelSpec::new(k, dependence.clone())?,
        };
        let spec = spec.with_qmc(self.qmc);
        match &self.margins {
            MarginTemplate::UnitFrechet => Ok(spec),
            MarginTemplate::Fixed { margins } => spec.with_margins(margins.clone()),
            MarginTemplate::Common => {
                let g = GevMargin::new(next(), next(), next())?;
                spec.with_margins(vec![g; k])
            }
            MarginTemplate::Trend => {
                let (mu, sigma, a, b) = (next(), next(), next(), next());
                let m = (1..=k).map(|i| GevMargin::new(mu, sigma, a + i as f64 * b)).collect::<Result<_>>()?;
                spec.with_margins(m)
            }
        }
    }

    /// Marginal parameters of component `i` at `x`, if margins are free or fixed.
    pub fn margin_at(&self, x: &[f64], i: usize) -> Option<GevMargin> {
        let d = self.n_dependence();
        match &self.margins {
            MarginTemplate::UnitFrechet => None,
            MarginTemplate::Fixed { margins } => Some(margins[i]),
            MarginTemplate::Common => Some(GevMargin { mu: x[d], sigma: x[d + 1], xi: x[d + 2] }),
            MarginTemplate::Trend => Some(GevMargin { mu: x[d], sigma: x[d + 1], xi: x[d + 2] + (i + 1) as f64 * x[d + 3] }),
        }
    }

    /// Log prior density at `x` (`-inf` outside the support).
    pub fn log_prior(&self, x: &[f64]) -> f64 {
        self.params().iter().zip(x).map(|(p, &v)| p.prior.log_density(v)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_and_builds() {
        let t = ModelTemplate::logistic(4).with_margins(MarginTemplate::Common).unwrap();
        assert_eq!(t.names(), ["theta", "mu", "sigma", "xi"]);
        let s = t.build(&[0.3, 1.0, 2.0, 0.1]).unwrap();
        assert_eq!(s.margins.as_ref().unwrap()[3], GevMargin::new(1.0, 2.0, 0.1).unwrap());
        let t = ModelTemplate::logistic(3).with_margins(MarginTemplate::Trend).unwrap();
        assert_eq!(t.names(), ["theta", "mu", "sigma", "alpha", "beta"]);
        let s = t.build(&[0.5, 1.0, 1.0, 1.0, 0.1]).unwrap();
        assert!((s.margins.as_ref().unwrap()[2].xi - 1.3).abs() < 1e-15);
        assert_eq!(t.margin_at(&[0.5, 1.0, 1.0, 1.0, 0.1], 2).unwrap().xi, s.margins.unwrap()[2].xi);
        let sites = vec![vec![0.0], vec![1.0], vec![2.0]];
        let t = ModelTemplate::new(3, DependenceTemplate::HuslerReiss { sites: sites.clone(), smoothness: Some(1.0) }, MarginTemplate::UnitFrechet)
            .unwrap();
        assert_eq!(t.names(), ["range"]);
        assert!(t.build(&[2.0]).is_ok());
        let t = ModelTemplate::new(3, DependenceTemplate::ExtremalT { sites, smoothness: None, nu: None }, MarginTemplate::UnitFrechet).unwrap();
        assert_eq!(t.names(), ["range", "smoothness", "nu"]);
        assert_eq!(t.n_dependence(), 3);
        let t = ModelTemplate::new(3, DependenceTemplate::Dirichlet, MarginTemplate::UnitFrechet).unwrap();
        assert_eq!(t.names(), ["alpha_1", "alpha_2", "alpha_3"]);
    }

    #[test]
    fn priors_and_validation() {
        let t = ModelTemplate::logistic(3).with_prior("theta", Prior::new(Dist::Beta { a: 4.0, b: 4.0 })).unwrap();
        assert!(matches!(t.params()[0].prior.dist, Dist::Beta { .. }));
        assert!(t.log_prior(&[0.5]).is_finite());
        assert_eq!(t.log_prior(&[1.5]), f64::NEG_INFINITY);
        assert!(ModelTemplate::logistic(3).with_prior("nope", Prior::uniform(0.0, 1.0)).is_err());
        assert!(ModelTemplate::new(1, DependenceTemplate::Logistic, MarginTemplate::UnitFrechet).is_err());
        assert!(ModelTemplate::logistic(3).build(&[0.5, 0.1]).is_err());
        let json = r#"{"k":3,"dependence":{"family":"logistic"},"margins":{"kind":"common"}}"#;
        let t: ModelTemplate = serde_json::from_str(json).unwrap();
        assert_eq!(t.params().len(), 4);
    }
}
