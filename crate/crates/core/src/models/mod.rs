//! Max-stable dependence families, GEV margins and the joint likelihood of
//! an observation together with its partition.

mod dirichlet;
mod extremal_t;
mod gev;
mod husler_reiss;
mod linalg;
mod logistic;
mod spatial;


pub use dirichlet::DirichletParams;
pub use extremal_t::{pair_coefficient as extremal_t_pair_coefficient, ExtremalTParams};
pub use gev::{gev_to_frechet, GevMargin, GUMBEL_SWITCH};
pub use husler_reiss::HuslerReissParams;
pub use logistic::LogisticParams;
pub use spatial::SpatialModel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mvn::QmcConfig;
use crate::numerics::special::log_sum_exp;
use crate::partition::{enumerate_all, Partition};

/// One of the four dependence families with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Dependence {
    Logistic(LogisticParams),
    Dirichlet(DirichletParams),
    ExtremalT(ExtremalTParams),
    HuslerReiss(HuslerReissParams),
}

impl Dependence {
    pub fn name(&self) -> &'static str {
        match self {
            Dependence::Logistic(_) => "logistic",
            Dependence::Dirichlet(_) => "dirichlet",
            Dependence::ExtremalT(_) => "extremal-t",
            Dependence::HuslerReiss(_) => "husler-reiss",
        }
    }

    /// Dimension, or `None` for the logistic family which fits any `k`.
    pub fn fixed_k(&self) -> Option<usize> {
        match self {
            Dependence::Logistic(_) => None,
            Dependence::Dirichlet(p) => Some(p.k()),
            Dependence::ExtremalT(p) => Some(p.k()),
            Dependence::HuslerReiss(p) => Some(p.k()),
        }
    }
}

/// A fully specified model: dependence, dimension, optional GEV margins
/// (absent means unit Fréchet) and the QMC settings used for Gaussian and
/// Student distribution functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: usize,
    pub dependence: Dependence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margins: Option<Vec<GevMargin>>,
    #[serde(default)]
    pub qmc: QmcConfig,
}

impl ModelSpec {
    pub fn new(k: usize, dependence: Dependence) -> Result<Self> {
        let s = Self { k, dependence, margins: None, qmc: QmcConfig::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn logistic(k: usize, theta: f64) -> Result<Self> {
        Self::new(k, Dependence::Logistic(LogisticParams::new(theta)?))
    }

    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self> {
        let p = DirichletParams::new(alpha)?;
        Self::new(p.k(), Dependence::Dirichlet(p))
    }

    pub fn extremal_t(p: ExtremalTParams) -> Result<Self> {
        Self::new(p.k(), Dependence::ExtremalT(p))
    }

    pub fn husler_reiss(p: HuslerReissParams) -> Result<Self> {
        Self::new(p.k(), Dependence::HuslerReiss(p))
    }

    pub fn with_margins(mut self, margins: Vec<GevMargin>) -> Result<Self> {
        self.margins = Some(margins);
        self.validate()?;
        Ok(self)
    }

    pub fn with_qmc(mut self, qmc: QmcConfig) -> Self {
        self.qmc = qmc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > crate::partition::MAX_K {
            return Err(Error::InvalidArgument(format!("dimension {} out of range", self.k)));
        }
        if let Some(k) = self.dependence.fixed_k() {
            if k != self.k {
                return Err(Error::InvalidArgument(format!("{} parameters have dimension {k}, model has {}", self.dependence.name(), self.k)));
            }
        }
        match &self.dependence {
            Dependence::Logistic(p) => p.validate()?,
            Dependence::Dirichlet(p) => p.validate()?,
            _ => {}
        }
        if let Some(m) = &self.margins {
            if m.len() != self.k {
                return Err(Error::InvalidArgument(format!("{} margins for dimension {}", m.len(), self.k)));
            }
            m.iter().try_for_each(|g| g.validate())?;
        }
        self.qmc.validate()
    }

    fn check_z(&self, z: &[f64], allow_inf: bool) -> Result<()> {
        if z.len() != self.k {
            return Err(Error::InvalidArgument(format!("expected {} components, got {}", self.k, z.len())));
        }
        if let Some(i) = z.iter().position(|&v| !(v > 0.0) || (!allow_inf && v == f64::INFINITY)) {
            return Err(Error::InvalidArgument(format!("component {} must be positive and finite, got {}", i + 1, z[i])));
        }
        Ok(())
    }

    /// Exponent function on unit Fréchet scale. Components may be `+inf`.
    pub fn exponent(&self, z: &[f64]) -> Result<f64> {
        self.check_z(z, true)?;
        match &self.dependence {
            Dependence::Logistic(p) => Ok(p.exponent(z)),
            Dependence::Dirichlet(p) => p.exponent(z),
            Dependence::ExtremalT(p) => p.exponent(z, &self.qmc),
            Dependence::HuslerReiss(p) => p.exponent(z, &self.qmc),
        }
    }

    /// `ln omega(block, z)` on unit Fréchet scale; `block` is a bitmask.
    pub fn log_weight(&self, block: u64, z: &[f64]) -> Result<f64> {
        self.check_z(z, false)?;
        if block == 0 || block >> self.k != 0 {
            return Err(Error::InvalidArgument(format!("block mask {block:#b} invalid for k = {}", self.k)));
        }
        self.log_weight_unchecked(block, z)
    }

    pub(crate) fn log_weight_unchecked(&self, block: u64, z: &[f64]) -> Result<f64> {
        match &self.dependence {
            Dependence::Logistic(p) => Ok(p.log_weight(block, z)),
            Dependence::Dirichlet(p) => p.log_weight(block, z),
            Dependence::ExtremalT(p) => p.log_weight(block, z, &self.qmc),
            Dependence::HuslerReiss(p) => p.log_weight(block, z, &self.qmc),
        }
    }

    /// `omega(block, z)`.
    pub fn weight(&self, block: u64, z: &[f64]) -> Result<f64> {
        Ok(self.log_weight(block, z)?.exp())
    }

    /// Maps a raw observation to unit Fréchet scale with its log Jacobian.
    pub fn to_frechet(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        match &self.margins {
            Some(m) => gev_to_frechet(z, m),
            None => {
                self.check_z(z, false)?;
                Ok((z.to_vec(), 0.0))
            }
        }
    }

    /// `ln L(z, tau) = -V(U(z)) + sum_j ln omega(tau_j, U(z)) + log Jacobian`.
    pub fn joint_log_likelihood(&self, z: &[f64], tau: &Partition) -> Result<f64> {
        if tau.k() != self.k || tau.ground() != crate::partition::full_mask(self.k) {
            return Err(Error::InvalidArgument(format!("partition {tau} does not cover 1..={}", self.k)));
        }
        let (u, log_jac) = self.to_frechet(z)?;
        let mut ll = -self.exponent(&u)? + log_jac;
        for &b in tau.masks() {
            ll += self.log_weight_unchecked(b, &u)?;
        }
        Ok(ll)
    }

    /// Log density by summing the joint likelihood over all partitions
    /// (`k <= 12`).
    pub fn log_density_partition_sum(&self, z: &[f64]) -> Result<f64> {
        let all = enumerate_all(self.k)?;
        let (u, log_jac) = self.to_frechet(z)?;
        let v = self.exponent(&u)?;
        let mut cache = std::collections::HashMap::new();
        let mut terms = Vec::with_capacity(all.len());
        for tau in &all {
            let mut s = 0.0;
            for &b in tau.masks() {
                let w = match cache.get(&b) {
                    Some(&w) => w,
                    None => {
                        let w = self.log_weight_unchecked(b, &u)?;
                        cache.insert(b, w);
                        w
                    }
                };
                s += w;
            }
            terms.push(s);
        }
        Ok(log_sum_exp(terms) - v + log_jac)
    }

    /// Model for the components `idx` (0-based, in the given order).
    pub fn marginal(&self, idx: &[usize]) -> Result<ModelSpec> {
        if idx.is_empty() || idx.iter().any(|&i| i >= self.k) {
            return Err(Error::InvalidArgument(format!("marginal indices {idx:?} invalid for k = {}", self.k)));
        }
        let dependence = match &self.dependence {
            Dependence::Logistic(p) => Dependence::Logistic(*p),
            Dependence::Dirichlet(p) => Dependence::Dirichlet(DirichletParams { alpha: idx.iter().map(|&i| p.alpha[i]).collect() }),
            Dependence::ExtremalT(p) => Dependence::ExtremalT(p.marginal(idx)),
            Dependence::HuslerReiss(p) => Dependence::HuslerReiss(p.marginal(idx)),
        };
        Ok(ModelSpec {
            k: idx.len(),
            dependence,
            margins: self.margins.as_ref().map(|m| idx.iter().map(|&i| m[i]).collect()),
            qmc: self.qmc,
        })
    }

    /// Extremal coefficient of the pair `(i1, i2)`, a value in `[1, 2]`.
    pub fn pairwise_extremal_coefficient(&self, i1: usize, i2: usize) -> Result<f64> {
        if i1 >= self.k || i2 >= self.k || i1 == i2 {
            return Err(Error::InvalidArgument(format!("invalid pair ({}, {})", i1 + 1, i2 + 1)));
        }
        match &self.dependence {
            Dependence::Logistic(p) => Ok(p.extremal_coefficient()),
            Dependence::Dirichlet(p) => DirichletParams::extremal_coefficient(p.alpha[i1], p.alpha[i2]),
            Dependence::ExtremalT(p) => Ok(p.extremal_coefficient(i1, i2)),
            Dependence::HuslerReiss(p) => Ok(p.extremal_coefficient(i1, i2)),
        }
    }
}
