//! Site coordinates with a power-law distance model, shared by the
//! Brown–Resnick variogram and the Schlather correlation function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sites in `R^d` with scale `range` (`s > 0`) and `smoothness`
/// (`alpha` in `(0, 2]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialModel {
    pub sites: Vec<Vec<f64>>,
    pub range: f64,
    pub smoothness: f64,
}

impl SpatialModel {
    pub fn new(sites: Vec<Vec<f64>>, range: f64, smoothness: f64) -> Result<Self> {
        let m = Self { sites, range, smoothness };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::InvalidArgument(format!("range must be positive, got {}", self.range)));
        }
        if !(self.smoothness > 0.0 && self.smoothness <= 2.0) {
            return Err(Error::InvalidArgument(format!("smoothness must lie in (0, 2], got {}", self.smoothness)));
        }
        let Some(first) = self.sites.first() else {
            return Err(Error::InvalidArgument("no sites given".into()));
        };
        let d = first.len();
        if d == 0 || self.sites.iter().any(|s| s.len() != d || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("sites must share a positive dimension and be finite".into()));
        }
        for i in 0..self.sites.len() {
            for j in 0..i {
                if self.distance(i, j) == 0.0 {
                    return Err(Error::InvalidArgument(format!("sites {} and {} coincide", j + 1, i + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.sites.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.sites[i].iter().zip(&self.sites[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// `||h||^alpha / s` for the pair `(i, j)`.
    pub fn scaled_power(&self, i: usize, j: usize) -> f64 {
        self.distance(i, j).powf(self.smoothness) / self.range
    }

    pub fn with_params(&self, range: f64, smoothness: f64) -> Result<Self> {
        Self::new(self.sites.clone(), range, smoothness)
    }

    /// Sub-model on a subset of sites.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self { sites: idx.iter().map(|&i| self.sites[i].clone()).collect(), ..self.clone() }
    }
}
