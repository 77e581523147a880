//! Extremal-t family; `nu = 1` with a spatial correlation gives the
//! Schlather model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::linalg::{condition, log_det};
use super::spatial::SpatialModel;
use crate::error::{Error, Result};
use crate::numerics::mvn::{mvt_cdf, CovMatrix, QmcConfig};
use crate::numerics::special::{log_gamma, student_t_cdf};
use crate::partition::{full_mask, mask_indices};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtremalTRaw", into = "ExtremalTRaw")]
pub struct ExtremalTParams {
    sigma: CovMatrix,
    pub nu: f64,
    pub nu_fixed: bool,
    spatial: Option<SpatialModel>,
}

#[derive(Serialize, Deserialize)]
struct ExtremalTRaw {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spatial: Option<SpatialModel>,
    nu: f64,
    #[serde(default = "yes")]
    nu_fixed: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<ExtremalTRaw> for ExtremalTParams {
    type Error = Error;
    fn try_from(r: ExtremalTRaw) -> Result<Self> {
        let mut p = match (r.sigma, r.spatial) {
            (Some(s), None) => Self::new(CovMatrix::correlation(to_matrix(&s)?)?, r.nu)?,
            (None, Some(sp)) => Self::spatial(sp, r.nu)?,
            _ => return Err(Error::Config("extremal-t needs exactly one of `sigma` or `spatial`".into())),
        };
        p.nu_fixed = r.nu_fixed;
        Ok(p)
    }
}

impl From<ExtremalTParams> for ExtremalTRaw {
    fn from(p: ExtremalTParams) -> Self {
        let sigma = match p.spatial {
            Some(_) => None,
            None => Some(from_matrix(p.sigma.matrix())),
        };
        ExtremalTRaw { sigma, spatial: p.spatial, nu: p.nu, nu_fixed: p.nu_fixed }
    }
}

pub(crate) fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("matrix must be square and non-empty".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl ExtremalTParams {
    pub fn new(sigma: CovMatrix, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
        }
        if (0..sigma.dim()).any(|i| (sigma.get(i, i) - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidArgument("extremal-t needs a correlation matrix".into()));
        }
        Ok(Self { sigma, nu, nu_fixed: true, spatial: None })
    }

    /// Correlation `rho(h) = exp(-||h||^alpha / s)` on the given sites.
    pub fn spatial(sp: SpatialModel, nu: f64) -> Result<Self> {
        sp.validate()?;
        let k = sp.k();
        let m = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { (-sp.scaled_power(i, j)).exp() });
        let mut p = Self::new(CovMatrix::correlation(m)?, nu)?;
        p.spatial = Some(sp);
        Ok(p)
    }

    /// Schlather model: `nu = 1` with the spatial correlation.
    pub fn schlather(sites: Vec<Vec<f64>>, range: f64, smoothness: f64) -> Result<Self> {
        Self::spatial(SpatialModel::new(sites, range, smoothness)?, 1.0)
    }

    pub fn k(&self) -> usize {
        self.sigma.dim()
    }

    pub fn sigma(&self) -> &CovMatrix {
        &self.sigma
    }

    pub fn spatial_model(&self) -> Option<&SpatialModel> {
        self.spatial.as_ref()
    }

    pub fn marginal(&self, idx: &[usize]) -> Self {
        Self {
            sigma: self.sigma.submatrix(idx),
            nu: self.nu,
            nu_fixed: self.nu_fixed,
            spatial: self.spatial.as_ref().map(|s| s.subset(idx)),
        }
    }

    /// `V(z) = sum_p z_p^{-1} T_{k-1, nu+1}((z_{-p}/z_p)^{1/nu} - Σ_{-p,p}; R_p)`
    /// with `R_p = (Σ_{-p,-p} - Σ_{-p,p} Σ_{p,-p}) / (nu + 1)`.
    pub fn exponent(&self, z: &[f64], qmc: &QmcConfig) -> Result<f64> {
        let k = self.k();
        let s = self.sigma.matrix();
        let inv_nu = 1.0 / self.nu;
        let mut v = 0.0;
        for p in 0..k {
            if z[p] == f64::INFINITY {
                continue;
            }
            let rest: Vec<usize> = (0..k).filter(|&i| i != p).collect();
            let prob = if rest.is_empty() {
                1.0
            } else {
                let upper: Vec<f64> = rest.iter().map(|&i| (z[i] / z[p]).powf(inv_nu) - s[(i, p)]).collect();
                let scale = DMatrix::from_fn(rest.len(), rest.len(), |a, b| {
                    let (i, j) = (rest[a], rest[b]);
                    (s[(i, j)] - s[(i, p)] * s[(p, j)]) / (self.nu + 1.0)
                });
                mvt_cdf(&upper, &CovMatrix::new(scale)?, self.nu + 1.0, qmc)?.prob
            };
            v += prob / z[p];
        }
        Ok(v)
    }

    pub fn log_weight(&self, block: u64, z: &[f64], qmc: &QmcConfig) -> Result<f64> {
        let k = self.k();
        let nu = self.nu;
        let t: Vec<usize> = mask_indices(block).collect();
        let c: Vec<usize> = mask_indices(full_mask(k) & !block).collect();
        let m = t.len() as f64;
        let x_t = DVector::from_iterator(t.len(), t.iter().map(|&i| z[i].powf(1.0 / nu)));
        let cond = condition(self.sigma.matrix(), &t, &c, &x_t)?;
        let q = x_t.dot(&cond.solved);
        let log_cdf = if c.is_empty() {
            0.0
        } else {
            let upper: Vec<f64> = c.iter().zip(cond.mean.iter()).map(|(&i, mu)| z[i].powf(1.0 / nu) - mu).collect();
            let scale = cond.cov * (q / (m + nu));
            mvt_cdf(&upper, &CovMatrix::new(scale)?, m + nu, qmc)?.prob.ln()
        };
        let elem: f64 = t.iter().map(|&i| (1.0 / nu - 1.0) * z[i].ln()).sum();
        Ok(log_cdf + (1.0 - m) * nu.ln() + 0.5 * (1.0 - m) * PI.ln() - 0.5 * log_det(&cond.chol_tt)
            + log_gamma(0.5 * (nu + m))?
            - log_gamma(0.5 * (nu + 1.0))?
            + elem
            - 0.5 * (nu + m) * q.ln())
    }

    /// `2 T_{nu+1}(sqrt((nu+1)(1-rho)/(1+rho)))`.
    pub fn extremal_coefficient(&self, i: usize, j: usize) -> f64 {
        pair_coefficient(self.sigma.get(i, j), self.nu)
    }
}

/// Extremal coefficient of a pair with correlation `rho`.
pub fn pair_coefficient(rho: f64, nu: f64) -> f64 {
    if rho >= 1.0 {
        return 1.0;
    }
    2.0 * student_t_cdf(((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), nu + 1.0)
}
