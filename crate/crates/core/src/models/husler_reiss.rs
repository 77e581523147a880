//! Hüsler–Reiss family; a power variogram on sites gives the Brown–Resnick
//! model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::extremal_t::{from_matrix, to_matrix};
use super::linalg::{condition, log_det};
use super::spatial::SpatialModel;
use crate::error::{Error, Result};
use crate::numerics::mvn::{mvn_cdf, CovMatrix, QmcConfig};
use crate::numerics::special::norm_cdf;
use crate::partition::{full_mask, mask_indices};

/// Parameterized by `Λ = (λ²_ij)`, a quarter of the variogram matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HuslerReissRaw", into = "HuslerReissRaw")]
pub struct HuslerReissParams {
    lambda_sq: DMatrix<f64>,
    spatial: Option<SpatialModel>,
}

#[derive(Serialize, Deserialize)]
struct HuslerReissRaw {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_sq: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spatial: Option<SpatialModel>,
}

impl TryFrom<HuslerReissRaw> for HuslerReissParams {
    type Error = Error;
    fn try_from(r: HuslerReissRaw) -> Result<Self> {
        match (r.lambda_sq, r.spatial) {
            (Some(l), None) => Self::new(to_matrix(&l)?),
            (None, Some(sp)) => Self::spatial(sp),
            _ => Err(Error::Config("Hüsler–Reiss needs exactly one of `lambda_sq` or `spatial`".into())),
        }
    }
}

impl From<HuslerReissParams> for HuslerReissRaw {
    fn from(p: HuslerReissParams) -> Self {
        match p.spatial {
            Some(sp) => HuslerReissRaw { lambda_sq: None, spatial: Some(sp) },
            None => HuslerReissRaw { lambda_sq: Some(from_matrix(&p.lambda_sq)), spatial: None },
        }
    }
}

impl HuslerReissParams {
    /// Validates symmetry, zero diagonal, non-negativity and strict
    /// conditional negative definiteness (via `Σ^(1)` being positive
    /// definite).
    pub fn new(lambda_sq: DMatrix<f64>) -> Result<Self> {
        let k = lambda_sq.nrows();
        if k == 0 || lambda_sq.ncols() != k {
            return Err(Error::InvalidArgument("lambda_sq must be square".into()));
        }
        for i in 0..k {
            if lambda_sq[(i, i)] != 0.0 {
                return Err(Error::InvalidArgument("lambda_sq needs a zero diagonal".into()));
            }
            for j in 0..i {
                let v = lambda_sq[(i, j)];
                if !(v >= 0.0 && v.is_finite()) || (v - lambda_sq[(j, i)]).abs() > 1e-12 * v.max(1.0) {
                    return Err(Error::InvalidArgument(format!("lambda_sq invalid at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        let p = Self { lambda_sq, spatial: None };
        if k > 1 {
            let rest: Vec<usize> = (1..k).collect();
            p.sigma_p(0, &rest)
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("lambda_sq is not strictly conditionally negative definite".into()))?;
        }
        Ok(p)
    }

    /// Brown–Resnick: variogram `||h||^alpha / s`, so `λ² = ||h||^alpha / (4 s)`.
    pub fn spatial(sp: SpatialModel) -> Result<Self> {
        sp.validate()?;
        let k = sp.k();
        let l = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { 0.25 * sp.scaled_power(i, j) });
        let mut p = Self::new(l)?;
        p.spatial = Some(sp);
        Ok(p)
    }

    pub fn brown_resnick(sites: Vec<Vec<f64>>, range: f64, smoothness: f64) -> Result<Self> {
        Self::spatial(SpatialModel::new(sites, range, smoothness)?)
    }

    /// Bivariate model with the given `λ²`.
    pub fn bivariate(lambda_sq: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[0.0, lambda_sq, lambda_sq, 0.0]))
    }

    pub fn k(&self) -> usize {
        self.lambda_sq.nrows()
    }

    pub fn lambda_sq(&self) -> &DMatrix<f64> {
        &self.lambda_sq
    }

    pub fn spatial_model(&self) -> Option<&SpatialModel> {
        self.spatial.as_ref()
    }

    pub fn marginal(&self, idx: &[usize]) -> Self {
        Self {
            lambda_sq: DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.lambda_sq[(idx[a], idx[b])]),
            spatial: self.spatial.as_ref().map(|s| s.subset(idx)),
        }
    }

    /// `Σ^(p)` restricted to `idx` (none equal to `p`):
    /// entries `2(λ²_pi + λ²_pj - λ²_ij)`.
    pub fn sigma_p(&self, p: usize, idx: &[usize]) -> DMatrix<f64> {
        let l = &self.lambda_sq;
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
            let (i, j) = (idx[a], idx[b]);
            2.0 * (l[(p, i)] + l[(p, j)] - l[(i, j)])
        })
    }

    /// `z*_i = ln(z_i / z_p) + 2 λ²_ip`.
    fn z_star(&self, p: usize, i: usize, z: &[f64]) -> f64 {
        (z[i] / z[p]).ln() + 2.0 * self.lambda_sq[(i, p)]
    }

    /// `V(z) = sum_p z_p^{-1} Φ_{k-1}(z*_{-p}; Σ^(p))`.
    pub fn exponent(&self, z: &[f64], qmc: &QmcConfig) -> Result<f64> {
        let k = self.k();
        let mut v = 0.0;
        for p in 0..k {
            if z[p] == f64::INFINITY {
                continue;
            }
            let rest: Vec<usize> = (0..k).filter(|&i| i != p).collect();
            let prob = if rest.is_empty() {
                1.0
            } else {
                let upper: Vec<f64> = rest.iter().map(|&i| self.z_star(p, i, z)).collect();
                mvn_cdf(&upper, &CovMatrix::new(self.sigma_p(p, &rest))?, qmc)?.prob
            };
            v += prob / z[p];
        }
        Ok(v)
    }

    /// `ln omega(block, z)` with anchor `p = min(block)`.
    pub fn log_weight(&self, block: u64, z: &[f64], qmc: &QmcConfig) -> Result<f64> {
        let p = block.trailing_zeros() as usize;
        self.log_weight_anchored(block, p, z, qmc)
    }

    /// `ln omega(block, z)` with an explicit anchor `p` in the block.
    pub fn log_weight_anchored(&self, block: u64, p: usize, z: &[f64], qmc: &QmcConfig) -> Result<f64> {
        if block & (1u64 << p) == 0 {
            return Err(Error::InvalidArgument(format!("anchor {} not in block", p + 1)));
        }
        let k = self.k();
        let t: Vec<usize> = mask_indices(block & !(1u64 << p)).collect();
        let c: Vec<usize> = mask_indices(full_mask(k) & !block).collect();
        let mut out = -2.0 * z[p].ln() - t.iter().map(|&i| z[i].ln()).sum::<f64>();
        let zs_c: Vec<f64> = c.iter().map(|&i| self.z_star(p, i, z)).collect();
        let (upper, cov) = if t.is_empty() {
            (zs_c, self.sigma_p(p, &c))
        } else {
            let mut idx = t.clone();
            idx.extend_from_slice(&c);
            let s = self.sigma_p(p, &idx);
            let tl: Vec<usize> = (0..t.len()).collect();
            let cl: Vec<usize> = (t.len()..idx.len()).collect();
            let zs_t = DVector::from_iterator(t.len(), t.iter().map(|&i| self.z_star(p, i, z)));
            let cond = condition(&s, &tl, &cl, &zs_t)?;
            out += -0.5 * t.len() as f64 * (2.0 * PI).ln() - 0.5 * log_det(&cond.chol_tt) - 0.5 * zs_t.dot(&cond.solved);
            let upper = zs_c.iter().zip(cond.mean.iter()).map(|(a, m)| a - m).collect();
            (upper, cond.cov)
        };
        if !c.is_empty() {
            out += mvn_cdf(&upper, &CovMatrix::new(cov)?, qmc)?.prob.ln();
        }
        Ok(out)
    }

    /// `2 Φ(λ_ij)`.
    pub fn extremal_coefficient(&self, i: usize, j: usize) -> f64 {
        2.0 * norm_cdf(self.lambda_sq[(i, j)].sqrt())
    }
}
