//! Dirichlet family, built from independent scaled Gamma spectral
//! coordinates `Y(alpha_i) / alpha_i`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate, integrate_semi_infinite, QuadConfig};
use crate::numerics::special::log_gamma;
use crate::partition::{full_mask, mask_indices};

const QUAD: QuadConfig = QuadConfig { rel_tol: 1e-10, abs_tol: 1e-300, max_subdivisions: 4000 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    pub alpha: Vec<f64>,
}

/// `ln F_alpha(x)`, accurate in both tails.
#[inline]
fn log_gamma_cdf(x: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else if x == f64::INFINITY {
        0.0
    } else if x < alpha {
        gamma_lr(alpha, x).ln()
    } else {
        (-gamma_ur(alpha, x)).ln_1p()
    }
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let p = Self { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidArgument(format!("Dirichlet alphas must be positive, got {:?}", self.alpha)));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    /// `V(z) = ∫_0^∞ [1 - prod_i F_{alpha_i}(alpha_i z_i s)] ds`.
    pub fn exponent(&self, z: &[f64]) -> Result<f64> {
        let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
        if zmin == f64::INFINITY {
            return Ok(0.0);
        }
        let c = 1.0 / zmin;
        let r = integrate_semi_infinite(
            |r| {
                let s = c * r;
                let log_prod: f64 = self.alpha.iter().zip(z).map(|(&a, &zi)| log_gamma_cdf(a * zi * s, a)).sum();
                -log_prod.exp_m1()
            },
            &QUAD,
        )?;
        Ok(c * r.value)
    }

    /// `ln omega(block, z)` for the block mask.
    pub fn log_weight(&self, block: u64, z: &[f64]) -> Result<f64> {
        let k = self.k();
        let mut a_sum = 0.0;
        let mut lin = 0.0;
        let mut log_front = 0.0;
        for i in mask_indices(block) {
            let a = self.alpha[i];
            a_sum += a;
            lin += a * z[i];
            log_front += a * a.ln() + (a - 1.0) * z[i].ln() - log_gamma(a)?;
        }
        let shape = a_sum + 1.0;
        let lg_shape = log_gamma(shape)?;
        let comp: Vec<(f64, f64)> = mask_indices(full_mask(k) & !block).map(|c| (self.alpha[c], self.alpha[c] * z[c] / lin)).collect();
        // E[prod_c F(alpha_c z_c X / lin)] with X ~ Gamma(shape)
        let log_e = if comp.is_empty() {
            0.0
        } else {
            let r = integrate_semi_infinite(
                |r| {
                    let x = shape * r;
                    if x == 0.0 {
                        return 0.0;
                    }
                    let mut lp = (shape - 1.0) * x.ln() - x - lg_shape;
                    for &(a, scale) in &comp {
                        lp += log_gamma_cdf(scale * x, a);
                    }
                    shape * lp.exp()
                },
                &QUAD,
            )?;
            r.value.ln()
        };
        Ok(log_front - shape * lin.ln() + lg_shape + log_e)
    }

    /// `E[Y(a1)/a1 ∨ Y(a2)/a2]` by nested quadrature, the inner integral
    /// split at the kink.
    pub fn extremal_coefficient(a1: f64, a2: f64) -> Result<f64> {
        let l1 = log_gamma(a1)?;
        let l2 = log_gamma(a2)?;
        let pdf = |y: f64, a: f64, lg: f64| if y <= 0.0 { 0.0 } else { ((a - 1.0) * y.ln() - y - lg).exp() };
        let inner_cfg = QuadConfig { rel_tol: 1e-11, ..QUAD };
        let mut failure = None;
        let outer = integrate_semi_infinite(
            |y1| {
                if y1 == 0.0 {
                    return 0.0;
                }
                let m = y1 / a1;
                let kink = a2 * m;
                let below = integrate(|y2| pdf(y2, a2, l2), 0.0, kink, &inner_cfg);
                let above = integrate_semi_infinite(|r| (kink + r) / a2 * pdf(kink + r, a2, l2), &inner_cfg);
                match (below, above) {
                    (Ok(b), Ok(a)) => pdf(y1, a1, l1) * (m * b.value + a.value),
                    (Err(e), _) | (_, Err(e)) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &QuadConfig { rel_tol: 1e-10, ..QUAD },
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(outer.value)
    }
}
