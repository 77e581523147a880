//! Symmetric logistic family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::{log_gamma, log_sum_exp};
use crate::partition::mask_indices;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub theta: f64,
}

impl LogisticParams {
    pub fn new(theta: f64) -> Result<Self> {
        let p = Self { theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidArgument(format!("logistic theta must lie in (0, 1), got {}", self.theta)));
        }
        Ok(())
    }

    /// `S = sum_i z_i^{-1/theta}`.
    pub fn sum_s(&self, z: &[f64]) -> f64 {
        z.iter().map(|&zi| zi.powf(-1.0 / self.theta)).sum()
    }

    /// `ln S`, stable for small `theta` where `z^{-1/theta}` over/underflows.
    pub fn log_sum_s(&self, z: &[f64]) -> f64 {
        log_sum_exp(z.iter().map(|&zi| -zi.ln() / self.theta))
    }

    pub fn exponent(&self, z: &[f64]) -> f64 {
        (self.theta * self.log_sum_s(z)).exp()
    }

    /// Block-size dependent part of the log weight,
    /// `(1-n) ln theta + ln Γ(n-theta) - ln Γ(1-theta) + (theta-n) ln S`.
    pub fn log_size_term(&self, n: usize, log_s: f64) -> f64 {
        let t = self.theta;
        let n = n as f64;
        (1.0 - n) * t.ln() + ln_gamma(n - t) - ln_gamma(1.0 - t) + (t - n) * log_s
    }

    pub fn log_weight(&self, block: u64, z: &[f64]) -> f64 {
        let log_s = self.log_sum_s(z);
        let elem: f64 = mask_indices(block).map(|i| (-1.0 - 1.0 / self.theta) * z[i].ln()).sum();
        self.log_size_term(block.count_ones() as usize, log_s) + elem
    }

    /// Simplified weight `theta Γ(n-theta)/Γ(1-theta) S^theta`. Products of
    /// these over a partition differ from the full weights by a factor that
    /// does not depend on the partition.
    pub fn log_weight_simplified(&self, n: usize, log_s: f64) -> f64 {
        let t = self.theta;
        t.ln() + ln_gamma(n as f64 - t) - ln_gamma(1.0 - t) + t * log_s
    }

    pub fn extremal_coefficient(&self) -> f64 {
        2f64.powf(self.theta)
    }
}

#[inline]
fn ln_gamma(x: f64) -> f64 {
    log_gamma(x).expect("positive argument")
}
