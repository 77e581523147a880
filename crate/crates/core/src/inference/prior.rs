//! Priors and proposal transforms for individual parameters.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::log_gamma;

/// A univariate prior. `SpikeAndSlab` puts mass `p0` on zero and spreads the
/// rest as `N(0, sd^2)`; its log "density" at zero is `ln p0` (an atom).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Beta { a: f64, b: f64 },
    SpikeAndSlab { p0: f64, sd: f64 },
}

/// A prior, optionally placed on `ln x` rather than `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    #[serde(flatten)]
    pub dist: Dist,
    #[serde(default)]
    pub log_scale: bool,
}

fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let u = (x - mean) / sd;
    -0.5 * u * u - sd.ln() - 0.5 * (2.0 * PI).ln()
}

impl Prior {
    pub fn new(dist: Dist) -> Self {
        Self { dist, log_scale: false }
    }

    pub fn on_log_scale(dist: Dist) -> Self {
        Self { dist, log_scale: true }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::new(Dist::Uniform { lo, hi })
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        Self::new(Dist::Normal { mean, sd })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.dist {
            Dist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Dist::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Dist::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Dist::SpikeAndSlab { p0, sd } => p0 > 0.0 && p0 < 1.0 && sd > 0.0 && sd.is_finite() && !self.log_scale,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid prior {self:?}")))
        }
    }

    pub fn has_atom(&self) -> bool {
        matches!(self.dist, Dist::SpikeAndSlab { .. })
    }

    /// The continuous part of a spike-and-slab prior; other priors unchanged.
    pub fn slab(&self) -> Self {
        match self.dist {
            Dist::SpikeAndSlab { sd, .. } => Self::normal(0.0, sd),
            _ => *self,
        }
    }

    /// Log density (log mass at the atom), `-inf` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let (t, jac) = if self.log_scale {
            if x <= 0.0 {
                return f64::NEG_INFINITY;
            }
            (x.ln(), -x.ln())
        } else {
            (x, 0.0)
        };
        let d = match self.dist {
            Dist::Uniform { lo, hi } => {
                if t > lo && t < hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist::Normal { mean, sd } => normal_log_pdf(t, mean, sd),
            Dist::Beta { a, b } => {
                if t > 0.0 && t < 1.0 {
                    let lb = log_gamma(a).unwrap_or(f64::NAN) + log_gamma(b).unwrap_or(f64::NAN)
                        - log_gamma(a + b).unwrap_or(f64::NAN);
                    (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - lb
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist::SpikeAndSlab { p0, sd } => {
                if t == 0.0 {
                    p0.ln()
                } else {
                    (1.0 - p0).ln() + normal_log_pdf(t, 0.0, sd)
                }
            }
        };
        d + jac
    }

    /// Lower and upper quantile-like bounds used to spread optimizer starts.
    pub fn range(&self) -> (f64, f64) {
        let (lo, hi) = match self.dist {
            Dist::Uniform { lo, hi } => (lo, hi),
            Dist::Normal { mean, sd } => (mean - 2.0 * sd, mean + 2.0 * sd),
            Dist::Beta { .. } => (0.0, 1.0),
            Dist::SpikeAndSlab { sd, .. } => (-2.0 * sd, 2.0 * sd),
        };
        if self.log_scale {
            (lo.exp(), hi.exp())
        } else {
            (lo, hi)
        }
    }
}

/// Scale on which random-walk proposals are Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    Identity,
    /// `ln x`, for positive parameters.
    Log,
    /// `logit((x - lo) / (hi - lo))`.
    Logit { lo: f64, hi: f64 },
    /// Identity steps reflected at `at`, for parameters bounded below.
    Reflect { at: f64 },
}

impl Transform {
    /// Random-walk proposal with step `step` on the transformed scale.
    /// Returns `x*` and `ln q(x* -> x) - ln q(x -> x*)`.
    pub fn propose<R: Rng + ?Sized>(&self, x: f64, step: f64, rng: &mut R) -> (f64, f64) {
        let n: f64 = StandardNormal.sample(rng);
        let d = step * n;
        match *self {
            Transform::Identity => (x + d, 0.0),
            Transform::Reflect { at } => (at + (x + d - at).abs(), 0.0),
            Transform::Log => {
                let y = x * d.exp();
                (y, d)
            }
            Transform::Logit { lo, hi } => {
                let y = self.from_unconstrained(self.to_unconstrained(x) + d);
                // q ratio = |dy/dx|(x) / |dy/dx|(x*), dy/dx = (hi - lo) / ((x - lo)(hi - x))
                let lr = ((y - lo) * (hi - y)).ln() - ((x - lo) * (hi - x)).ln();
                (y, lr)
            }
        }
    }

    /// Map to the real line (used by optimizers).
    pub fn to_unconstrained(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Reflect { at } => (x - at).ln(),
            Transform::Logit { lo, hi } => {
                let u = (x - lo) / (hi - lo);
                u.ln() - (-u).ln_1p()
            }
        }
    }

    pub fn from_unconstrained(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Reflect { at } => at + y.exp(),
            Transform::Logit { lo, hi } => {
                let u = if y >= 0.0 { 1.0 / (1.0 + (-y).exp()) } else { y.exp() / (1.0 + y.exp()) };
                lo + (hi - lo) * u
            }
        }
    }
}

/// A named model parameter with its prior and proposal scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub transform: Transform,
    pub prior: Prior,
    pub init: f64,
}
