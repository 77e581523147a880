//! Positive stable mixtures: the exact logistic sampler and the outer-power
//! Clayton copula.

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln S` for a positive stable variable with Laplace transform
/// `exp(-t^alpha)`, `alpha` in `(0, 1]` (Kanter's representation).
pub fn log_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let u = PI * (1.0 - rng.random::<f64>());
    let e: f64 = Exp1.sample(rng);
    (alpha * u).sin().ln() - (u.sin().ln()) / alpha + (1.0 - alpha) / alpha * (((1.0 - alpha) * u).sin().ln() - e.ln())
}

/// One draw from the logistic max-stable law with unit Fréchet margins,
/// `P(Z <= z) = exp(-(sum z_i^{-1/theta})^theta)`.
///
/// `Z_i = S^theta E_i^{-theta}` with `S` positive stable of index `theta`.
pub fn sample_logistic<R: Rng + ?Sized>(theta: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("logistic theta must be in (0, 1], got {theta}")));
    }
    let ls = log_positive_stable(theta, rng);
    Ok((0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            (theta * (ls - e.ln())).exp()
        })
        .collect())
}

/// Outer-power Clayton copula with generator `psi(t) = (1 + t^{1/beta})^{-1/c}`.
///
/// Its extreme-value attractor is the logistic law with `theta = 1/beta`;
/// `c` only affects the speed of convergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterPowerClayton {
    pub c: f64,
    pub beta: f64,
}

impl OuterPowerClayton {
    pub fn new(c: f64, beta: f64) -> Result<Self> {
        let s = Self { c, beta };
        s.validate()?;
        Ok(s)
    }

    /// The copula attracted to the logistic law with parameter `theta`.
    pub fn for_logistic(theta: f64, c: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidArgument(format!("target theta must be in (0, 1], got {theta}")));
        }
        Self::new(c, 1.0 / theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("Clayton c must be positive, got {}", self.c)));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("outer power must be >= 1, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn attractor_theta(&self) -> f64 {
        1.0 / self.beta
    }

    /// One vector on unit Fréchet scale (`-1 / ln U` for copula draws `U`).
    ///
    /// Frailty `M = S * G^beta`, `G ~ Gamma(1/c)`, `S` stable of index
    /// `1/beta`; then `U_i = psi(E_i / M)`.
    pub fn sample_frechet<R: Rng + ?Sized>(&self, k: usize, rng: &mut R, out: &mut Vec<f64>) {
        let g: f64 = Gamma::new(1.0 / self.c, 1.0).expect("validated").sample(rng);
        let ls = log_positive_stable(1.0 / self.beta, rng);
        // ln(t^{1/beta}) with t = E / M
        let shift = -ls / self.beta - g.ln();
        out.clear();
        out.extend((0..k).map(|_| {
            let e: f64 = Exp1.sample(rng);
            self.c / softplus(e.ln() / self.beta + shift)
        }));
    }

    /// Copula diagonal `C(u, .., u)` in `k` dimensions.
    pub fn diagonal(&self, u: f64, k: usize) -> f64 {
        // psi^{-1}(u) = (u^{-c} - 1)^beta
        let inv = (-self.c * u.ln()).exp_m1().powf(self.beta);
        (1.0 + (k as f64 * inv).powf(1.0 / self.beta)).powf(-1.0 / self.c)
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn mc_sigma(p: f64, n: usize) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn stable_laplace_transform() {
        let mut rng = stream(1, "stable", &[]);
        for alpha in [0.3, 0.5, 0.8] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| log_positive_stable(alpha, &mut rng).exp()).collect();
            for t in [0.5, 1.0, 2.0] {
                let vals: Vec<f64> = draws.iter().map(|s| (-t * s).exp()).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                let expect = (-f64::powf(t, alpha)).exp();
                assert!((mean - expect).abs() < 4.0 * sd / (n as f64).sqrt(), "alpha={alpha} t={t}");
            }
        }
    }

    #[test]
    fn logistic_margins_and_pair() {
        let mut rng = stream(2, "logistic", &[]);
        let n = 100_000;
        let theta = 0.5;
        let (mut m1, mut both) = (0usize, 0usize);
        for _ in 0..n {
            let z = sample_logistic(theta, 3, &mut rng).unwrap();
            m1 += (z[0] <= 1.0) as usize;
            both += (z[0].max(z[1]) <= 1.0) as usize;
        }
        let p1 = (-1f64).exp();
        let p2 = (-(2f64.sqrt())).exp();
        assert!((m1 as f64 / n as f64 - p1).abs() < 3.0 * mc_sigma(p1, n));
        assert!((both as f64 / n as f64 - p2).abs() < 3.0 * mc_sigma(p2, n));
    }

    #[test]
    fn logistic_near_complete_dependence() {
        let mut rng = stream(3, "logistic", &[]);
        let mut ratios: Vec<f64> = (0..2001)
            .map(|_| {
                let z = sample_logistic(0.01, 5, &mut rng).unwrap();
                let max = z.iter().cloned().fold(f64::MIN, f64::max);
                let min = z.iter().cloned().fold(f64::MAX, f64::min);
                max / min
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[1000] < 1.2);
        assert!(sample_logistic(0.0, 2, &mut rng).is_err());
    }

    #[test]
    fn clayton_margins_are_unit_frechet() {
        let cop = OuterPowerClayton::for_logistic(0.5, 1.0).unwrap();
        let mut rng = stream(4, "clayton", &[]);
        let n = 100_000;
        let mut x = Vec::new();
        let mut below = [0usize; 2];
        let mut diag = 0usize;
        for _ in 0..n {
            cop.sample_frechet(2, &mut rng, &mut x);
            below[0] += (x[0] <= 1.0) as usize;
            below[1] += (x[1] <= 0.5) as usize;
            diag += (x[0].max(x[1]) <= 1.0) as usize;
        }
        let (p1, p2) = ((-1f64).exp(), (-2f64).exp());
        assert!((below[0] as f64 / n as f64 - p1).abs() < 3.0 * mc_sigma(p1, n));
        assert!((below[1] as f64 / n as f64 - p2).abs() < 3.0 * mc_sigma(p2, n));
        let pd = cop.diagonal(p1, 2);
        assert!((diag as f64 / n as f64 - pd).abs() < 3.0 * mc_sigma(pd, n));
    }

    #[test]
    fn clayton_diagonal_approaches_logistic() {
        // C(u^{1/b}, ..)^b -> exp(-k^theta) at the unit Fréchet point 1
        for theta in [0.3, 0.5, 0.9] {
            let cop = OuterPowerClayton::for_logistic(theta, 1.0).unwrap();
            let limit = (-f64::powf(2.0, theta)).exp();
            let err = |b: f64| (cop.diagonal((-1.0 / b).exp(), 2).powf(b) - limit).abs();
            assert!(err(1e6) < 1e-4);
            assert!(err(1e6) < err(1e3) && err(1e3) < err(10.0));
        }
        assert!(OuterPowerClayton::new(1.0, 0.5).is_err());
        assert!(OuterPowerClayton::new(0.0, 2.0).is_err());
    }
}
