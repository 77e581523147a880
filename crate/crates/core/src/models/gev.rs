//! GEV margins and the transformation to unit Fréchet scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|xi|` the Gumbel limit is used.
pub const GUMBEL_SWITCH: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevMargin {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevMargin {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        let m = Self { mu, sigma, xi };
        m.validate()?;
        Ok(m)
    }

    /// The margin that leaves unit Fréchet data unchanged.
    pub fn unit_frechet() -> Self {
        Self { mu: 1.0, sigma: 1.0, xi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite() && self.mu.is_finite() && self.xi.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid GEV margin {self:?}")));
        }
        Ok(())
    }

    /// `ln U(z)`, or `None` outside the support.
    #[inline]
    pub fn log_u(&self, z: f64) -> Option<f64> {
        let y = (z - self.mu) / self.sigma;
        if self.xi.abs() < GUMBEL_SWITCH {
            return Some(y);
        }
        let t = 1.0 + self.xi * y;
        if t > 0.0 && t.is_finite() {
            Some(t.ln() / self.xi)
        } else {
            None
        }
    }

    /// GEV distribution function `exp(-1 / U(z))`.
    pub fn cdf(&self, z: f64) -> f64 {
        match self.log_u(z) {
            Some(lu) => (-(-lu).exp()).exp(),
            None => {
                if self.xi > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// GEV log density.
    pub fn log_pdf(&self, z: f64) -> f64 {
        match self.log_u(z) {
            Some(lu) => -(-lu).exp() - 2.0 * lu - self.sigma.ln() + (1.0 - self.xi) * lu,
            None => f64::NEG_INFINITY,
        }
    }

    /// Inverse of the transformation: maps a unit Fréchet value back to the
    /// GEV scale.
    pub fn from_frechet(&self, u: f64) -> f64 {
        if self.xi.abs() < GUMBEL_SWITCH {
            self.mu + self.sigma * u.ln()
        } else {
            self.mu + self.sigma * (u.powf(self.xi) - 1.0) / self.xi
        }
    }
}

/// Maps raw observations to unit Fréchet scale. Returns `U(z)` and the log
/// Jacobian `sum_i [-ln sigma_i + (1 - xi_i) ln U_i]`.
pub fn gev_to_frechet(z: &[f64], margins: &[GevMargin]) -> Result<(Vec<f64>, f64)> {
    if z.len() != margins.len() {
        return Err(Error::InvalidArgument(format!(
            "observation has {} components but {} margins given",
            z.len(),
            margins.len()
        )));
    }
    let mut u = Vec::with_capacity(z.len());
    let mut log_jac = 0.0;
    for (i, (&zi, m)) in z.iter().zip(margins).enumerate() {
        let lu = m.log_u(zi).ok_or(Error::OutOfSupport { component: i })?;
        log_jac += -m.sigma.ln() + (1.0 - m.xi) * lu;
        u.push(lu.exp());
    }
    Ok((u, log_jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let (u, lj) = gev_to_frechet(&[1.0], &[GevMargin::new(0.0, 1.0, 1.0).unwrap()]).unwrap();
        assert_abs_diff_eq!(u[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lj, 0.0, epsilon = 1e-15);
        let (u, _) = gev_to_frechet(&[0.0], &[GevMargin::new(0.0, 1.0, 1e-10).unwrap()]).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-15);
        let (u, lj) = gev_to_frechet(&[0.7, 3.2], &[GevMargin::unit_frechet(); 2]).unwrap();
        assert_abs_diff_eq!(u[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1], 3.2, epsilon = 1e-15);
        assert_abs_diff_eq!(lj, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn support_violation_names_component() {
        let m = [GevMargin::unit_frechet(), GevMargin::new(0.0, 1.0, 0.5).unwrap()];
        let r = gev_to_frechet(&[1.0, -3.0], &m);
        assert!(matches!(r, Err(Error::OutOfSupport { component: 1 })));
        assert!(GevMargin::new(0.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = GevMargin::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(0.2..3.0),
                rng.random_range(-0.6..0.8),
            )
            .unwrap();
            // draw z inside the support through the inverse map
            let z = m.from_frechet(rng.random_range(0.2..20.0));
            let (u, lj) = gev_to_frechet(&[z], &[m]).unwrap();
            let h = 1e-5 * m.sigma;
            let up = m.log_u(z + h).unwrap().exp();
            let dn = m.log_u(z - h).unwrap().exp();
            let fd = (up - dn) / (2.0 * h);
            assert!((fd.ln() - lj).abs() < 1e-7, "{m:?} z={z} u={}", u[0]);
            // density identity: f_GEV(z) = exp(-1/u) u^-2 dU/dz
            let lp = -1.0 / u[0] - 2.0 * u[0].ln() + lj;
            assert_abs_diff_eq!(m.log_pdf(z), lp, epsilon = 1e-10);
        }
    }

    #[test]
    fn gumbel_limit_is_continuous() {
        let g = GevMargin::new(0.5, 2.0, 0.0).unwrap();
        let near = GevMargin::new(0.5, 2.0, 1e-6).unwrap();
        for &z in &[-3.0, 0.0, 0.5, 4.0] {
            assert!((g.log_u(z).unwrap() - near.log_u(z).unwrap()).abs() < 1e-4);
        }
    }
}
