//! Sample statistics and the Kolmogorov–Smirnov test.

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // P(K <= x) = sqrt(2 pi) / x * sum_j exp(-(2j - 1)^2 pi^2 / (8 x^2))
        let s: f64 = (1..=20)
            .map(|j| {
                let t = (2 * j - 1) as f64 * std::f64::consts::PI / x;
                (-t * t / 8.0).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / x;
        return (1.0 - s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        sum += if j as usize % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `sample` against a continuous `cdf`. Returns the
/// statistic `D` and the asymptotic p-value with Stephens' small-sample
/// correction.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (0 for fewer than two values).
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Empirical quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Sample autocorrelation at `lag`; a constant series has autocorrelation 1.
pub fn acf(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    if lag == 0 {
        return 1.0;
    }
    let m = mean(x);
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if c0 <= f64::EPSILON * f64::EPSILON * n as f64 * m.abs().max(1.0).powi(2) {
        return 1.0;
    }
    if lag >= n {
        return 0.0;
    }
    let c: f64 = (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum();
    c / c0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::RngExt;

    #[test]
    fn kolmogorov_known_values() {
        // classical critical values
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        // continuity across the branch switch
        assert!((kolmogorov_sf(0.2999999) - kolmogorov_sf(0.3)).abs() < 1e-6);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_shift() {
        let mut rng = stream(1, "ks", &[]);
        let u: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_test(&u, |x| x.clamp(0.0, 1.0)).1 > 1e-3);
        let shifted: Vec<f64> = u.iter().map(|x| x * 0.9).collect();
        assert!(ks_test(&shifted, |x| x.clamp(0.0, 1.0)).1 < 1e-6);
    }

    #[test]
    fn summaries() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(variance(&[1.0, 3.0]), 2.0);
        assert_eq!(acf(&[2.0; 10], 3), 1.0);
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.25), 1.0);
        assert_eq!(quantile_sorted(&s, 0.1), 0.4);
    }
}
