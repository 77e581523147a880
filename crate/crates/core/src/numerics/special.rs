//! Scalar special functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::{beta, gamma};

use crate::error::{Error, Result};

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("log_gamma needs x > 0, got {x}")));
    }
    Ok(gamma::ln_gamma(x))
}

/// Regularized lower incomplete gamma `γ(α, x) / Γ(α)`, the CDF of a
/// Gamma(α, 1) variable.
pub fn gamma_cdf(x: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() || x.is_nan() || x < 0.0 {
        return Err(Error::InvalidArgument(format!("gamma_cdf needs x >= 0, alpha > 0; got x = {x}, alpha = {alpha}")));
    }
    Ok(gamma_cdf_unchecked(x, alpha))
}

#[inline]
pub(crate) fn gamma_cdf_unchecked(x: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        gamma::gamma_lr(alpha, x)
    }
}

/// Quantile of Gamma(α, 1): Newton/Halley refinement of a Wilson–Hilferty
/// start, safeguarded by bisection.
pub fn gamma_quantile(p: f64, alpha: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let lg = gamma::ln_gamma(alpha);
    let mut x = if alpha > 1.0 {
        let z = norm_ppf(p);
        let t = 1.0 / (9.0 * alpha);
        (alpha * (1.0 - t + z * t.sqrt()).powi(3)).max(1e-3 * alpha)
    } else {
        // lower tail: F(x) ~ x^a / Γ(a+1)
        let t = 1.0 - alpha * (0.253 + alpha * 0.12);
        if p < t {
            (p / t).powf(1.0 / alpha)
        } else {
            1.0 - (1.0 - (p - t) / (1.0 - t)).ln()
        }
    };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let f = gamma::gamma_lr(alpha, x) - p;
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let log_pdf = (alpha - 1.0) * x.ln() - x - lg;
        let pdf = log_pdf.exp();
        let mut next = if pdf > 0.0 {
            let newton = f / pdf;
            // Halley correction using d(log pdf)/dx
            let corr = newton * 0.5 * ((alpha - 1.0) / x - 1.0);
            x - newton / (1.0 - corr.clamp(-0.5, 0.5))
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1e-300) };
        }
        if (next - x).abs() <= 1e-14 * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile (Wichura's AS241 rational approximations,
/// relative accuracy about 1e-16).
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&AS241_A, r) / poly(&AS241_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&AS241_C, r) / poly(&AS241_D, r)
    } else {
        let r = r - 5.0;
        poly(&AS241_E, r) / poly(&AS241_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[inline]
fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_6e3,
];
const AS241_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.043_631_033_949_886_6e-15,
];

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(x: f64, df: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if df > 1e7 {
        return norm_cdf(x);
    }
    let tail = 0.5 * beta::beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Log density of the Student-t distribution.
pub fn student_t_log_pdf(x: f64, df: f64) -> f64 {
    gamma::ln_gamma(0.5 * (df + 1.0)) - gamma::ln_gamma(0.5 * df) - 0.5 * (df * PI).ln()
        - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
}

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::{integrate, QuadConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_gamma_known_values() {
        assert_abs_diff_eq!(log_gamma(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_gamma(0.5).unwrap(), 0.5 * PI.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(log_gamma(6.0).unwrap(), 120f64.ln(), epsilon = 1e-12);
        // recurrence ln Γ(x+1) = ln Γ(x) + ln x over the contract range
        for &x in &[1e-3, 0.07, 0.9, 3.3, 17.5, 250.0, 999.0] {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + f64::ln(x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + lhs.abs()));
        }
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn gamma_cdf_known_values() {
        assert_eq!(gamma_cdf(0.0, 2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gamma_cdf(1.0, 1.0).unwrap(), 1.0 - (-1f64).exp(), epsilon = 1e-12);
        assert!(gamma_cdf(-1.0, 1.0).is_err());
        assert!(gamma_cdf(1.0, 0.0).is_err());
    }

    #[test]
    fn gamma_cdf_matches_quadrature_oracle() {
        let cfg = QuadConfig { rel_tol: 1e-13, abs_tol: 1e-15, max_subdivisions: 500 };
        for &(alpha, x) in &[(2.5, 3.7), (0.3, 0.2), (0.7, 4.0), (7.0, 2.0), (12.0, 15.0)] {
            let lg = log_gamma(alpha).unwrap();
            let oracle = integrate(|t: f64| ((alpha - 1.0) * t.ln() - t - lg).exp(), 0.0, x, &cfg).unwrap();
            assert_abs_diff_eq!(gamma_cdf(x, alpha).unwrap(), oracle.value, epsilon = 1e-10);
        }
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for &alpha in &[0.05, 0.5, 1.0, 2.5, 50.0, 5000.0] {
            for &p in &[1e-8, 0.01, 0.3, 0.5, 0.9, 0.999999] {
                let x = gamma_quantile(p, alpha);
                assert_abs_diff_eq!(gamma_cdf(x, alpha).unwrap(), p, epsilon = 1e-10 * p.max(1e-3));
            }
        }
    }

    #[test]
    fn normal_and_student_functions() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_ppf(norm_cdf(1.3)), 1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(norm_ppf(1e-10), -6.361340902404056, epsilon = 1e-9);
        for &p in &[1e-300, 1e-20, 1e-5, 0.02, 0.3, 0.5, 0.77, 0.97, 1.0 - 1e-9] {
            let x = norm_ppf(p);
            let back = if x < 0.0 { norm_cdf(x) / p - 1.0 } else { (1.0 - norm_cdf(x)) / (1.0 - p) - 1.0 };
            assert!(back.abs() < 1e-11 * (1.0 + x * x), "p={p} x={x} rel={back}");
        }
        assert_abs_diff_eq!(student_t_cdf(0.0, 3.0), 0.5, epsilon = 1e-15);
        // closed form for df = 2
        let x = 2f64.sqrt();
        assert_abs_diff_eq!(student_t_cdf(x, 2.0), 0.5 + x / (2.0 * (2.0 + x * x).sqrt()), epsilon = 1e-12);
        // df = 1 is Cauchy
        assert_abs_diff_eq!(student_t_cdf(1.0, 1.0), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(student_t_cdf(-1.0, 1.0), 0.25, epsilon = 1e-12);
    }
}
