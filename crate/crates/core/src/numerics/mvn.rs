//! Multivariate normal and Student distribution functions.
//!
//! Dimensions one and two are evaluated deterministically (closed form and
//! one-dimensional adaptive quadrature). From dimension three on, the
//! separation-of-variables transform with variable prioritization is
//! integrated by a randomly shifted Richtmyer lattice; the spread across
//! shifts gives the error estimate.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_lower_tail, QuadConfig};
use super::special::{gamma_quantile, log_gamma, norm_cdf, norm_pdf, norm_ppf, student_t_cdf, student_t_log_pdf};
use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 25;

/// A symmetric positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovMatrix {
    m: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::InvalidArgument("covariance must be a non-empty square matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
        }
        let scale = m.iter().fold(0f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidArgument(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        if m.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite(format!("{n}x{n} covariance")));
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("covariance rows must be square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Like [`CovMatrix::new`] but also requires a unit diagonal.
    pub fn correlation(m: DMatrix<f64>) -> Result<Self> {
        let c = Self::new(m)?;
        if (0..c.dim()).any(|i| (c.m[(i, i)] - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidArgument("correlation matrix needs unit diagonal".into()));
        }
        Ok(c)
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> CovMatrix {
        CovMatrix { m: DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.m[(idx[a], idx[b])]) }
    }
}

/// Settings for the randomized lattice rule.
///
/// `n_points` is the total number of integrand evaluations of one pass,
/// split evenly over `n_shifts` random shifts. When `tol > 0` the sample
/// size doubles until the error estimate drops below `tol` or `max_points`
/// is reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmcConfig {
    pub n_points: usize,
    pub n_shifts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_points: usize,
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self { n_points: 4096, n_shifts: 12, seed: 0x6d61_7873_7461_6221, tol: 1e-5, max_points: 1 << 14 }
    }
}

impl QmcConfig {
    /// A fixed-size configuration without adaptive doubling.
    pub fn fixed(n_points: usize, n_shifts: usize, seed: u64) -> Self {
        Self { n_points, n_shifts, seed, tol: 0.0, max_points: n_points }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 128 {
            return Err(Error::Config(format!("QMC n_points must be >= 128, got {}", self.n_points)));
        }
        if self.n_shifts < 8 {
            return Err(Error::Config(format!("QMC n_shifts must be >= 8, got {}", self.n_shifts)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("QMC tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// A probability with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdfEstimate {
    pub prob: f64,
    pub err_est: f64,
}

impl CdfEstimate {
    fn exact(prob: f64) -> Self {
        Self { prob, err_est: 0.0 }
    }
}

const QUAD_2D: QuadConfig = QuadConfig { rel_tol: 1e-12, abs_tol: 1e-300, max_subdivisions: 2000 };

/// `P(X <= upper)` for `X ~ N(0, sigma)`.
pub fn mvn_cdf(upper: &[f64], sigma: &CovMatrix, cfg: &QmcConfig) -> Result<CdfEstimate> {
    let (b, s) = match reduce(upper, sigma)? {
        Reduced::Zero => return Ok(CdfEstimate::exact(0.0)),
        Reduced::Dims(b, s) => (b, s),
    };
    match b.len() {
        0 => Ok(CdfEstimate::exact(1.0)),
        1 => Ok(CdfEstimate::exact(norm_cdf(b[0] / s[(0, 0)].sqrt()))),
        2 => {
            let (s1, s2) = (s[(0, 0)].sqrt(), s[(1, 1)].sqrt());
            bvn_cdf(b[0] / s1, b[1] / s2, s[(0, 1)] / (s1 * s2))
        }
        _ => {
            cfg.validate()?;
            qmc_sov(&b, &s, None, cfg)
        }
    }
}

/// `P(X <= upper)` for a centered multivariate Student vector with scale
/// matrix `scale` and `df` degrees of freedom.
pub fn mvt_cdf(upper: &[f64], scale: &CovMatrix, df: f64, cfg: &QmcConfig) -> Result<CdfEstimate> {
    if !(df > 0.0) {
        return Err(Error::InvalidArgument(format!("degrees of freedom must be positive, got {df}")));
    }
    let (b, s) = match reduce(upper, scale)? {
        Reduced::Zero => return Ok(CdfEstimate::exact(0.0)),
        Reduced::Dims(b, s) => (b, s),
    };
    match b.len() {
        0 => Ok(CdfEstimate::exact(1.0)),
        1 => Ok(CdfEstimate::exact(student_t_cdf(b[0] / s[(0, 0)].sqrt(), df))),
        2 => {
            let (s1, s2) = (s[(0, 0)].sqrt(), s[(1, 1)].sqrt());
            bvt_cdf(b[0] / s1, b[1] / s2, s[(0, 1)] / (s1 * s2), df)
        }
        _ => {
            cfg.validate()?;
            qmc_sov(&b, &s, Some(df), cfg)
        }
    }
}

enum Reduced {
    Zero,
    Dims(Vec<f64>, DMatrix<f64>),
}

fn reduce(upper: &[f64], sigma: &CovMatrix) -> Result<Reduced> {
    let n = sigma.dim();
    if upper.len() != n {
        return Err(Error::InvalidArgument(format!("upper limit has length {}, covariance is {n}x{n}", upper.len())));
    }
    if n > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if upper.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN upper limit".into()));
    }
    if upper.iter().any(|&v| v == f64::NEG_INFINITY) {
        return Ok(Reduced::Zero);
    }
    let keep: Vec<usize> = (0..n).filter(|&i| upper[i] < f64::INFINITY).collect();
    let b = keep.iter().map(|&i| upper[i]).collect();
    let s = DMatrix::from_fn(keep.len(), keep.len(), |a, c| sigma.m[(keep[a], keep[c])]);
    Ok(Reduced::Dims(b, s))
}

/// Standard bivariate normal CDF with correlation `rho`.
pub fn bvn_cdf(a: f64, b: f64, rho: f64) -> Result<CdfEstimate> {
    // integrate over the coordinate with the smaller limit
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if rho >= 1.0 - 1e-14 {
        return Ok(CdfEstimate::exact(norm_cdf(a)));
    }
    if rho <= -1.0 + 1e-14 {
        return Ok(CdfEstimate::exact((norm_cdf(a) - norm_cdf(-b)).max(0.0)));
    }
    if rho == 0.0 {
        return Ok(CdfEstimate::exact(norm_cdf(a) * norm_cdf(b)));
    }
    let sd = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let r = integrate_lower_tail(|x| norm_pdf(x) * norm_cdf((b - rho * x) / sd), a, &QUAD_2D)?;
    Ok(CdfEstimate { prob: r.value.clamp(0.0, 1.0), err_est: r.err_est })
}

/// Standard bivariate Student CDF (unit scale diagonal, correlation `rho`).
pub fn bvt_cdf(a: f64, b: f64, rho: f64, df: f64) -> Result<CdfEstimate> {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if rho >= 1.0 - 1e-14 {
        return Ok(CdfEstimate::exact(student_t_cdf(a, df)));
    }
    if rho <= -1.0 + 1e-14 {
        return Ok(CdfEstimate::exact((student_t_cdf(a, df) - student_t_cdf(-b, df)).max(0.0)));
    }
    let one_m = (1.0 - rho) * (1.0 + rho);
    // X2 | X1 = x is Student with df + 1, location rho x and squared scale
    // (1 - rho^2)(df + x^2) / (df + 1)
    let r = integrate_lower_tail(
        |x| {
            let sc = (one_m * (df + x * x) / (df + 1.0)).sqrt();
            student_t_log_pdf(x, df).exp() * student_t_cdf((b - rho * x) / sc, df + 1.0)
        },
        a,
        &QUAD_2D,
    )?;
    Ok(CdfEstimate { prob: r.value.clamp(0.0, 1.0), err_est: r.err_est })
}

/// Cholesky factor with Genz–Bretz variable prioritization. Returns the
/// permuted limits and the lower-triangular factor (row-major).
fn prioritized_cholesky(b: &[f64], s: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = b.len();
    let mut cov = s.clone();
    let mut lim = b.to_vec();
    let mut c = vec![0.0; m * m];
    let mut y = vec![0.0; m];
    for i in 0..m {
        // pick the remaining variable with the smallest conditional probability
        let mut best = i;
        let mut best_p = f64::INFINITY;
        for j in i..m {
            let mut var = cov[(j, j)];
            let mut shift = 0.0;
            for l in 0..i {
                var -= c[j * m + l] * c[j * m + l];
                shift += c[j * m + l] * y[l];
            }
            if var <= 0.0 {
                continue;
            }
            let p = norm_cdf((lim[j] - shift) / var.sqrt());
            if p < best_p {
                best_p = p;
                best = j;
            }
        }
        if best != i {
            lim.swap(i, best);
            cov.swap_rows(i, best);
            cov.swap_columns(i, best);
            for l in 0..i {
                c.swap(i * m + l, best * m + l);
            }
        }
        let mut d = cov[(i, i)];
        for l in 0..i {
            d -= c[i * m + l] * c[i * m + l];
        }
        if d <= 1e-14 * cov[(i, i)].max(1e-300) {
            return Err(Error::NotPositiveDefinite("singular covariance in QMC factorization".into()));
        }
        let d = d.sqrt();
        c[i * m + i] = d;
        for j in i + 1..m {
            let mut v = cov[(j, i)];
            for l in 0..i {
                v -= c[j * m + l] * c[i * m + l];
            }
            c[j * m + i] = v / d;
        }
        // expected value of the truncated standard normal below the limit
        let mut shift = 0.0;
        for l in 0..i {
            shift += c[i * m + l] * y[l];
        }
        let u = (lim[i] - shift) / d;
        let p = norm_cdf(u);
        y[i] = if p > 1e-300 { -norm_pdf(u) / p } else { u };
    }
    Ok((lim, c))
}

const PRIMES: [u32; 26] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101,
];

fn qmc_sov(b: &[f64], s: &DMatrix<f64>, df: Option<f64>, cfg: &QmcConfig) -> Result<CdfEstimate> {
    let m = b.len();
    let (lim, c) = prioritized_cholesky(b, s)?;
    // one extra coordinate for the chi mixing variable
    let extra = usize::from(df.is_some());
    let dims = m - 1 + extra;
    let gen: Vec<f64> = PRIMES[..dims].iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let chi = df.map(chi_table);
    let chi = chi.as_deref();

    let mut n_total = cfg.n_points;
    loop {
        let per_shift = n_total.div_ceil(cfg.n_shifts).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut means = Vec::with_capacity(cfg.n_shifts);
        let mut w = vec![0.0; dims];
        let mut y = vec![0.0; m];
        for _ in 0..cfg.n_shifts {
            let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
            let mut acc = 0.0;
            for k in 1..=per_shift {
                for d in 0..dims {
                    let x = (k as f64 * gen[d] + shift[d]).fract();
                    w[d] = (2.0 * x - 1.0).abs();
                }
                // antithetic pair
                acc += sov_integrand(&lim, &c, &w, chi, &mut y);
                for v in w.iter_mut() {
                    *v = 1.0 - *v;
                }
                acc += sov_integrand(&lim, &c, &w, chi, &mut y);
            }
            means.push(acc / (2 * per_shift) as f64);
        }
        let ns = means.len() as f64;
        let mean = means.iter().sum::<f64>() / ns;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ns - 1.0);
        let err = 3.0 * (var / ns).sqrt();
        if !mean.is_finite() {
            return Err(Error::Numeric("non-finite QMC estimate".into()));
        }
        if cfg.tol <= 0.0 || err <= cfg.tol || n_total >= cfg.max_points {
            return Ok(CdfEstimate { prob: mean.clamp(0.0, 1.0), err_est: err });
        }
        n_total = (2 * n_total).min(cfg.max_points);
    }
}

#[inline]
fn sov_integrand(lim: &[f64], c: &[f64], w: &[f64], chi: Option<&ChiTable>, y: &mut [f64]) -> f64 {
    let m = lim.len();
    let (scale, w) = match chi {
        Some(t) => (t.scale(w[0]), &w[1..]),
        None => (1.0, w),
    };
    let mut prod = 1.0;
    for i in 0..m {
        let mut shift = 0.0;
        for l in 0..i {
            shift += c[i * m + l] * y[l];
        }
        let e = norm_cdf((scale * lim[i] - shift) / c[i * m + i]);
        prod *= e;
        if prod == 0.0 {
            return 0.0;
        }
        if i + 1 < m {
            y[i] = norm_ppf((w[i] * e).clamp(1e-300, 1.0 - 1e-16));
        }
    }
    prod
}

/// `sqrt(chi2_nu / nu)` as a function of its uniform score, tabulated as
/// `ln s` against the normal score `t = Φ^{-1}(u)` and interpolated with
/// cubic Hermite polynomials whose slopes come from the density.
pub(crate) struct ChiTable {
    df: f64,
    h: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
}

const CHI_T0: f64 = -9.0;
const CHI_T1: f64 = 8.0;
const CHI_STEP: f64 = 0.01;

impl ChiTable {
    fn new(df: f64) -> Self {
        let a = 0.5 * df;
        let lg = log_gamma(a).expect("positive shape");
        let n = ((CHI_T1 - CHI_T0) / CHI_STEP).round() as usize + 1;
        let mut y = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for j in 0..n {
            let t = CHI_T0 + j as f64 * CHI_STEP;
            let q = gamma_quantile(norm_cdf(t), a);
            // d ln s / dt = phi(t) / (2 q g(q)), g the Gamma(a) density
            let log_g = (a - 1.0) * q.ln() - q - lg;
            y.push(0.5 * (2.0 * q / df).ln());
            dy.push(0.5 * (norm_pdf(t).ln() - log_g - q.ln()).exp());
        }
        Self { df, h: CHI_STEP, y, dy }
    }

    /// Mixing scale at uniform score `u`.
    pub(crate) fn scale(&self, u: f64) -> f64 {
        let t = norm_ppf(u);
        let x = (t - CHI_T0) / self.h;
        let j = x.floor();
        if !(j >= 0.0) || j as usize + 1 >= self.y.len() {
            let q = gamma_quantile(u.clamp(1e-300, 1.0 - 1e-16), 0.5 * self.df);
            return (2.0 * q / self.df).sqrt();
        }
        let j = j as usize;
        let s = x - j as f64;
        let (y0, y1) = (self.y[j], self.y[j + 1]);
        let (m0, m1) = (self.dy[j] * self.h, self.dy[j + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        v.exp()
    }
}

fn chi_table(df: f64) -> Arc<ChiTable> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ChiTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = guard.get(&df.to_bits()) {
        return Arc::clone(t);
    }
    if guard.len() >= 64 {
        guard.clear();
    }
    let t = Arc::new(ChiTable::new(df));
    guard.insert(df.to_bits(), Arc::clone(&t));
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::integrate;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn corr3(r12: f64, r13: f64, r23: f64) -> CovMatrix {
        CovMatrix::from_rows(&[vec![1.0, r12, r13], vec![r12, 1.0, r23], vec![r13, r23, 1.0]]).unwrap()
    }

    fn precise() -> QmcConfig {
        QmcConfig { n_points: 1 << 16, n_shifts: 16, seed: 7, tol: 2e-6, max_points: 1 << 21 }
    }

    // Trivariate oracle: nested adaptive quadrature of the conditional
    // decomposition X1, then (X2, X3) | X1 via bivariate quadrature.
    fn trivariate_oracle(b: [f64; 3], r12: f64, r13: f64, r23: f64) -> f64 {
        let cfg = QuadConfig { rel_tol: 1e-11, abs_tol: 1e-15, max_subdivisions: 4000 };
        let s2 = (1.0 - r12 * r12).sqrt();
        let s3 = (1.0 - r13 * r13).sqrt();
        let rho = (r23 - r12 * r13) / (s2 * s3);
        let lo = -12.0;
        integrate(
            |x| {
                let inner = bvn_oracle((b[1] - r12 * x) / s2, (b[2] - r13 * x) / s3, rho);
                norm_pdf(x) * inner
            },
            lo,
            b[0],
            &cfg,
        )
        .unwrap()
        .value
    }

    // Bivariate oracle on a finite box with a dense Gauss–Kronrod rule.
    fn bvn_oracle(a: f64, b: f64, rho: f64) -> f64 {
        let cfg = QuadConfig { rel_tol: 1e-12, abs_tol: 1e-16, max_subdivisions: 4000 };
        let sd = (1.0 - rho * rho).sqrt();
        integrate(|x| norm_pdf(x) * norm_cdf((b - rho * x) / sd), -12.0, a.max(-12.0), &cfg).unwrap().value
    }

    #[test]
    fn one_dimensional_cases() {
        let cfg = QmcConfig::default();
        let one = CovMatrix::identity(1);
        assert_abs_diff_eq!(mvn_cdf(&[0.0], &one, &cfg).unwrap().prob, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mvt_cdf(&[0.0], &one, 4.3, &cfg).unwrap().prob, 0.5, epsilon = 1e-15);
        let x = 2f64.sqrt();
        assert_abs_diff_eq!(mvt_cdf(&[x], &one, 2.0, &cfg).unwrap().prob, 0.853_553_390_593_273_7, epsilon = 1e-8);
    }

    #[test]
    fn bivariate_orthant() {
        let cfg = QmcConfig::default();
        let s = CovMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = mvn_cdf(&[0.0, 0.0], &s, &cfg).unwrap().prob;
        assert_abs_diff_eq!(p, 0.25 + 0.5f64.asin() / (2.0 * PI), epsilon = 1e-12);
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        let t = mvt_cdf(&[0.0, 0.0], &CovMatrix::identity(2), 3.0, &cfg).unwrap().prob;
        assert_abs_diff_eq!(t, 0.25, epsilon = 1e-12);
        // Student orthant also follows the arcsine law
        let t = mvt_cdf(&[0.0, 0.0], &s, 5.0, &cfg).unwrap().prob;
        assert_abs_diff_eq!(t, 1.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn bivariate_matches_box_oracle() {
        for &(a, b, r) in &[(0.3, -0.2, 0.4), (-2.0, 1.5, -0.7), (1.0, 1.0, 0.95), (-3.0, -2.5, 0.2)] {
            let got = bvn_cdf(a, b, r).unwrap().prob;
            assert_abs_diff_eq!(got, bvn_oracle(a, b, r), epsilon = 1e-12);
        }
    }

    #[test]
    fn trivariate_matches_quadrature_oracle() {
        let s = corr3(0.4, 0.2, 0.6);
        let b = [0.3, -0.2, 0.8];
        let oracle = trivariate_oracle(b, 0.4, 0.2, 0.6);
        let est = mvn_cdf(&b, &s, &precise()).unwrap();
        assert_abs_diff_eq!(est.prob, oracle, epsilon = 1e-5);
        assert!(est.err_est < 1e-5);
        // default configuration stays inside its own error bar
        let est = mvn_cdf(&b, &s, &QmcConfig::default()).unwrap();
        assert!((est.prob - oracle).abs() < est.err_est.max(1e-5));
    }

    #[test]
    fn infinite_limits() {
        let s = corr3(0.4, 0.2, 0.6);
        let cfg = QmcConfig::default();
        let inf = f64::INFINITY;
        assert_abs_diff_eq!(mvn_cdf(&[inf, inf, inf], &s, &cfg).unwrap().prob, 1.0, epsilon = 1e-15);
        assert_eq!(mvn_cdf(&[0.0, f64::NEG_INFINITY, 1.0], &s, &cfg).unwrap().prob, 0.0);
        let p = mvn_cdf(&[-40.0, 0.0, 1.0], &s, &cfg).unwrap().prob;
        assert!(p < 1e-300);
        // marginalization over an infinite coordinate
        let p3 = mvn_cdf(&[0.0, inf, 0.0], &s, &cfg).unwrap().prob;
        assert_abs_diff_eq!(p3, 0.25 + 0.2f64.asin() / (2.0 * PI), epsilon = 1e-12);
    }

    #[test]
    fn student_converges_to_normal() {
        let s = corr3(0.4, 0.2, 0.6);
        let b = [0.3, -0.2, 0.8];
        let cfg = precise();
        let n = mvn_cdf(&b, &s, &cfg).unwrap().prob;
        let t = mvt_cdf(&b, &s, 1e4, &cfg).unwrap().prob;
        assert!((n - t).abs() < 5e-4, "{n} vs {t}");
    }

    #[test]
    fn trivariate_student_matches_mixture_quadrature() {
        // condition on the chi variable: P = E_S[Phi_3(S b)], S = sqrt(chi2_nu / nu)
        let (r12, r13, r23) = (0.3, -0.1, 0.5);
        let b = [0.5, 1.0, -0.3];
        let nu = 3.0;
        let cfg = QuadConfig { rel_tol: 1e-8, abs_tol: 1e-12, max_subdivisions: 400 };
        let lg = statrs::function::gamma::ln_gamma(0.5 * nu);
        let oracle = integrate(
            |u: f64| {
                // u = chi2 / 2 ~ Gamma(nu / 2)
                let dens = ((0.5 * nu - 1.0) * u.ln() - u - lg).exp();
                let sc = (2.0 * u / nu).sqrt();
                dens * trivariate_oracle([sc * b[0], sc * b[1], sc * b[2]], r12, r13, r23)
            },
            1e-12,
            60.0,
            &cfg,
        )
        .unwrap()
        .value;
        let est = mvt_cdf(&b, &corr3(r12, r13, r23), nu, &precise()).unwrap();
        assert_abs_diff_eq!(est.prob, oracle, epsilon = 2e-5);
    }

    #[test]
    fn chi_table_matches_direct_quantile() {
        for &df in &[0.7, 1.0, 2.0, 3.5, 11.0, 1e4] {
            let t = ChiTable::new(df);
            for j in 0..2000 {
                let u = (j as f64 + 0.37) / 2000.0;
                let direct = (2.0 * gamma_quantile(u, 0.5 * df) / df).sqrt();
                let got = t.scale(u);
                assert!((got / direct - 1.0).abs() < 1e-9, "df={df} u={u}: {got} vs {direct}");
            }
            for &u in &[1e-15, 1e-9, 1.0 - 1e-12] {
                let direct = (2.0 * gamma_quantile(u, 0.5 * df) / df).sqrt();
                let got = t.scale(u);
                assert!((got / direct - 1.0).abs() < 1e-5, "df={df} u={u}: {got} vs {direct}");
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = corr3(0.4, 0.2, 0.6);
        let cfg = QmcConfig::default();
        let a = mvn_cdf(&[0.1, 0.2, 0.3], &s, &cfg).unwrap();
        let b = mvn_cdf(&[0.1, 0.2, 0.3], &s, &cfg).unwrap();
        assert_eq!(a.prob.to_bits(), b.prob.to_bits());
        assert_eq!(a.err_est.to_bits(), b.err_est.to_bits());
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(CovMatrix::new(bad), Err(Error::NotPositiveDefinite(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(CovMatrix::new(asym).is_err());
        let cfg = QmcConfig { n_points: 10, ..QmcConfig::default() };
        assert!(mvn_cdf(&[0.0; 3], &corr3(0.1, 0.1, 0.1), &cfg).is_err());
        assert!(mvn_cdf(&[0.0; 2], &corr3(0.1, 0.1, 0.1), &QmcConfig::default()).is_err());
        assert!(mvt_cdf(&[0.0], &CovMatrix::identity(1), 0.0, &QmcConfig::default()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn monotone_in_each_limit(b0 in -2.0..2.0f64, b1 in -2.0..2.0f64, b2 in -2.0..2.0f64,
                                     bump in 0.05..1.0f64, which in 0usize..3) {
                let s = corr3(0.4, 0.2, 0.6);
                let cfg = QmcConfig::default();
                let b = [b0, b1, b2];
                let mut up = b;
                up[which] += bump;
                let lo = mvn_cdf(&b, &s, &cfg).unwrap();
                let hi = mvn_cdf(&up, &s, &cfg).unwrap();
                prop_assert!(hi.prob + hi.err_est + lo.err_est >= lo.prob);
            }
        }
    }
}
