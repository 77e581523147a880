//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances for adaptive quadrature. Convergence is declared once the
/// summed error estimate is below `max(rel_tol * |value|, abs_tol)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-300, max_subdivisions: 2000 }
    }
}

impl QuadConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { rel_tol: tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_est: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

const INITIAL_PANELS: usize = 4;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument("integrate needs finite limits".into()));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, err_est: 0.0 });
    }
    // a few initial panels guard against a lucky agreement of the two rules
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let h = (b - a) / INITIAL_PANELS as f64;
    for j in 0..INITIAL_PANELS {
        let lo = a + j as f64 * h;
        let hi = if j + 1 == INITIAL_PANELS { b } else { a + (j + 1) as f64 * h };
        let (v, e) = gk15(&mut f, lo, hi);
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        total += v;
        total_err += e;
        heap.push(Panel { a: lo, b: hi, value: v, err: e });
    }
    let mut n = INITIAL_PANELS;
    while total_err > (cfg.rel_tol * total.abs()).max(cfg.abs_tol) {
        if n >= cfg.max_subdivisions {
            return Err(Error::QuadratureFailure { err_est: total_err });
        }
        let p = heap.pop().expect("heap non-empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval exhausted at machine precision
            return Err(Error::QuadratureFailure { err_est: total_err });
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, err: e2 });
        n += 1;
        if total_err < 0.0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    // resum to limit cancellation drift
    let value = heap.iter().map(|p| p.value).sum();
    let err_est = heap.iter().map(|p| p.err).sum();
    Ok(QuadResult { value, err_est })
}

/// Integrates `f` over `(0, ∞)` using the substitution `r = t / (1 - t)`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(mut f: F, cfg: &QuadConfig) -> Result<QuadResult> {
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let r = t / one_minus;
            let v = f(r);
            if v == 0.0 {
                0.0
            } else {
                v / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        cfg,
    )
}

/// Integrates `f` over `(-∞, upper]`.
pub fn integrate_lower_tail<F: FnMut(f64) -> f64>(mut f: F, upper: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    if upper == f64::NEG_INFINITY {
        return Ok(QuadResult { value: 0.0, err_est: 0.0 });
    }
    if upper == f64::INFINITY {
        let left = integrate_semi_infinite(|r| f(-r), cfg)?;
        let right = integrate_semi_infinite(&mut f, cfg)?;
        return Ok(QuadResult { value: left.value + right.value, err_est: left.err_est + right.err_est });
    }
    integrate_semi_infinite(|r| f(upper - r), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadConfig::default()).unwrap();
        assert_abs_diff_eq!(r.value, 64.0 / 6.0 - 4.0, epsilon = 1e-13);
    }

    #[test]
    fn semi_infinite_closed_forms() {
        let cfg = QuadConfig::with_tol(1e-12);
        // ∫ e^{-1/r} r^{-3} dr = ∫ u e^{-u} du = 1
        let r = integrate_semi_infinite(|r| if r == 0.0 { 0.0 } else { (-1.0 / r).exp() * r.powi(-3) }, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-11);
        // ∫ e^{-a/r} r^{-s} dr = a^{1-s} Γ(s-1) = 2^{-3} Γ(3) = 0.25
        let r = integrate_semi_infinite(|r| if r == 0.0 { 0.0 } else { (-2.0 / r).exp() * r.powi(-4) }, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 0.25, epsilon = 1e-11);
        assert!(r.err_est < 1e-10);
    }

    #[test]
    fn lower_tail_gaussian() {
        let cfg = QuadConfig::with_tol(1e-13);
        let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let r = integrate_lower_tail(pdf, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-12);
        let r = integrate_lower_tail(pdf, f64::INFINITY, &cfg).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_convergence_is_an_error() {
        let cfg = QuadConfig { rel_tol: 1e-14, abs_tol: 0.0, max_subdivisions: 5 };
        let r = integrate(|x: f64| x.sin() / x.max(1e-300).sqrt() * (50.0 * x).cos(), 0.0, 10.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
        let nan = integrate(|_| f64::NAN, 0.0, 1.0, &QuadConfig::default());
        assert!(nan.is_err());
    }
}
