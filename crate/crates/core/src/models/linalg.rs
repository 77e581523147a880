//! Small dense helpers for conditional Gaussian computations.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) fn sub(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

pub(crate) fn chol(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    m.cholesky().ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub(crate) fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Conditional law of the `c` coordinates given the `t` coordinates of a
/// centered Gaussian with covariance `m`: returns
/// `(m_tt^{-1} x_t, m_ct m_tt^{-1} x_t, m_cc - m_ct m_tt^{-1} m_tc, chol(m_tt))`.
pub(crate) struct Conditional {
    pub solved: DVector<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub chol_tt: Cholesky<f64, Dyn>,
}

pub(crate) fn condition(m: &DMatrix<f64>, t: &[usize], c: &[usize], x_t: &DVector<f64>) -> Result<Conditional> {
    let chol_tt = chol(sub(m, t, t), "conditioning block")?;
    let solved = chol_tt.solve(x_t);
    let m_ct = sub(m, c, t);
    let mean = &m_ct * &solved;
    let w = chol_tt.solve(&m_ct.transpose());
    let mut cov = sub(m, c, c) - &m_ct * w;
    // restore exact symmetry lost to rounding
    for i in 0..cov.nrows() {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(Conditional { solved, mean, cov, chol_tt })
}
