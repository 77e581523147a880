//! Numerical building blocks: special functions, quadrature and
//! multivariate normal/Student distribution functions.

pub mod mvn;
pub mod quadrature;
pub mod special;
pub mod stats;

pub use mvn::{mvn_cdf, mvt_cdf, CdfEstimate, CovMatrix, QmcConfig};
pub use quadrature::{integrate, integrate_lower_tail, integrate_semi_infinite, QuadConfig, QuadResult};
pub use special::{gamma_cdf, gamma_quantile, log_gamma, norm_cdf, norm_pdf, norm_ppf, student_t_cdf};
