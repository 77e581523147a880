//! Posterior sampling over parameters and latent partitions, with the
//! frequentist estimators used for comparison.

pub mod chain;
pub mod estimators;
pub mod optimize;
pub mod prior;
pub mod summary;
pub mod template;

pub use chain::{gibbs_conditional, run_chain, ChainState, InitPartitions, LikelihoodKind, McmcConfig, Trace};
pub use estimators::{
    bayes_factor_trend, extremal_coeff_test, independence_mle, pairwise_mle, stephenson_tawn_mle, BayesFactor, Estimate, ExtremalCoeffTest,
    FitConfig, TrendBayesFactor,
};
pub use prior::{Dist, ParamInfo, Prior, Transform};
pub use summary::{posterior_summary, PosteriorSummary, SeriesSummary};
pub use template::{DependenceTemplate, MarginTemplate, ModelTemplate};

#[cfg(test)]
mod estimator_tests;
#[cfg(test)]
mod tests;
