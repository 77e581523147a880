//! Experiment manifests: cells of simulation settings, replicates, the
//! estimators to compare and acceptance-style checks on the results.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{FitConfig, MarginTemplate, McmcConfig, ModelTemplate};
use crate::models::ModelSpec;
use crate::rng::derive_seed;
use crate::simulate::{SimJob, SimMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RmseMaxstable,
    RmseClayton,
    RmseMargins,
    Coverage,
    BayesFactor,
    SingleFit,
    SimulateOnly,
}

impl ExperimentKind {
    pub fn default_estimators(self) -> Vec<Estimator> {
        use Estimator::*;
        match self {
            ExperimentKind::RmseMaxstable => vec![Bayes, Pairwise],
            ExperimentKind::RmseClayton => vec![Bayes, Pairwise, StephensonTawn],
            ExperimentKind::RmseMargins => vec![Bayes, Pairwise, Independence],
            ExperimentKind::Coverage | ExperimentKind::SingleFit => vec![Bayes],
            ExperimentKind::BayesFactor => vec![BayesFactor],
            ExperimentKind::SimulateOnly => vec![],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Posterior median and equal-tailed interval from the latent-partition
    /// chain.
    Bayes,
    Pairwise,
    StephensonTawn,
    Independence,
    /// Chain with a spike-and-slab trend prior; records `B12`.
    BayesFactor,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Bayes => "bayes",
            Estimator::Pairwise => "pairwise",
            Estimator::StephensonTawn => "stephenson-tawn",
            Estimator::Independence => "independence",
            Estimator::BayesFactor => "bayes-factor",
        }
    }
}

/// One simulation setting and the model fitted to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Unique, used as a directory name.
    pub name: String,
    pub spec: ModelSpec,
    pub n_samples: usize,
    #[serde(flatten)]
    pub mode: SimMode,
    pub template: ModelTemplate,
    /// True parameter values by template name, for errors and coverage.
    #[serde(default)]
    pub truth: BTreeMap<String, f64>,
}

impl Cell {
    /// The simulation job of cell number `index`; its seed is derived from
    /// the manifest seed.
    pub fn sim_job(&self, master_seed: u64, index: usize) -> SimJob {
        SimJob {
            spec: self.spec.clone(),
            n_samples: self.n_samples,
            seed: derive_seed(master_seed, "cell", &[index as u64]),
            mode: self.mode.clone(),
        }
    }
}

/// An acceptance-style assertion evaluated on the aggregated tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Check {
    /// `rmse(numerator) / rmse(denominator) < max_ratio`, and the RMSE gap
    /// exceeds `min_gap_se` combined Monte Carlo standard errors.
    RmseRatio {
        cell: String,
        param: String,
        numerator: Estimator,
        denominator: Estimator,
        max_ratio: f64,
        #[serde(default)]
        min_gap_se: f64,
    },
    /// RMSEs of two estimators within a relative tolerance of each other.
    RmseClose { cell: String, param: String, a: Estimator, b: Estimator, rel_tol: f64 },
    /// Empirical interval coverage in percent within `[lo, hi]`.
    Coverage { cell: String, param: String, lo: f64, hi: f64 },
    /// Median Bayes factor over replicates above and/or below thresholds.
    BayesFactorMedian {
        cell: String,
        #[serde(default)]
        above: Option<f64>,
        #[serde(default)]
        below: Option<f64>,
    },
}

fn default_level() -> f64 {
    0.95
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub name: String,
    pub kind: ExperimentKind,
    pub cells: Vec<Cell>,
    pub replicates: u64,
    pub seed: u64,
    /// Defaults to the kind's estimator set when empty.
    #[serde(default)]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub fit: FitConfig,
    /// Credible level of the recorded intervals.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Write each chain's trace next to its job record.
    #[serde(default)]
    pub keep_traces: bool,
    #[serde(default)]
    pub checks: Vec<Check>,
    /// Output directory; the command line may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<std::path::PathBuf>,
}

impl ExperimentManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        if self.estimators.is_empty() {
            self.kind.default_estimators()
        } else {
            self.estimators.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        if self.cells.is_empty() {
            return bad("manifest has no cells".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level must lie in (0, 1), got {}", self.level));
        }
        self.mcmc.validate()?;
        let ests = self.estimators();
        let mut names = std::collections::BTreeSet::new();
        for (i, c) in self.cells.iter().enumerate() {
            if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch)) || c.name.starts_with('.') {
                return bad(format!("cell name {:?} must be non-empty [A-Za-z0-9._-]", c.name));
            }
            if !names.insert(c.name.as_str()) {
                return bad(format!("duplicate cell name {:?}", c.name));
            }
            c.sim_job(self.seed, i).validate()?;
            c.template.validate()?;
            if c.template.k != c.spec.k {
                return bad(format!("cell {}: template k = {} but data k = {}", c.name, c.template.k, c.spec.k));
            }
            let tn = c.template.names();
            if let Some(n) = c.truth.keys().find(|n| !tn.contains(n)) {
                return bad(format!("cell {}: truth given for unknown parameter {n:?}", c.name));
            }
            let free_margins = !matches!(c.template.margins, MarginTemplate::UnitFrechet | MarginTemplate::Fixed { .. });
            for e in &ests {
                match e {
                    Estimator::Independence if !free_margins => return bad(format!("cell {}: independence fit needs free margins", c.name)),
                    Estimator::BayesFactor if c.template.margins != MarginTemplate::Trend => {
                        return bad(format!("cell {}: Bayes factors need trend margins", c.name))
                    }
                    _ => {}
                }
            }
        }
        for ch in &self.checks {
            let cell = match ch {
                Check::RmseRatio { cell, .. } | Check::RmseClose { cell, .. } | Check::Coverage { cell, .. } | Check::BayesFactorMedian { cell, .. } => cell,
            };
            if !names.contains(cell.as_str()) {
                return bad(format!("check refers to unknown cell {cell:?}"));
            }
        }
        Ok(())
    }
}
