//! Builders for the standard study manifests at desk or full scale.

use std::collections::BTreeMap;

use super::manifest::{Cell, Check, Estimator, ExperimentKind, ExperimentManifest};
use crate::error::Result;
use crate::inference::{FitConfig, MarginTemplate, McmcConfig, ModelTemplate};
use crate::models::{GevMargin, ModelSpec};
use crate::simulate::SimMode;

fn manifest(name: &str, kind: ExperimentKind, cells: Vec<Cell>, replicates: u64, seed: u64) -> ExperimentManifest {
    ExperimentManifest {
        name: name.into(),
        kind,
        cells,
        replicates,
        seed,
        estimators: Vec::new(),
        mcmc: McmcConfig::default(),
        fit: FitConfig::default(),
        level: 0.95,
        keep_traces: false,
        checks: Vec::new(),
        out: None,
    }
}

pub fn cell_name(k: usize, theta: f64) -> String {
    format!("k{k}-theta{theta}")
}

fn logistic_cell(k: usize, theta: f64, n: usize, mode: SimMode) -> Result<Cell> {
    Ok(Cell {
        name: cell_name(k, theta),
        spec: ModelSpec::logistic(k, theta)?,
        n_samples: n,
        mode,
        template: ModelTemplate::logistic(k),
        truth: BTreeMap::from([("theta".to_string(), theta)]),
    })
}

/// Bayes against pairwise likelihood on exact logistic data.
pub fn rmse_maxstable(ks: &[usize], thetas: &[f64], n: usize, replicates: u64, seed: u64) -> Result<ExperimentManifest> {
    let cells = ks.iter().flat_map(|&k| thetas.iter().map(move |&t| logistic_cell(k, t, n, SimMode::ExactMaxStable))).collect::<Result<_>>()?;
    Ok(manifest("rmse-maxstable", ExperimentKind::RmseMaxstable, cells, replicates, seed))
}

/// Bayes, pairwise and Stephenson–Tawn on rescaled block maxima of
/// outer-power Clayton vectors.
pub fn rmse_clayton(ks: &[usize], thetas: &[f64], block_size: usize, n: usize, replicates: u64, seed: u64) -> Result<ExperimentManifest> {
    let mode = SimMode::BlockMaxima { block_size, clayton_c: 1.0 };
    let cells = ks.iter().flat_map(|&k| thetas.iter().map(move |&t| (k, t))).map(|(k, t)| logistic_cell(k, t, n, mode.clone())).collect::<Result<_>>()?;
    Ok(manifest("rmse-clayton", ExperimentKind::RmseClayton, cells, replicates, seed))
}

/// Common GEV margins `(1, 1, xi)` with a logistic nuisance dependence.
pub fn rmse_margins(k: usize, thetas: &[f64], xis: &[f64], n: usize, replicates: u64, seed: u64) -> Result<ExperimentManifest> {
    let mut cells = Vec::new();
    for &xi in xis {
        for &theta in thetas {
            let g = GevMargin::new(1.0, 1.0, xi)?;
            cells.push(Cell {
                name: format!("k{k}-theta{theta}-xi{xi}"),
                spec: ModelSpec::logistic(k, theta)?.with_margins(vec![g; k])?,
                n_samples: n,
                mode: SimMode::ExactMaxStable,
                template: ModelTemplate::logistic(k).with_margins(MarginTemplate::Common)?,
                truth: BTreeMap::from([("theta".into(), theta), ("mu".into(), 1.0), ("sigma".into(), 1.0), ("xi".into(), xi)]),
            });
        }
    }
    Ok(manifest("rmse-margins", ExperimentKind::RmseMargins, cells, replicates, seed))
}

pub fn coverage(ks: &[usize], thetas: &[f64], n: usize, replicates: u64, seed: u64) -> Result<ExperimentManifest> {
    let cells = ks.iter().flat_map(|&k| thetas.iter().map(move |&t| logistic_cell(k, t, n, SimMode::ExactMaxStable))).collect::<Result<_>>()?;
    Ok(manifest("coverage", ExperimentKind::Coverage, cells, replicates, seed))
}

/// Trend `xi_i = 1 + i beta` in the shapes of `(1, 1, xi_i)` margins with
/// logistic dependence `theta`.
pub fn bayes_factor(betas: &[f64], k: usize, theta: f64, n: usize, replicates: u64, seed: u64) -> Result<ExperimentManifest> {
    let mut cells = Vec::new();
    for &beta in betas {
        let margins = (1..=k).map(|i| GevMargin::new(1.0, 1.0, 1.0 + i as f64 * beta)).collect::<Result<_>>()?;
        cells.push(Cell {
            name: format!("beta{beta}"),
            spec: ModelSpec::logistic(k, theta)?.with_margins(margins)?,
            n_samples: n,
            mode: SimMode::ExactMaxStable,
            template: ModelTemplate::logistic(k).with_margins(MarginTemplate::Trend)?,
            truth: BTreeMap::from([("theta".into(), theta), ("mu".into(), 1.0), ("sigma".into(), 1.0), ("alpha".into(), 1.0), ("beta".into(), beta)]),
        });
    }
    let mut m = manifest("bayes-factor", ExperimentKind::BayesFactor, cells, replicates, seed);
    m.mcmc = McmcConfig { n_iter: 20_000, burn_in: 5_000, ..McmcConfig::default() };
    Ok(m)
}

fn ratio(cell: String, param: &str, num: Estimator, den: Estimator, max_ratio: f64, min_gap_se: f64) -> Check {
    Check::RmseRatio { cell, param: param.into(), numerator: num, denominator: den, max_ratio, min_gap_se }
}

/// The desk-scale studies with their acceptance checks, by name:
/// `efficiency`, `coverage`, `clayton`, `margins`, `bayes-factor`.
pub fn desk(name: &str, seed: u64) -> Result<Option<ExperimentManifest>> {
    use Estimator::*;
    let m = match name {
        "efficiency" => {
            let mut m = rmse_maxstable(&[10], &[0.4, 0.7], 100, 100, seed)?;
            m.checks = vec![
                ratio(cell_name(10, 0.4), "theta", Bayes, Pairwise, 1.0, 0.0),
                ratio(cell_name(10, 0.7), "theta", Bayes, Pairwise, 0.95, 2.0),
            ];
            m
        }
        "coverage" => {
            let mut m = coverage(&[6], &[0.4, 0.7], 100, 200, seed)?;
            m.checks = [0.4, 0.7].iter().map(|&t| Check::Coverage { cell: cell_name(6, t), param: "theta".into(), lo: 88.0, hi: 99.0 }).collect();
            m
        }
        "clayton" => {
            let mut m = rmse_clayton(&[10], &[0.9], 50, 100, 100, seed)?;
            let c = cell_name(10, 0.9);
            m.checks = vec![
                ratio(c.clone(), "theta", Bayes, Pairwise, 1.0, 0.0),
                ratio(c.clone(), "theta", Pairwise, StephensonTawn, 1.0, 0.0),
                ratio(c, "theta", Bayes, StephensonTawn, 0.5, 0.0),
            ];
            m
        }
        "margins" => {
            let mut m = rmse_margins(10, &[0.7], &[0.4], 100, 100, seed)?;
            m.estimators = vec![Bayes, Independence];
            let c = "k10-theta0.7-xi0.4".to_string();
            m.checks = vec![
                ratio(c.clone(), "xi", Bayes, Independence, 0.8, 0.0),
                Check::RmseClose { cell: c.clone(), param: "mu".into(), a: Bayes, b: Independence, rel_tol: 0.15 },
                Check::RmseClose { cell: c, param: "sigma".into(), a: Bayes, b: Independence, rel_tol: 0.15 },
            ];
            m
        }
        "bayes-factor" => {
            let mut m = bayes_factor(&[0.0, 0.08], 10, 0.5, 15, 20, seed)?;
            m.checks = vec![
                Check::BayesFactorMedian { cell: "beta0".into(), above: Some(1.0), below: None },
                Check::BayesFactorMedian { cell: "beta0.08".into(), above: None, below: Some(1.0) },
            ];
            m
        }
        _ => return Ok(None),
    };
    Ok(Some(m))
}

/// Full-scale grids with 1500 replicates, for offline runs.
pub fn full(name: &str, seed: u64) -> Result<Option<ExperimentManifest>> {
    let thetas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let m = match name {
        "efficiency" => rmse_maxstable(&[6, 10, 50], &thetas, 100, 1500, seed)?,
        "coverage" => coverage(&[6, 10, 50], &[0.1, 0.4, 0.7, 0.9], 100, 1500, seed)?,
        "clayton" => rmse_clayton(&[6, 10], &[0.1, 0.4, 0.7, 0.9], 50, 100, 1500, seed)?,
        "margins" => rmse_margins(10, &[0.1, 0.4, 0.7, 0.9], &[-0.2, 0.4, 1.0], 100, 1500, seed)?,
        "bayes-factor" => bayes_factor(&[0.0, 0.02, 0.04, 0.06, 0.08], 10, 0.5, 15, 100, seed)?,
        _ => return Ok(None),
    };
    Ok(Some(m))
}

pub const STUDIES: [&str; 5] = ["efficiency", "coverage", "clayton", "margins", "bayes-factor"];
