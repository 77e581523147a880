use super::estimators::*;
use super::*;
use crate::models::{GevMargin, ModelSpec};
use crate::partition::{enumerate_all, Partition};
use crate::rng::stream;
use crate::simulate::{Dataset, SimJob, SimMode};
use rand::RngExt;

fn logistic_data(k: usize, theta: f64, n: usize, seed: u64) -> Dataset {
    SimJob { spec: ModelSpec::logistic(k, theta).unwrap(), n_samples: n, seed, mode: SimMode::ExactMaxStable }.run(0).unwrap()
}

fn quick() -> FitConfig {
    FitConfig { starts: 2, ..FitConfig::default() }
}

/// Bivariate logistic density `exp(-V)(V_1 V_2 - V_12)` written out from the
/// exponent function, in logs so that small `theta` does not overflow.
fn bivariate_logistic_log_density(theta: f64, z1: f64, z2: f64) -> f64 {
    let r = 1.0 / theta;
    let (l1, l2) = (z1.ln(), z2.ln());
    let (a1, a2) = (-r * l1, -r * l2);
    let log_a = a1.max(a2) + (-(a1 - a2).abs()).exp().ln_1p();
    let v = (theta * log_a).exp();
    let first = 2.0 * (theta - 1.0) * log_a;
    let mixed = (r - 1.0).ln() + (theta - 2.0) * log_a;
    let m = first.max(mixed);
    -v - (r + 1.0) * (l1 + l2) + m + ((first - m).exp() + (mixed - m).exp()).ln()
}

#[test]
fn pairwise_consistent_at_large_n() {
    let data = logistic_data(2, 0.5, 10_000, 1);
    let est = pairwise_mle(&data, &ModelTemplate::logistic(2), None, &quick()).unwrap();
    assert!((est.x[0] - 0.5).abs() < 0.02, "{est:?}");
    assert!(!est.boundary && est.converged);
}

#[test]
fn pairwise_matches_grid_maximum_of_exact_density() {
    let data = logistic_data(2, 0.4, 300, 2);
    let est = pairwise_mle(&data, &ModelTemplate::logistic(2), None, &FitConfig::default()).unwrap();
    let ll = |t: f64| data.obs.iter().map(|z| bivariate_logistic_log_density(t, z[0], z[1])).sum::<f64>();
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
    for g in 1..10_000 {
        let t = g as f64 * 1e-4;
        let v = ll(t);
        if v > best {
            best = v;
            arg = t;
        }
    }
    assert!((est.x[0] - arg).abs() < 1e-3, "{} vs grid {arg}", est.x[0]);
    assert!((est.log_lik - best).abs() < 1e-3 * best.abs());
}

#[test]
fn complete_dependence_hits_the_boundary() {
    let mut data = logistic_data(2, 0.5, 200, 3);
    for z in &mut data.obs {
        z[1] = z[0];
    }
    let est = pairwise_mle(&data, &ModelTemplate::logistic(2), None, &quick()).unwrap();
    assert!(est.boundary, "{est:?}");
    assert!(est.x[0] < 1e-3);
}

#[test]
fn independence_recovers_gumbel_margins() {
    let (mu, sigma) = (2.0, 1.5);
    let g = GevMargin::new(mu, sigma, 0.0).unwrap();
    let mut rng = stream(5, "gumbel", &[]);
    let obs: Vec<Vec<f64>> = (0..100).map(|_| (0..10).map(|_| g.from_frechet(-1.0 / rng.random::<f64>().ln())).collect()).collect();
    let data = Dataset::new(10, obs).unwrap();
    let t = ModelTemplate::logistic(10).with_margins(MarginTemplate::Common).unwrap();
    let est = independence_mle(&data, &t, &FitConfig::default()).unwrap();
    assert_eq!(est.names, ["mu", "sigma", "xi"]);
    // Gumbel information with a known shape: var(mu) = 1.1087 s^2 / n, var(sigma) = 0.6079 s^2 / n
    let n = 1000.0;
    let se_mu = (1.1087 * sigma * sigma / n).sqrt();
    let se_sigma = (0.6079 * sigma * sigma / n).sqrt();
    let se = hessian_se(|x| independence_log_lik(&t, &[0.5, x[0], x[1], x[2]], &data), &est.x).unwrap();
    assert!(se[0] >= se_mu * 0.9 && se[1] >= se_sigma * 0.9, "{se:?}");
    assert!((est.x[0] - mu).abs() < 3.0 * se[0], "{est:?} {se:?}");
    assert!((est.x[1] - sigma).abs() < 3.0 * se[1], "{est:?} {se:?}");
    assert!(est.x[2].abs() < 3.0 * se[2], "{est:?} {se:?}");
}

#[test]
fn degenerate_sample_is_an_error() {
    let data = Dataset::new(3, vec![vec![1.5; 3]; 20]).unwrap();
    let t = ModelTemplate::logistic(3).with_margins(MarginTemplate::Common).unwrap();
    assert!(matches!(independence_mle(&data, &t, &quick()), Err(crate::Error::Estimation(_))));
    assert!(independence_mle(&data, &ModelTemplate::logistic(3), &quick()).is_err());
}

#[test]
fn pairwise_and_independence_margins_agree_near_independence() {
    let g = GevMargin::new(1.0, 2.0, 0.2).unwrap();
    let spec = ModelSpec::logistic(4, 0.97).unwrap().with_margins(vec![g; 4]).unwrap();
    let data = SimJob { spec, n_samples: 200, seed: 7, mode: SimMode::ExactMaxStable }.run(0).unwrap();
    let t = ModelTemplate::logistic(4).with_margins(MarginTemplate::Common).unwrap();
    let ind = independence_mle(&data, &t, &quick()).unwrap();
    let pl = pairwise_mle(&data, &t, None, &quick()).unwrap();
    let se = hessian_se(|x| independence_log_lik(&t, &[0.5, x[0], x[1], x[2]], &data), &ind.x).unwrap();
    for (j, name) in ["mu", "sigma", "xi"].iter().enumerate() {
        let d = (pl.get(name).unwrap() - ind.x[j]).abs();
        assert!(d < 2.0 * se[j], "{name}: {} vs {} (se {})", pl.get(name).unwrap(), ind.x[j], se[j]);
    }
    assert!(pl.x[0] > 0.85);
}

/// Logistic data with partitions drawn from their exact conditional law.
fn logistic_with_partitions(k: usize, theta: f64, n: usize, seed: u64) -> Dataset {
    let data = logistic_data(k, theta, n, seed);
    let spec = ModelSpec::logistic(k, theta).unwrap();
    let all = enumerate_all(k).unwrap();
    let mut rng = stream(seed, "partitions", &[]);
    let parts: Vec<Partition> = data
        .obs
        .iter()
        .map(|z| {
            let w: Vec<f64> = all.iter().map(|t| spec.joint_log_likelihood(z, t).unwrap()).collect();
            let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p: Vec<f64> = w.iter().map(|v| (v - m).exp()).collect();
            let mut u = rng.random::<f64>() * p.iter().sum::<f64>();
            for (t, pi) in all.iter().zip(&p) {
                u -= pi;
                if u <= 0.0 {
                    return t.clone();
                }
            }
            all.last().unwrap().clone()
        })
        .collect();
    data.with_partitions(parts).unwrap()
}

#[test]
fn stephenson_tawn_self_consistent() {
    let theta = 0.6;
    let data = logistic_with_partitions(4, theta, 300, 11);
    let t = ModelTemplate::logistic(4);
    let est = stephenson_tawn_mle(&data, &t, None, &quick()).unwrap();
    let se = hessian_se(|x| joint_log_lik(&t.build(x).unwrap(), &data).unwrap(), &est.x).unwrap();
    assert!((est.x[0] - theta).abs() < 3.0 * se[0], "{} +- {}", est.x[0], se[0]);
    assert!(se[0] < 0.05);
}

#[test]
fn stephenson_tawn_near_independence_and_missing_partitions() {
    let data = logistic_data(5, 0.95, 200, 12);
    assert!(matches!(stephenson_tawn_mle(&data, &ModelTemplate::logistic(5), None, &quick()), Err(crate::Error::MissingPartitions)));
    let data = data.with_partitions(vec![Partition::singletons(5); 200]).unwrap();
    let est = stephenson_tawn_mle(&data, &ModelTemplate::logistic(5), None, &quick()).unwrap();
    assert!(est.x[0] > 0.8, "{est:?}");
}

#[test]
fn extremal_coefficient_statistics() {
    let n = 10_000;
    let mut data = logistic_data(2, 0.5, n, 21);
    let spec = ModelSpec::logistic(2, 0.5).unwrap();
    let r = extremal_coeff_test(&data, &spec, 0.1).unwrap();
    let tol = 3.0 / (n as f64).sqrt();
    assert!((r.pairs[0].t_inv - 2f64.powf(-0.5)).abs() < tol, "{r:?}");
    assert!((r.pairs[0].expected - 2f64.powf(-0.5)).abs() < 1e-12);
    assert!(!r.reject);
    for z in &mut data.obs {
        z[1] = z[0];
    }
    let r = extremal_coeff_test(&data, &spec, 0.1).unwrap();
    assert!((r.pairs[0].t_inv - 1.0).abs() < tol);
    assert!(r.reject);
    assert!(extremal_coeff_test(&data, &spec, 0.0).is_err());
}

#[test]
fn extremal_coefficient_false_alarms_within_chebyshev_bound() {
    let (k, n, reps) = (6, 10_000, 500);
    let spec = ModelSpec::logistic(k, 0.5).unwrap();
    let job = SimJob { spec: spec.clone(), n_samples: n, seed: 31, mode: SimMode::ExactMaxStable };
    let mut rejections = 0;
    let mut bound = 0.0;
    for rep in 0..reps {
        let r = extremal_coeff_test(&job.run(rep).unwrap(), &spec, 0.1).unwrap();
        rejections += r.reject as usize;
        bound = r.chebyshev_bound;
    }
    assert!((bound - 0.15).abs() < 1e-12);
    assert!((rejections as f64 / reps as f64) <= bound, "{rejections} rejections");
}

#[test]
fn bayes_factor_from_draws() {
    let mut draws = vec![0.0; 600];
    draws.extend(vec![0.1; 400]);
    let bf = trend_bayes_factor_from_draws(&draws, 0.5);
    assert_eq!((bf.n_null, bf.n_alt), (600, 400));
    match bf.bayes_factor {
        BayesFactor::Point { value, mc_se } => {
            assert!((value - 1.5).abs() < 1e-12);
            assert!(mc_se > 0.0);
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(trend_bayes_factor_from_draws(&[0.0; 50], 0.5).bayes_factor, BayesFactor::AtLeast { value } if value == 50.0));
    assert!(matches!(trend_bayes_factor_from_draws(&[0.2; 50], 0.25).bayes_factor, BayesFactor::AtMost { value } if (value - 3.0 / 50.0).abs() < 1e-12));
}

#[test]
fn bayes_factor_needs_trend_template() {
    let data = logistic_data(3, 0.5, 10, 1);
    assert!(bayes_factor_trend(&data, &ModelTemplate::logistic(3), &McmcConfig::default(), 1).is_err());
}
