use super::chain::{conditional, mh_component};
use super::*;
use crate::models::{HuslerReissParams, ModelSpec};
use crate::numerics::stats::ks_test;
use crate::partition::{enumerate_all, Partition};
use crate::rng::stream;
use crate::simulate::{Dataset, SimJob, SimMode};
use rand::RngExt;
use std::collections::HashMap;

/// Brute-force conditional: all partitions agreeing with `tau` off `i`,
/// weighted by the joint likelihood.
fn brute_conditional(spec: &ModelSpec, z: &[f64], tau: &Partition, i: usize) -> HashMap<Partition, f64> {
    let all = enumerate_all(tau.k()).unwrap();
    let rest = tau.restriction(i).unwrap();
    let mut out: HashMap<Partition, f64> = HashMap::new();
    for t in all {
        if t.restriction(i).unwrap() == rest {
            out.insert(t.clone(), spec.joint_log_likelihood(z, &t).unwrap().exp());
        }
    }
    let tot: f64 = out.values().sum();
    out.values_mut().for_each(|v| *v /= tot);
    out
}

fn logistic_data(k: usize, theta: f64, n: usize, seed: u64) -> Dataset {
    SimJob { spec: ModelSpec::logistic(k, theta).unwrap(), n_samples: n, seed, mode: SimMode::ExactMaxStable }.run(0).unwrap()
}

#[test]
fn conditional_matches_enumeration() {
    let specs = [
        (ModelSpec::logistic(4, 0.6).unwrap(), vec![0.7, 2.0, 1.1, 5.0]),
        (ModelSpec::husler_reiss(HuslerReissParams::brown_resnick(vec![vec![0.0], vec![1.0], vec![3.0]], 2.0, 1.0).unwrap()).unwrap(), vec![0.5, 1.5, 0.9]),
    ];
    for (spec, z) in &specs {
        for tau in enumerate_all(spec.k).unwrap() {
            for i in 0..spec.k {
                let got = gibbs_conditional(spec, z, &tau, i).unwrap();
                let want = brute_conditional(spec, z, &tau, i);
                assert_eq!(got.len(), want.len());
                for (p, pr) in got {
                    assert!((pr - want[&p]).abs() < 1e-12, "{tau} i={i} {p}");
                }
            }
        }
    }
}

#[test]
fn conditional_examples() {
    // k = 2 logistic: w12 / (w1 w2) = (1 - theta) / theta * S^-theta, so the
    // singleton mass is 1 / (1 + (1 - theta) / theta * S^-theta) -> theta
    let theta: f64 = 0.9;
    let spec = ModelSpec::logistic(2, theta).unwrap();
    let z = [1.0, 1000.0];
    let c = gibbs_conditional(&spec, &z, &Partition::one_block(2), 0).unwrap();
    let single = c.iter().find(|(p, _)| *p == Partition::singletons(2)).unwrap().1;
    let s: f64 = z.iter().map(|v: &f64| v.powf(-1.0 / theta)).sum();
    let expect = 1.0 / (1.0 + (1.0 - theta) / theta * s.powf(-theta));
    assert!((single - expect).abs() < 1e-12, "{single} vs {expect}");
    assert!(single > 0.9);
    // single block: two candidates
    let spec = ModelSpec::logistic(3, 0.4).unwrap();
    let c = gibbs_conditional(&spec, &[1.0, 2.0, 0.5], &Partition::one_block(3), 1).unwrap();
    assert_eq!(c.len(), 2);
    assert!((c.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-14);
    // non-finite weights everywhere is an error, not a silent fallback
    assert!(conditional(&[0b11], 0, |_| Ok(f64::NEG_INFINITY)).is_err());
}

#[test]
fn gibbs_leaves_partition_posterior_invariant() {
    let spec = ModelSpec::logistic(4, 0.6).unwrap();
    let z = vec![0.8, 1.7, 1.2, 3.0];
    let data = Dataset::new(4, vec![z.clone()]).unwrap();
    let template = ModelTemplate::logistic(4);
    let mut state = ChainState::new(&template, &data, vec![0.6], vec![Partition::singletons(4)]).unwrap();
    let all = enumerate_all(4).unwrap();
    let lik: Vec<f64> = all.iter().map(|t| spec.joint_log_likelihood(&z, t).unwrap().exp()).collect();
    let tot: f64 = lik.iter().sum();
    let mut rng = stream(3, "gibbs", &[]);
    let mut counts: HashMap<Partition, usize> = HashMap::new();
    let sweeps = 100_000;
    for _ in 0..sweeps {
        let i = rng.random_range(0..4);
        state.gibbs_partition_step(0, i, &mut rng).unwrap();
        *counts.entry(state.partitions[0].clone()).or_default() += 1;
    }
    let tv: f64 = all.iter().zip(&lik).map(|(t, l)| (counts.get(t).copied().unwrap_or(0) as f64 / sweeps as f64 - l / tot).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "TV {tv}");
}

fn info(prior: Prior, transform: Transform) -> ParamInfo {
    ParamInfo { name: "x".into(), transform, prior, init: 0.5 }
}

#[test]
fn mh_kernel_edge_cases() {
    let mut rng = stream(4, "mh", &[]);
    let p = info(Prior::uniform(0.0, 1.0), Transform::Logit { lo: 0.0, hi: 1.0 });
    // zero step: proposal equals the current state
    for _ in 0..100 {
        assert!(mh_component(&[0.3], 0, &p, 0.0, 0.5, -1.0, &mut rng, |_| Ok(Some(-1.0))).unwrap());
    }
    // identity steps leaving (0, 1) are always rejected and never evaluated
    let p = info(Prior::uniform(0.0, 1.0), Transform::Identity);
    for _ in 0..200 {
        let acc = mh_component(&[0.99], 0, &p, 5.0, 0.5, 0.0, &mut rng, |y| {
            assert!(y[0] > 0.0 && y[0] < 1.0);
            Ok(Some(0.0))
        })
        .unwrap();
        let _ = acc;
    }
    // a likelihood of None rejects
    assert!(!mh_component(&[0.5], 0, &p, 0.1, 0.5, 0.0, &mut rng, |_| Ok(None)).unwrap());
}

#[test]
fn mh_kernel_on_discretized_target() {
    // three cells of (0, 3) with masses 0.2, 0.5, 0.3
    let mass: [f64; 3] = [0.2, 0.5, 0.3];
    let p = info(Prior::uniform(0.0, 3.0), Transform::Logit { lo: 0.0, hi: 3.0 });
    let ll = |x: f64| mass[(x.floor() as usize).min(2)].ln();
    let mut rng = stream(5, "toy", &[]);
    let mut x = 1.5;
    let mut counts = [0usize; 3];
    let n = 100_000;
    for _ in 0..n {
        let cur = ll(x);
        let mut prop = x;
        if mh_component(&[x], 0, &p, 1.0, 0.5, cur, &mut rng, |y| {
            prop = y[0];
            Ok(Some(ll(y[0])))
        })
        .unwrap()
        {
            x = prop;
        }
        counts[(x.floor() as usize).min(2)] += 1;
    }
    let tv: f64 = counts.iter().zip(mass).map(|(&c, m)| (c as f64 / n as f64 - m).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn prior_only_chain_samples_the_prior() {
    let data = logistic_data(3, 0.5, 5, 1);
    let template = ModelTemplate::logistic(3).with_prior("theta", Prior::new(Dist::Beta { a: 2.0, b: 5.0 })).unwrap();
    let cfg = McmcConfig { n_iter: 40_000, burn_in: 1000, likelihood: LikelihoodKind::Off, init_step: 1.0, ..Default::default() };
    let t = run_chain(&data, &template, &cfg, 7).unwrap();
    // thin to reduce autocorrelation before the KS test
    let x: Vec<f64> = t.post_burn(0).into_iter().step_by(20).collect();
    let cdf = |v: f64| statrs::function::beta::beta_reg(2.0, 5.0, v.clamp(0.0, 1.0));
    let (_, p) = ks_test(&x, cdf);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn spike_and_slab_prior_only() {
    let data = logistic_data(3, 0.5, 5, 2);
    let template = ModelTemplate::logistic(3).with_margins(MarginTemplate::Trend).unwrap();
    let cfg = McmcConfig {
        n_iter: 40_000,
        burn_in: 1000,
        likelihood: LikelihoodKind::Off,
        init: Some(vec![0.5, 1.0, 1.0, 0.1, 0.0]),
        ..Default::default()
    };
    let t = run_chain(&data, &template, &cfg, 8).unwrap();
    let b = t.post_burn(4);
    let p0 = b.iter().filter(|&&v| v == 0.0).count() as f64 / b.len() as f64;
    assert!((p0 - 0.5).abs() < 0.03, "P(beta = 0) = {p0}");
    // slab part: N(0, 0.5^2)
    let slab: Vec<f64> = b.iter().copied().filter(|&v| v != 0.0).step_by(10).collect();
    let (_, p) = ks_test(&slab, |v| crate::numerics::norm_cdf(v / 0.5));
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn spike_and_slab_step_adapts_to_the_slab() {
    // data without a trend: the chain must still visit the slab, and the
    // adapted step must reflect the posterior scale rather than a clamp
    let margins = vec![crate::models::GevMargin::new(1.0, 1.0, 0.2).unwrap(); 5];
    let spec = ModelSpec::logistic(5, 0.5).unwrap().with_margins(margins).unwrap();
    let data = SimJob { spec, n_samples: 15, seed: 9, mode: SimMode::ExactMaxStable }.run(0).unwrap();
    let template = ModelTemplate::logistic(5).with_margins(MarginTemplate::Trend).unwrap();
    let cfg = McmcConfig { n_iter: 6000, burn_in: 2000, ..Default::default() };
    let t = run_chain(&data, &template, &cfg, 10).unwrap();
    let step = t.final_steps[4];
    assert!(step > 1e-3 && step < 0.3, "beta step {step}");
    let b = t.post_burn(4);
    let zeros = b.iter().filter(|&&v| v == 0.0).count();
    assert!(zeros > 0 && zeros < b.len(), "{zeros} of {} draws at the atom", b.len());
}

#[test]
fn caches_stay_coherent() {
    let data = logistic_data(5, 0.5, 20, 3);
    let template = ModelTemplate::logistic(5).with_margins(MarginTemplate::Common).unwrap();
    let mut state = ChainState::new(&template, &data, vec![0.5, 1.0, 1.0, 1.0], vec![Partition::singletons(5); 20]).unwrap();
    let params = template.params();
    let cfg = McmcConfig::default();
    let mut rng = stream(9, "cache", &[]);
    let mut accepted = 0;
    for step in 0..1000 {
        if step % 10 == 0 {
            let p = step / 10 % params.len();
            accepted += state.mh_parameter_step(p, &params[p], 0.05, &cfg, &mut rng).unwrap() as usize;
        }
        let l = rng.random_range(0..20);
        let i = rng.random_range(0..5);
        state.gibbs_partition_step(l, i, &mut rng).unwrap();
    }
    assert!(accepted > 5);
    let a = state.log_likelihood().unwrap();
    let b = state.log_likelihood_from_scratch().unwrap();
    assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn posterior_concentrates_near_truth() {
    let data = logistic_data(10, 0.7, 100, 4);
    let template = ModelTemplate::logistic(10);
    let t = run_chain(&data, &template, &McmcConfig::default(), 11).unwrap();
    let s = posterior_summary(&t, 0.95).unwrap();
    let th = s.param("theta").unwrap();
    assert!((th.median - 0.7).abs() < 3.0 * th.sd, "{} +- {}", th.median, th.sd);
    assert!(s.mean_blocks.median >= 1.0 && s.mean_blocks.median <= 10.0);
    assert!(t.mean_blocks.iter().all(|&m| (1.0..=10.0).contains(&m)));
    assert!(t.acceptance_rates[0] > 0.1 && t.acceptance_rates[0] < 0.6);
}

#[test]
fn initial_partitions_do_not_matter() {
    let data = logistic_data(6, 0.4, 50, 5);
    let template = ModelTemplate::logistic(6);
    let base = McmcConfig { n_iter: 3000, burn_in: 500, ..Default::default() };
    let a = run_chain(&data, &template, &base, 1).unwrap();
    let b = run_chain(&data, &template, &McmcConfig { init_partitions: InitPartitions::OneBlock, ..base }, 2).unwrap();
    let (sa, sb) = (posterior_summary(&a, 0.95).unwrap(), posterior_summary(&b, 0.95).unwrap());
    let (ma, mb) = (sa.param("theta").unwrap(), sb.param("theta").unwrap());
    let se = (ma.median_se.powi(2) + mb.median_se.powi(2)).sqrt();
    assert!((ma.median - mb.median).abs() < 2.0 * se.max(0.002), "{} vs {} (se {se})", ma.median, mb.median);
}

#[test]
fn trace_round_trip_and_determinism() {
    let data = logistic_data(3, 0.5, 10, 6);
    let template = ModelTemplate::logistic(3);
    let cfg = McmcConfig { n_iter: 50, burn_in: 10, ..Default::default() };
    let a = run_chain(&data, &template, &cfg, 3).unwrap();
    let b = run_chain(&data, &template, &cfg, 3).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.config_hash, b.config_hash);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    a.write(&path).unwrap();
    let back = Trace::read(&path).unwrap();
    assert_eq!(back.samples, a.samples);
    assert_eq!(back.mean_blocks, a.mean_blocks);
    assert_eq!(back.burn_in, 10);
    std::fs::write(&path, "iter,theta,mean_blocks,accepted\n0,x,1,0\n").unwrap();
    assert!(Trace::read(&path).is_err());
    assert!(run_chain(&data, &template, &McmcConfig { n_iter: 10, burn_in: 10, ..Default::default() }, 1).is_err());
}
