use gprd_core::{EffectEstimate, Estimand, McmcConfig, ModelKind};
use gprd_sim::dgp::take_up_probability;
use gprd_sim::experiment::metrics_table;
use gprd_sim::metrics::summarize;
use gprd_sim::*;
use proptest::prelude::*;

#[test]
fn running_variable_has_the_shifted_beta_mean() {
    let spec = DgpSpec::standard(DgpId::Dgp3, Design::Sharp, 200_000);
    let obs = generate_observations(&spec, 1).unwrap();
    let mean = obs.xs.iter().sum::<f64>() / obs.xs.len() as f64;
    assert!((mean + 1.0 / 3.0).abs() < 0.01, "{mean}");
    assert!(obs.xs.iter().all(|&x| (-1.0..=1.0).contains(&x)));
}

#[test]
fn empirical_take_up_just_above_the_cutoff() {
    let mut taken = 0usize;
    let mut seen = 0usize;
    let mut seed = 0;
    while seen < 100_000 {
        let spec = DgpSpec::standard(DgpId::Dgp1, Design::Fuzzy, 500_000);
        let obs = generate_observations(&spec, seed).unwrap();
        let ds = obs.ds.unwrap();
        for (x, d) in obs.xs.iter().zip(&ds) {
            if (0.0..0.01).contains(x) {
                seen += 1;
                taken += (*d > 0.0) as usize;
            }
        }
        seed += 1;
    }
    let rate = taken as f64 / seen as f64;
    // Φ(1.28); the probability rises to Φ(1.29) across the bin
    assert!((rate - 0.8997).abs() < 0.01, "{rate}");
    assert!((take_up_probability(0.0, 0.0) - 0.8997).abs() < 1e-4);
}

fn one_sided_slopes(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let h = 1e-4;
    let below_at_zero = f(-1e-300);
    let above = (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
    let below = (3.0 * below_at_zero - 4.0 * f(-h) + f(-2.0 * h)) / (2.0 * h);
    (below, above)
}

#[test]
fn truths_match_the_mean_functions() {
    for id in DgpId::ALL {
        let jump = id.mean(0.0) - id.mean(-1e-300);
        assert!((jump - TruthTable::srd(id)).abs() < 1e-12, "{id:?} jump {jump}");
        let (below, above) = one_sided_slopes(|x| id.mean(x));
        assert!((above - below - TruthTable::srk(id)).abs() < 1e-5, "{id:?} kink {}", above - below);
    }
    let p = |x: f64| take_up_probability(x, 0.0);
    assert!((p(0.0) - p(-1e-300) - srdp_truth()).abs() < 1e-12);
    assert!((srdp_truth() - 0.7995).abs() < 1e-4);
    assert!((TruthTable::truth(DgpId::Dgp1, Estimand::Frd) - 0.1251).abs() < 1e-4);
}

#[test]
fn designs_and_seeds() {
    let sharp = DgpSpec::standard(DgpId::Dgp2, Design::Sharp, 300);
    let fuzzy = DgpSpec::standard(DgpId::Dgp2, Design::Fuzzy, 300);
    let a = generate_observations(&sharp, 17).unwrap();
    let b = generate_observations(&fuzzy, 17).unwrap();
    assert_eq!((a.xs.clone(), a.ys.clone()), (b.xs.clone(), b.ys.clone()));
    assert_eq!(generate_observations(&fuzzy, 17).unwrap(), b);
    assert_ne!(generate_observations(&sharp, 18).unwrap().xs, a.xs);
}

#[test]
fn replication_is_deterministic() {
    let spec = DgpSpec::standard(DgpId::Dgp1, Design::Fuzzy, 200);
    let cfg = ExperimentConfig {
        mcmc: McmcConfig {
            chains: 2,
            draws: 40,
            warmup: 40,
            ..McmcConfig::default()
        },
        ..ExperimentConfig::desk(3)
    };
    let ests = [
        EstimatorSpec::new(ModelKind::Gp1, Estimand::Srd),
        EstimatorSpec::new(ModelKind::Gp1, Estimand::Srdp),
        EstimatorSpec::new(ModelKind::Gp1, Estimand::Frd),
    ];
    let a = run_replication(&spec, &ests, &cfg, 0, 99);
    let b = run_replication(&spec, &ests, &cfg, 0, 99);
    assert_eq!(a, b);
    assert!(a.n_used > 0 && a.n_used < 200);
    assert_eq!(a.results.len(), 3);

    // the sharp run of the same design reuses the regression fit
    let sharp = DgpSpec::standard(DgpId::Dgp1, Design::Sharp, 200);
    let s = run_replication(&sharp, &ests[..1], &cfg, 0, 99);
    assert_eq!(s.results[0], a.results[0]);
}

fn estimate(tau: f64) -> EffectEstimate<f64> {
    EffectEstimate::new(Estimand::Srd, tau, 0.01, 100)
}

fn outcome(rep: usize, tau: Option<f64>) -> ReplicationOutcome {
    ReplicationOutcome {
        rep,
        seed: rep as u64,
        n_used: 100,
        results: vec![EstimatorResult {
            estimator: EstimatorSpec::new(ModelKind::Gp1, Estimand::Srd),
            outcome: tau.map(estimate).ok_or_else(|| "failed".to_string()),
        }],
    }
}

#[test]
fn failure_budget_is_ten_percent() {
    let spec = DgpSpec::standard(DgpId::Dgp1, Design::Sharp, 300);
    let est = [EstimatorSpec::new(ModelKind::Gp1, Estimand::Srd)];
    let mut outs: Vec<ReplicationOutcome> = (0..20).map(|r| outcome(r, Some(0.1))).collect();
    outs[0] = outcome(0, None);
    outs[1] = outcome(1, None);
    let rows = metrics_table(&spec, &est, &outs).unwrap();
    assert_eq!(rows[0].reps, 18);
    assert_eq!(rows[0].abs_bias, 0.0);
    outs[2] = outcome(2, None);
    assert!(matches!(
        metrics_table(&spec, &est, &outs),
        Err(SimError::TooManyFailures { failed: 3, reps: 20, .. })
    ));
}

#[test]
fn sharp_designs_reject_take_up_estimands() {
    let spec = DgpSpec::standard(DgpId::Dgp1, Design::Sharp, 300);
    let est = [EstimatorSpec::new(ModelKind::Gp1, Estimand::Frd)];
    assert!(matches!(
        run_experiment(&spec, &est, &ExperimentConfig::desk(0)),
        Err(SimError::InvalidSpec(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_keeps_exactly_the_near_points(
        xs in proptest::collection::vec(-1.0..1.0f64, 30..200),
        cutoff in -0.2..0.2f64,
    ) {
        let h = silverman_bandwidth(&xs);
        match silverman_window(&xs, cutoff) {
            Ok(kept) => {
                prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
                for (i, &x) in xs.iter().enumerate() {
                    prop_assert_eq!(kept.contains(&i), (x - cutoff).abs() <= 2.0 * h);
                }
            }
            Err(SimError::EmptyWindow { below, above }) => {
                prop_assert!(below < window::MIN_PER_SIDE || above < window::MIN_PER_SIDE);
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn metrics_are_consistent(
        taus in proptest::collection::vec(-1.0..1.0f64, 1..50),
        truth in -0.5..0.5f64,
    ) {
        let ests: Vec<_> = taus.iter().map(|&t| estimate(t)).collect();
        let (bias, rmse, coverage, length) = summarize(&ests, truth);
        prop_assert!(rmse + 1e-12 >= bias && bias >= 0.0);
        prop_assert!((0.0..=1.0).contains(&coverage));
        prop_assert!((length - 2.0 * 1.96 * 0.1).abs() < 1e-12);
    }
}
