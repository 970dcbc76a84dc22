//! Replication loop: simulate, window, fit, estimate, summarize.

use std::collections::BTreeMap;

use gprd_core::effects::{combine_take_up, SharpEffect};
use gprd_core::ClassificationFit;
use gprd_core::mcmc::derive_seed;
use gprd_core::{
    estimate_frd, estimate_frk, estimate_srd, estimate_srk, fit_classification, fit_regression,
    EffectEstimate, Estimand, McmcConfig, ModelKind, PriorSpec, RegressionFit, SplitSample,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{generate_dataset, DgpSpec};
use crate::error::{Result, SimError};
use crate::metrics::MetricsRow;
use crate::truth::TruthTable;
use crate::window::apply_window;

/// Largest fraction of replications an estimator may lose before the
/// experiment as a whole fails.
pub const MAX_FAILED_REP_FRACTION: f64 = 0.1;

/// An estimand computed with a given regression model. The take-up jump does
/// not use the regression model; it is labelled `GPC`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub model: ModelKind,
    pub estimand: Estimand,
}

impl EstimatorSpec {
    pub fn new(model: ModelKind, estimand: Estimand) -> Self {
        Self { model, estimand }
    }

    pub fn label(&self) -> &'static str {
        if self.estimand == Estimand::Srdp {
            "GPC"
        } else {
            self.model.label()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reps: usize,
    pub mcmc: McmcConfig,
    pub priors: PriorSpec<f64>,
    pub window: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 50 replications of two 500-draw chains.
    pub fn desk(seed: u64) -> Self {
        Self {
            reps: 50,
            mcmc: McmcConfig::desk(),
            priors: PriorSpec::default(),
            window: true,
            seed,
        }
    }

    /// Scale of the reference study: 300 replications of four 1000-draw chains.
    pub fn full(seed: u64) -> Self {
        Self {
            reps: 300,
            mcmc: McmcConfig::default(),
            ..Self::desk(seed)
        }
    }
}

/// Result of one estimator in one replication; failures keep their message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub estimator: EstimatorSpec,
    pub outcome: std::result::Result<EffectEstimate<f64>, String>,
}

/// Everything one replication produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub seed: u64,
    /// Observations used after windowing, both sides together.
    pub n_used: usize,
    pub results: Vec<EstimatorResult>,
}

impl ReplicationOutcome {
    pub fn estimate(&self, est: &EstimatorSpec) -> Option<&EffectEstimate<f64>> {
        self.results
            .iter()
            .find(|r| r.estimator == *est)
            .and_then(|r| r.outcome.as_ref().ok())
    }
}

/// Runs `f(rep, seed)` for every replication in parallel, with per-replication
/// seeds derived from `seed`. Results come back in replication order.
pub fn run_replications<R, F>(reps: usize, seed: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, u64) -> R + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| f(r, derive_seed(seed, r as u64)))
        .collect()
}

// sub-seed streams of one replication, fixed per (model, side) so that sharp
// and fuzzy runs of the same design share their regression fits
const STREAM_GP1: u64 = 10;
const STREAM_GP2: u64 = 12;
const STREAM_TAKE_UP: u64 = 14;

fn model_stream(kind: ModelKind) -> u64 {
    match kind {
        ModelKind::Gp1 => STREAM_GP1,
        ModelKind::Gp2 => STREAM_GP2,
    }
}

/// Posterior fits of one prepared sample, both sides of the cutoff.
pub struct SampleFits {
    pub cutoff: f64,
    pub regression: BTreeMap<ModelKind, gprd_core::Result<(RegressionFit<f64>, RegressionFit<f64>)>>,
    pub take_up: Option<gprd_core::Result<(ClassificationFit<f64>, ClassificationFit<f64>)>>,
}

fn fit_pair(
    split: &SplitSample<f64>,
    kind: ModelKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> gprd_core::Result<(RegressionFit<f64>, RegressionFit<f64>)> {
    let stream = model_stream(kind);
    let mcmc = |k: u64| cfg.mcmc.clone().with_seed(derive_seed(seed, stream + k));
    let below = fit_regression(&split.below.regression()?, kind, &cfg.priors, &mcmc(0))?;
    let above = fit_regression(&split.above.regression()?, kind, &cfg.priors, &mcmc(1))?;
    Ok((below, above))
}

fn fit_take_up(
    split: &SplitSample<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> gprd_core::Result<(ClassificationFit<f64>, ClassificationFit<f64>)> {
    let mcmc = |k: u64| cfg.mcmc.clone().with_seed(derive_seed(seed, STREAM_TAKE_UP + k));
    let below = fit_classification(&split.below.classification()?, &cfg.priors, &mcmc(0))?;
    let above = fit_classification(&split.above.classification()?, &cfg.priors, &mcmc(1))?;
    Ok((below, above))
}

/// Fits every model the requested estimators need. Sub-seeds depend only on
/// `seed` and the (model, side) pair.
pub fn fit_sample(
    split: &SplitSample<f64>,
    estimators: &[EstimatorSpec],
    cfg: &ExperimentConfig,
    seed: u64,
) -> SampleFits {
    let take_up = estimators
        .iter()
        .any(|e| matches!(e.estimand, Estimand::Srdp | Estimand::Frd | Estimand::Frk))
        .then(|| fit_take_up(split, cfg, seed));
    let mut regression = BTreeMap::new();
    for kind in [ModelKind::Gp1, ModelKind::Gp2] {
        if estimators.iter().any(|e| e.model == kind && e.estimand != Estimand::Srdp) {
            regression.insert(kind, fit_pair(split, kind, cfg, seed));
        }
    }
    SampleFits {
        cutoff: split.cutoff,
        regression,
        take_up,
    }
}

/// Effect estimates from already fitted models, in the order requested.
pub fn effects_from_fits(
    fits: &SampleFits,
    estimators: &[EstimatorSpec],
) -> Vec<gprd_core::Result<EffectEstimate<f64>>> {
    let c = fits.cutoff;
    let srdp = fits.take_up.as_ref().map(|r| {
        r.as_ref()
            .map_err(Clone::clone)
            .and_then(|(b, a)| combine_take_up(&b.predict(c)?, &a.predict(c)?))
    });

    let mut sharp: BTreeMap<(ModelKind, Estimand), gprd_core::Result<SharpEffect<f64>>> = BTreeMap::new();
    let mut sharp_effect = |kind: ModelKind, estimand: Estimand| {
        sharp
            .entry((kind, estimand))
            .or_insert_with(|| {
                let pair = fits
                    .regression
                    .get(&kind)
                    .ok_or_else(|| gprd_core::Error::InvalidInput(format!("{} was not fitted", kind.label())))?;
                let (b, a) = pair.as_ref().map_err(Clone::clone)?;
                if estimand == Estimand::Srd {
                    estimate_srd(b, a, c)
                } else {
                    estimate_srk(b, a, c)
                }
            })
            .clone()
    };
    let take_up = || {
        srdp.clone()
            .unwrap_or_else(|| Err(gprd_core::Error::InvalidInput("take-up model was not fitted".into())))
    };

    estimators
        .iter()
        .map(|est| {
            match est.estimand {
                Estimand::Srd | Estimand::Srk => sharp_effect(est.model, est.estimand).map(|s| s.estimate),
                Estimand::Srdp => take_up().map(|s| s.estimate),
                Estimand::Frd => sharp_effect(est.model, Estimand::Srd)
                    .and_then(|n| take_up().and_then(|d| estimate_frd(&n, &d))),
                Estimand::Frk => sharp_effect(est.model, Estimand::Srk)
                    .and_then(|n| take_up().and_then(|d| estimate_frk(&n, &d))),
            }
        })
        .collect()
}

pub fn estimates_from_fits(fits: &SampleFits, estimators: &[EstimatorSpec]) -> Vec<EstimatorResult> {
    effects_from_fits(fits, estimators)
        .into_iter()
        .zip(estimators)
        .map(|(r, est)| EstimatorResult {
            estimator: *est,
            outcome: r.map_err(|e| e.to_string()),
        })
        .collect()
}

/// Estimates every requested estimator on one prepared sample.
pub fn estimate_all(
    split: &SplitSample<f64>,
    estimators: &[EstimatorSpec],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Vec<EstimatorResult> {
    estimates_from_fits(&fit_sample(split, estimators, cfg, seed), estimators)
}

/// Simulates, windows and estimates one replication.
pub fn run_replication(
    spec: &DgpSpec,
    estimators: &[EstimatorSpec],
    cfg: &ExperimentConfig,
    rep: usize,
    seed: u64,
) -> ReplicationOutcome {
    let prepared = generate_dataset(spec, seed).and_then(|s| if cfg.window { apply_window(&s) } else { Ok(s) });
    match prepared {
        Ok(split) => ReplicationOutcome {
            rep,
            seed,
            n_used: split.len(),
            results: estimate_all(&split, estimators, cfg, seed),
        },
        Err(e) => ReplicationOutcome {
            rep,
            seed,
            n_used: 0,
            results: estimators
                .iter()
                .map(|est| EstimatorResult {
                    estimator: *est,
                    outcome: Err(e.to_string()),
                })
                .collect(),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: DgpSpec,
    pub rows: Vec<MetricsRow>,
    pub replications: Vec<ReplicationOutcome>,
}

impl ExperimentReport {
    pub fn row(&self, est: &EstimatorSpec) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == est.label() && r.estimand == est.estimand.label())
    }

    /// Successful estimates of one estimator, in replication order.
    pub fn estimates(&self, est: &EstimatorSpec) -> Vec<EffectEstimate<f64>> {
        self.replications.iter().filter_map(|o| o.estimate(est)).cloned().collect()
    }
}

/// Metrics rows for each estimator over the given outcomes. Fails if an
/// estimator lost more than 10% of the replications.
pub fn metrics_table(
    spec: &DgpSpec,
    estimators: &[EstimatorSpec],
    outcomes: &[ReplicationOutcome],
) -> Result<Vec<MetricsRow>> {
    let reps = outcomes.len();
    estimators
        .iter()
        .map(|est| {
            let ok: Vec<EffectEstimate<f64>> = outcomes.iter().filter_map(|o| o.estimate(est)).cloned().collect();
            let failed = reps - ok.len();
            if ok.is_empty() || failed as f64 > MAX_FAILED_REP_FRACTION * reps as f64 {
                return Err(SimError::TooManyFailures {
                    estimator: format!("{} {}", est.label(), est.estimand),
                    failed,
                    reps,
                });
            }
            Ok(MetricsRow::from_estimates(
                est.label(),
                est.estimand.label(),
                &ok,
                TruthTable::truth(spec.id, est.estimand),
                spec.n,
            ))
        })
        .collect()
}

pub fn run_experiment(
    spec: &DgpSpec,
    estimators: &[EstimatorSpec],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    spec.validate()?;
    if cfg.reps == 0 {
        return Err(SimError::InvalidSpec("at least one replication is required".into()));
    }
    if estimators.is_empty() {
        return Err(SimError::InvalidSpec("no estimators requested".into()));
    }
    cfg.priors.validate()?;
    cfg.mcmc.validate()?;
    if spec.design == crate::dgp::Design::Sharp && estimators.iter().any(|e| e.estimand != Estimand::Srd && e.estimand != Estimand::Srk) {
        return Err(SimError::InvalidSpec("take-up estimands need the fuzzy design".into()));
    }
    let replications = run_replications(cfg.reps, cfg.seed, |rep, seed| run_replication(spec, estimators, cfg, rep, seed));
    let rows = metrics_table(spec, estimators, &replications)?;
    Ok(ExperimentReport {
        spec: *spec,
        rows,
        replications,
    })
}
