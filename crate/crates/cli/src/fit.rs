//! Fit mode: one real-data sample in, effects report and prediction curve out.

use gprd_core::effects::two_term;
use gprd_core::mcmc::Diagnostics;
use gprd_core::{EffectEstimate, McmcConfig, PredictiveKind, RegressionFit, SplitSample};
use gprd_sim::{apply_window, effects_from_fits, fit_sample, EstimatorSpec, ExperimentConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{DesignArg, FitArgs};
use crate::error::{CliError, Result};
use crate::ingest::{filter_range, ingest_csv, Schema};
use crate::output::{csv_text, sig6};

const Z_95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub estimator: String,
    pub se: f64,
    #[serde(flatten)]
    pub estimate: EffectEstimate<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub model: String,
    pub side: String,
    pub params: Vec<String>,
    /// `None` where R̂ is undefined (constant draws).
    pub rhat: Vec<Option<f64>>,
    pub max_rhat: Option<f64>,
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub transitions: usize,
    pub step_sizes: Vec<f64>,
}

impl ChainDiagnostics {
    fn new(model: &str, side: &str, params: &[String], d: &Diagnostics) -> Self {
        let rhat: Vec<Option<f64>> = d.rhat.iter().map(|r| r.is_finite().then_some(*r)).collect();
        Self {
            model: model.into(),
            side: side.into(),
            params: params.to_vec(),
            max_rhat: rhat.iter().flatten().copied().reduce(f64::max),
            rhat,
            acceptance_rate: d.acceptance_rate,
            divergences: d.divergences,
            transitions: d.transitions,
            step_sizes: d.step_sizes.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub design: String,
    pub cutoff: f64,
    pub window: bool,
    pub n_below: usize,
    pub n_above: usize,
    pub mcmc: McmcConfig,
    pub estimates: Vec<EstimateEntry>,
    pub diagnostics: Vec<ChainDiagnostics>,
}

/// Posterior mean of the regression function and a pointwise 95% band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub model: String,
    pub side: String,
    pub x: f64,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

pub struct FitOutput {
    pub report: FitReport,
    pub curve: Vec<CurvePoint>,
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Level predictions over `xs` for every draw, summarized as `(x, mean,
/// variance)` with the two-term variance. Points where every draw failed are
/// skipped.
pub fn prediction_curve(fit: &RegressionFit<f64>, xs: &[f64]) -> Vec<(f64, f64, f64)> {
    let per_draw: Vec<Vec<Option<(f64, f64)>>> = (0..fit.len())
        .into_par_iter()
        .map(|i| match fit.predictor(i) {
            Ok(p) => xs
                .iter()
                .map(|&x| p.predict(x, PredictiveKind::Level).ok().map(|s| (s.mean, s.variance)))
                .collect(),
            Err(_) => vec![None; xs.len()],
        })
        .collect();
    xs.iter()
        .enumerate()
        .filter_map(|(j, &x)| {
            let ok: Vec<(f64, f64)> = per_draw.iter().filter_map(|d| d[j]).collect();
            two_term(&ok).map(|(m, v)| (x, m, v))
        })
        .collect()
}

pub fn run_fit(args: &FitArgs) -> Result<FitOutput> {
    let common = &args.common;
    let estimators = common.estimators()?;
    if args.grid < 2 {
        return Err(CliError::Usage("--grid needs at least two points".into()));
    }
    let fuzzy = common.design == DesignArg::Fuzzy;
    let mcmc = common.mcmc(McmcConfig::default());
    mcmc.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let schema = Schema {
        y: args.y_col.clone(),
        x: args.x_col.clone(),
        d: fuzzy.then(|| args.d_col.clone()),
    };
    let records = filter_range(ingest_csv(&args.input, &schema)?, args.xmin, args.xmax);
    if records.is_empty() {
        return Err(CliError::EmptyInput);
    }
    let xs: Vec<f64> = records.iter().map(|r| r.x).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.y).collect();
    let ds: Option<Vec<f64>> = fuzzy.then(|| records.iter().map(|r| r.d.expect("take-up column read")).collect());
    let mut split = SplitSample::from_observations(&xs, &ys, ds.as_deref(), args.cutoff)?;
    if common.window_enabled() {
        split = apply_window(&split)?;
    }

    let cfg = ExperimentConfig {
        reps: 1,
        mcmc: mcmc.clone(),
        priors: common.priors()?,
        window: common.window_enabled(),
        seed: common.seed,
    };
    let fits = fit_sample(&split, &estimators, &cfg, common.seed);

    let mut diagnostics = Vec::new();
    let mut curve = Vec::new();
    for (kind, pair) in &fits.regression {
        let (below, above) = pair.as_ref().map_err(|e| CliError::Core(e.clone()))?;
        let c = split.cutoff;
        let lo = split.below.xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = split.above.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (side, fit, xs) in [
            ("below", below, grid(lo, c, args.grid)),
            ("above", above, grid(c, hi, args.grid)),
        ] {
            diagnostics.push(ChainDiagnostics::new(
                kind.label(),
                side,
                fit.posterior.param_names(),
                &fit.posterior.diagnostics,
            ));
            curve.extend(prediction_curve(fit, &xs).into_iter().map(|(x, mean, v)| {
                let half = Z_95 * v.max(0.0).sqrt();
                CurvePoint {
                    model: kind.label().into(),
                    side: side.into(),
                    x,
                    mean,
                    lower: mean - half,
                    upper: mean + half,
                }
            }));
        }
    }
    if let Some(pair) = &fits.take_up {
        let (below, above) = pair.as_ref().map_err(|e| CliError::Core(e.clone()))?;
        for (side, fit) in [("below", below), ("above", above)] {
            diagnostics.push(ChainDiagnostics::new(
                "GPC",
                side,
                fit.posterior.param_names(),
                &fit.posterior.diagnostics,
            ));
        }
    }

    let mut estimates = Vec::new();
    for (est, result) in estimators.iter().zip(effects_from_fits(&fits, &estimators)) {
        let estimate = result?;
        estimates.push(entry(est, estimate));
    }

    Ok(FitOutput {
        report: FitReport {
            design: if fuzzy { "fuzzy" } else { "sharp" }.into(),
            cutoff: split.cutoff,
            window: common.window_enabled(),
            n_below: split.below.len(),
            n_above: split.above.len(),
            mcmc,
            estimates,
            diagnostics,
        },
        curve,
    })
}

fn entry(est: &EstimatorSpec, estimate: EffectEstimate<f64>) -> EstimateEntry {
    EstimateEntry {
        estimator: est.label().into(),
        se: estimate.se(),
        estimate,
    }
}

pub fn report_csv(report: &FitReport) -> Result<String> {
    let header = [
        "estimator", "estimand", "tau_hat", "se", "v_hat", "ci_low", "ci_high", "draws_used", "n_below", "n_above",
    ];
    let rows = report.estimates.iter().map(|e| {
        let s = &e.estimate;
        vec![
            e.estimator.clone(),
            s.kind.label().into(),
            sig6(s.tau_hat),
            sig6(e.se),
            sig6(s.v_hat),
            sig6(s.ci_low),
            sig6(s.ci_high),
            s.draws_used.to_string(),
            report.n_below.to_string(),
            report.n_above.to_string(),
        ]
    });
    csv_text(&header, rows)
}

pub fn curve_csv(curve: &[CurvePoint]) -> Result<String> {
    let rows = curve.iter().map(|p| {
        vec![
            p.model.clone(),
            p.side.clone(),
            sig6(p.x),
            sig6(p.mean),
            sig6(p.lower),
            sig6(p.upper),
        ]
    });
    csv_text(&["model", "side", "x", "mean", "lower", "upper"], rows)
}
