//! Simulate mode: a Monte Carlo study on one simulated design.

use gprd_sim::{run_experiment, DgpSpec, ExperimentConfig, ExperimentReport, MetricsRow};
use serde::{Deserialize, Serialize};

use crate::args::{Preset, SimulateArgs};
use crate::error::{CliError, Result};
use crate::output::{csv_text, sig6};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub spec: DgpSpec,
    pub config: ExperimentConfig,
    pub rows: Vec<MetricsRow>,
}

pub fn config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let c = &args.common;
    let base = match args.preset {
        Preset::Desk => ExperimentConfig::desk(c.seed),
        Preset::Full => ExperimentConfig::full(c.seed),
    };
    Ok(ExperimentConfig {
        reps: args.reps.unwrap_or(base.reps),
        mcmc: c.mcmc(base.mcmc.clone()),
        priors: c.priors()?,
        window: c.window_enabled(),
        ..base
    })
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(SimulateReport, ExperimentReport)> {
    let estimators = args.common.estimators()?;
    let cfg = config(args)?;
    cfg.mcmc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = DgpSpec::standard(args.dgp.into(), args.common.design.into(), args.n);
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let full = run_experiment(&spec, &estimators, &cfg)?;
    let report = SimulateReport {
        spec,
        config: cfg,
        rows: full.rows.clone(),
    };
    Ok((report, full))
}

pub const METRICS_HEADER: [&str; 8] = [
    "estimator",
    "estimand",
    "abs_bias",
    "rmse",
    "coverage",
    "interval_length",
    "reps",
    "n",
];

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    csv_text(
        &METRICS_HEADER,
        rows.iter().map(|r| {
            vec![
                r.estimator.clone(),
                r.estimand.clone(),
                sig6(r.abs_bias),
                sig6(r.rmse),
                sig6(r.coverage),
                sig6(r.interval_length),
                r.reps.to_string(),
                r.n.to_string(),
            ]
        }),
    )
}
