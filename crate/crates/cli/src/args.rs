use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gprd_core::{Estimand, McmcConfig, ModelKind, Priors};
use gprd_sim::{DgpId, Design, EstimatorSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "gprd", version, about = "Gaussian-process regression discontinuity and kink estimates")]
pub struct Cli {
    /// Worker threads for chains and replications (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate effects on a CSV sample.
    Fit(FitArgs),
    /// Run a Monte Carlo study on a simulated design.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Sharp,
    Fuzzy,
}

impl From<DesignArg> for Design {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Sharp => Design::Sharp,
            DesignArg::Fuzzy => Design::Fuzzy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum EstimandArg {
    /// Jump in the outcome level (divided by the take-up jump when fuzzy).
    Rd,
    /// Jump in the outcome slope (divided by the take-up jump when fuzzy).
    Rk,
    /// Jump in the take-up probability.
    Rdp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum ModelArg {
    Gp1,
    Gp2,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gp1 => ModelKind::Gp1,
            ModelArg::Gp2 => ModelKind::Gp2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DgpArg {
    Dgp1,
    Dgp2,
    Dgp3,
}

impl From<DgpArg> for DgpId {
    fn from(d: DgpArg) -> Self {
        match d {
            DgpArg::Dgp1 => DgpId::Dgp1,
            DgpArg::Dgp2 => DgpId::Dgp2,
            DgpArg::Dgp3 => DgpId::Dgp3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 50 replications of two 500-draw chains.
    Desk,
    /// 300 replications of four 1000-draw chains.
    Full,
}

#[derive(Clone, Debug, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "sharp")]
    pub design: DesignArg,
    /// Repeatable; defaults to `rd`.
    #[arg(long = "estimand", value_enum)]
    pub estimands: Vec<EstimandArg>,
    /// Repeatable; defaults to `gp1`.
    #[arg(long = "model", value_enum)]
    pub models: Vec<ModelArg>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Post-warmup draws per chain.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prior sd of the take-up latent's mean-basis coefficients.
    #[arg(long, default_value_t = 1.0)]
    pub take_up_coef_scale: f64,
    /// Keep only points within two rule-of-thumb bandwidths of the cutoff.
    #[arg(long, overrides_with = "no_window")]
    pub window: bool,
    #[arg(long, overrides_with = "window")]
    pub no_window: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub cutoff: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub xmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xmax: Option<f64>,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    #[arg(long, default_value = "x")]
    pub x_col: String,
    #[arg(long, default_value = "d")]
    pub d_col: String,
    /// Prediction-curve CSV; defaults to `<out stem>_curve.csv` when `--out` is set.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Grid points per side of the prediction curve.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dgp: DgpArg,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    /// Replications; defaults to the preset's count.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    #[command(flatten)]
    pub common: Common,
}

impl Common {
    pub fn window_enabled(&self) -> bool {
        !self.no_window
    }

    pub fn priors(&self) -> Result<Priors> {
        let priors = Priors { latent_coef_scale: self.take_up_coef_scale, ..Priors::default() };
        priors
            .validate()
            .map_err(|_| CliError::Usage("--take-up-coef-scale must be positive and finite".into()))?;
        Ok(priors)
    }

    /// Explicit flags override the base configuration.
    pub fn mcmc(&self, base: McmcConfig) -> McmcConfig {
        McmcConfig {
            chains: self.chains.unwrap_or(base.chains),
            draws: self.draws.unwrap_or(base.draws),
            warmup: self.warmup.unwrap_or(base.warmup),
            seed: self.seed,
            ..base
        }
    }

    /// Requested estimators in a fixed order. Fuzzy `rd`/`rk` become ratio
    /// estimands; `rdp` needs the fuzzy design.
    pub fn estimators(&self) -> Result<Vec<EstimatorSpec>> {
        let mut estimands = if self.estimands.is_empty() {
            vec![EstimandArg::Rd]
        } else {
            self.estimands.clone()
        };
        estimands.sort();
        estimands.dedup();
        let mut models = if self.models.is_empty() {
            vec![ModelArg::Gp1]
        } else {
            self.models.clone()
        };
        models.sort();
        models.dedup();

        let fuzzy = self.design == DesignArg::Fuzzy;
        let mut out = Vec::new();
        for e in estimands {
            let estimand = match (e, fuzzy) {
                (EstimandArg::Rd, false) => Estimand::Srd,
                (EstimandArg::Rk, false) => Estimand::Srk,
                (EstimandArg::Rd, true) => Estimand::Frd,
                (EstimandArg::Rk, true) => Estimand::Frk,
                (EstimandArg::Rdp, true) => Estimand::Srdp,
                (EstimandArg::Rdp, false) => {
                    return Err(CliError::Usage("--estimand rdp needs --design fuzzy".into()))
                }
            };
            if estimand == Estimand::Srdp {
                out.push(EstimatorSpec::new(ModelKind::Gp1, estimand));
            } else {
                out.extend(models.iter().map(|&m| EstimatorSpec::new(m.into(), estimand)));
            }
        }
        Ok(out)
    }
}
