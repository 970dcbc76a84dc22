//! Monte Carlo study of the GP discontinuity estimators: simulated designs,
//! the estimation window, replication runner and coverage metrics.

pub mod dgp;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod truth;
pub mod window;

pub use dgp::{generate_dataset, generate_observations, DgpId, DgpSpec, Design, Observations};
pub use error::{Result, SimError};
pub use experiment::{
    effects_from_fits, estimates_from_fits, fit_sample, SampleFits,
    run_experiment, run_replication, run_replications, EstimatorResult, EstimatorSpec, ExperimentConfig,
    ExperimentReport, ReplicationOutcome,
};
pub use metrics::MetricsRow;
pub use truth::{srdp_truth, TruthTable};
pub use window::{apply_window, silverman_bandwidth, silverman_window};
