use gprd_core::EffectEstimate;
use serde::{Deserialize, Serialize};

/// Monte Carlo summary of one estimator over the successful replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: String,
    pub estimand: String,
    /// Mean of `|τ̂ᵣ − τ|`.
    pub abs_bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub interval_length: f64,
    pub reps: usize,
    pub n: usize,
}

/// `(abs_bias, rmse, coverage, interval_length)` of a stream of estimates.
pub fn summarize(estimates: &[EffectEstimate<f64>], truth: f64) -> (f64, f64, f64, f64) {
    let m = estimates.len() as f64;
    if estimates.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let abs_bias = estimates.iter().map(|e| (e.tau_hat - truth).abs()).sum::<f64>() / m;
    let rmse = (estimates.iter().map(|e| (e.tau_hat - truth).powi(2)).sum::<f64>() / m).sqrt();
    let coverage = estimates.iter().filter(|e| e.covers(truth)).count() as f64 / m;
    let length = estimates.iter().map(|e| e.interval_length()).sum::<f64>() / m;
    (abs_bias, rmse, coverage, length)
}

/// Mean of the point estimates.
pub fn mean_estimate(estimates: &[EffectEstimate<f64>]) -> f64 {
    estimates.iter().map(|e| e.tau_hat).sum::<f64>() / estimates.len() as f64
}

impl MetricsRow {
    pub fn from_estimates(
        estimator: &str,
        estimand: &str,
        estimates: &[EffectEstimate<f64>],
        truth: f64,
        n: usize,
    ) -> Self {
        let (abs_bias, rmse, coverage, interval_length) = summarize(estimates, truth);
        Self {
            estimator: estimator.to_string(),
            estimand: estimand.to_string(),
            abs_bias,
            rmse,
            coverage,
            interval_length,
            reps: estimates.len(),
            n,
        }
    }
}
