//! Gaussian-process estimators for sharp and fuzzy regression discontinuity
//! and regression kink designs.
//!
//! Each side of the cutoff gets its own GP with a composite kernel (quadratic
//! mean absorbed into a polynomial covariance plus a squared-exponential
//! term). Hyperparameters are integrated out by HMC; treatment effects are
//! differences of cutoff predictions, and fuzzy effects are ratios over the
//! take-up jump estimated with a latent-GP classifier.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod classify;
pub mod effects;
pub mod error;
pub mod fit;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod mcmc;
pub mod prior;
pub mod scalar;
pub mod warp;

pub use classify::{
    fit_classification, log_posterior_classification, predict_take_up_probability,
    take_up_log_likelihood, ClassHyper, ClassificationData, ClassificationFit, LatentDraws,
    TakeUpPrediction,
};
pub use effects::{
    estimate_frd, estimate_frk, estimate_srd, estimate_srdp, estimate_srk, jackknife_ratio,
    CutoffPredictive, EffectEstimate, Estimand, JackknifeRatio, SharpEffect, SplitSample,
    Subsample,
};
pub use error::{Error, Result};
pub use fit::{fit_regression, log_posterior_regression, HyperParams, ModelKind, RegressionFit};
pub use gp::{
    log_marginal_likelihood, predict_derivative, predict_level, NoiseHyper, PredictiveKind,
    PredictiveSummary, RegressionData,
};
pub use kernel::{
    composite_kernel, composite_kernel_dx, composite_kernel_dxdx, gram_matrix, KernelHyper,
    PolyCov,
};
pub use mcmc::{sample_posterior, McmcConfig, ParamLayout, PosteriorDraws, Support};
pub use prior::PriorSpec;
pub use scalar::Real;
pub use warp::{warped_predict_derivative, warped_predict_level, WarpHyper};

pub type Kernel = KernelHyper<f64>;
pub type Noise = NoiseHyper<f64>;
pub type Warp = WarpHyper<f64>;
pub type Priors = PriorSpec<f64>;
pub type Data = RegressionData<f64>;
pub type TakeUpData = ClassificationData<f64>;
pub type Posterior = PosteriorDraws<f64>;
pub type Fit = RegressionFit<f64>;
pub type TakeUpFit = ClassificationFit<f64>;
pub type Effect = EffectEstimate<f64>;
pub type Split = SplitSample<f64>;

#[cfg(test)]
pub(crate) mod testutil {
    /// Fourth-order central difference in coordinate `k`. The large polynomial
    /// prior variance makes two-point differences with tiny steps too noisy.
    pub fn five_point(f: impl Fn(&[f64]) -> f64, u: &[f64], k: usize) -> f64 {
        let h = 1e-2;
        let at = |t: f64| {
            let mut v = u.to_vec();
            v[k] += t;
            f(&v)
        };
        (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
    }
}
