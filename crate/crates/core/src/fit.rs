//! Full-Bayes GP regression for one subsample: log posterior over the
//! unconstrained hyperparameters, MAP start, HMC fit, and per-draw prediction.
//!
//! Unconstrained coordinates are `[log l, log α, log σ]` for the one-layer
//! model and additionally `[λ₀, λ₁]` for the warped model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{
    derivative_at, level_at, GpConditional, NoiseHyper, PredictiveKind, PredictiveSummary,
    RegressionData,
};
use crate::kernel::{composite_kernel_dx, se_hyper_derivatives, KernelHyper};
use crate::linalg::Matrix;
use crate::mcmc::{optimized_start, sample_posterior, McmcConfig, ParamLayout, PosteriorDraws, Support};
use crate::prior::{log_half_normal, log_normal, PriorSpec};
use crate::scalar::Real;
use crate::warp::{warp, warp_all, warped_derivative_at, WarpHyper};

/// One-layer GP (`Gp1`) or GP on tanh-warped inputs (`Gp2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Gp1,
    Gp2,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Gp1 => "GP1",
            ModelKind::Gp2 => "GP2",
        }
    }
}

/// Full hyperparameter vector of one subsample model, constrained scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams<T> {
    pub kernel: KernelHyper<T>,
    pub noise: NoiseHyper<T>,
    pub warp: Option<WarpHyper<T>>,
}

pub const LENGTH_SCALE: &str = "length_scale";
pub const ALPHA: &str = "alpha";
pub const SIGMA: &str = "sigma";
pub const LAMBDA0: &str = "lambda0";
pub const LAMBDA1: &str = "lambda1";

/// Gradient-norm tolerance of the MAP start.
const MAP_TOL: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct RegressionModel<T> {
    pub data: RegressionData<T>,
    pub kind: ModelKind,
    pub priors: PriorSpec<T>,
}

impl<T: Real> RegressionModel<T> {
    pub fn new(data: RegressionData<T>, kind: ModelKind, priors: PriorSpec<T>) -> Result<Self> {
        priors.validate()?;
        Ok(Self { data, kind, priors })
    }

    pub fn layout(&self) -> ParamLayout {
        let mut layout = ParamLayout::new(&[
            (LENGTH_SCALE, Support::Positive),
            (ALPHA, Support::Positive),
            (SIGMA, Support::Positive),
        ]);
        if self.kind == ModelKind::Gp2 {
            layout.push(LAMBDA0, Support::Real);
            layout.push(LAMBDA1, Support::Real);
        }
        layout
    }

    /// Heuristic starting point (unconstrained scale) from the data spread.
    pub fn default_init(&self) -> Vec<T> {
        let xs = &self.data.xs;
        let (lo, hi) = xs
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(a, b), &x| (a.min(x), b.max(x)));
        let sd_y = sample_sd(&self.data.ys);
        let range = hi - lo;
        let mut u = vec![
            (range / T::lit(2.0)).max(T::lit(1e-2)).ln(),
            sd_y.max(T::lit(1e-2)).ln(),
            (sd_y / T::lit(2.0)).max(T::lit(1e-3)).ln(),
        ];
        if self.kind == ModelKind::Gp2 {
            // identity-like warp on the observed range
            let scale = if range > T::zero() { T::one() / range.max(T::lit(1e-3)) } else { T::one() };
            u.push(T::zero());
            u.push(scale.min(T::lit(5.0)));
        }
        u
    }

    pub fn hyper_from_constrained(&self, row: &[T]) -> HyperParams<T> {
        let kernel = KernelHyper::isotropic(row[0], row[1] * row[1], self.priors.poly_variance());
        let noise = NoiseHyper { sigma2: row[2] * row[2] };
        let warp = (self.kind == ModelKind::Gp2).then(|| WarpHyper::new(row[3], row[4]));
        HyperParams { kernel, noise, warp }
    }

    fn inputs(&self, warp_hyper: Option<&WarpHyper<T>>) -> Vec<T> {
        match warp_hyper {
            Some(wh) => warp_all(&self.data.xs, wh),
            None => self.data.xs.clone(),
        }
    }

    /// Log posterior and gradient on the unconstrained scale, including the
    /// log-Jacobian of the positive parameters. A failed factorization yields
    /// `-∞` with a zero gradient.
    pub fn log_posterior(&self, u: &[T]) -> (T, Vec<T>) {
        let dim = self.layout().dim();
        let reject = || (T::neg_infinity(), vec![T::zero(); dim]);
        if u.len() != dim || u.iter().any(|v| !v.is_finite()) {
            return reject();
        }
        let (l, alpha, sigma) = (u[0].exp(), u[1].exp(), u[2].exp());
        if !(l > T::zero() && alpha > T::zero() && sigma > T::zero())
            || !(l.is_finite() && alpha.is_finite() && sigma.is_finite())
        {
            return reject();
        }
        let kh = KernelHyper::isotropic(l, alpha * alpha, self.priors.poly_variance());
        let sigma2 = sigma * sigma;
        let wh = (self.kind == ModelKind::Gp2).then(|| WarpHyper::new(u[3], u[4]));
        let inputs = self.inputs(wh.as_ref());
        let gp = match GpConditional::fit(&inputs, &self.data.ys, &kh, sigma2) {
            Ok(gp) => gp,
            Err(_) => return reject(),
        };

        let (d_log_l, d_log_alpha) = se_hyper_derivatives(&inputs, &kh);
        let mut dks: Vec<Matrix<T>> = vec![d_log_l, d_log_alpha];
        if let Some(wh) = &wh {
            let (d0, d1) = warp_gram_derivatives(&self.data.xs, &inputs, &kh, wh);
            dks.push(d0);
            dks.push(d1);
        }
        let refs: Vec<&Matrix<T>> = dks.iter().collect();
        let (g, g_sigma2) = gp.lml_gradient(&refs);

        let hn = self.priors.half_normal_scale;
        let mut value = gp.log_marginal_likelihood(&self.data.ys);
        let mut grad = vec![T::zero(); dim];
        for (k, (&x, &uk)) in [l, alpha, sigma].iter().zip(&u[..3]).enumerate() {
            let (lp, dlp) = log_half_normal(x, hn);
            value += lp + uk;
            grad[k] = dlp * x + T::one();
        }
        grad[0] += g[0];
        grad[1] += g[1];
        grad[2] += g_sigma2 * T::lit(2.0) * sigma2;
        if wh.is_some() {
            for k in 0..2 {
                let (lp, dlp) = log_normal(u[3 + k], self.priors.normal_scale);
                value += lp;
                grad[3 + k] = g[2 + k] + dlp;
            }
        }
        if !value.is_finite() {
            return reject();
        }
        (value, grad)
    }

    /// Approximate MAP start, falling back to the heuristic start.
    pub fn initial_point(&self) -> Vec<T> {
        optimized_start(|u| self.log_posterior(u), &self.default_init(), T::lit(MAP_TOL))
    }
}

/// `∂K/∂λ₀` and `∂K/∂λ₁` for the warped Gram matrix.
fn warp_gram_derivatives<T: Real>(
    xs: &[T],
    inputs: &[T],
    kh: &KernelHyper<T>,
    _wh: &WarpHyper<T>,
) -> (Matrix<T>, Matrix<T>) {
    let n = xs.len();
    // ∂g/∂λ₀ = 1 - g², ∂g/∂λ₁ = x (1 - g²)
    let dg0: Vec<T> = inputs.iter().map(|&g| T::one() - g * g).collect();
    let dg1: Vec<T> = xs.iter().zip(&dg0).map(|(&x, &d)| x * d).collect();
    let mut d0 = Matrix::zeros(n, n);
    let mut d1 = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let kij = composite_kernel_dx(inputs[i], inputs[j], kh);
            let kji = composite_kernel_dx(inputs[j], inputs[i], kh);
            let a = kij * dg0[i] + kji * dg0[j];
            let b = kij * dg1[i] + kji * dg1[j];
            d0[(i, j)] = a;
            d0[(j, i)] = a;
            d1[(i, j)] = b;
            d1[(j, i)] = b;
        }
    }
    (d0, d1)
}

pub(crate) fn sample_sd<T: Real>(v: &[T]) -> T {
    let n = T::lit(v.len() as f64);
    if v.len() < 2 {
        return T::zero();
    }
    let mean = v.iter().copied().sum::<T>() / n;
    (v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())).sqrt()
}

/// Log posterior of the one-layer regression model at unconstrained `params`
/// (`[log l, log α, log σ]`).
pub fn log_posterior_regression<T: Real>(
    data: &RegressionData<T>,
    params: &[T],
    priors: &PriorSpec<T>,
) -> (T, Vec<T>) {
    let model = RegressionModel {
        data: data.clone(),
        kind: ModelKind::Gp1,
        priors: *priors,
    };
    model.log_posterior(params)
}

/// Posterior draws of one subsample's regression model.
#[derive(Clone, Debug)]
pub struct RegressionFit<T> {
    pub model: RegressionModel<T>,
    pub posterior: PosteriorDraws<T>,
}

/// One posterior draw conditioned on the data, ready for repeated prediction.
pub struct DrawPredictor<'a, T> {
    hyper: HyperParams<T>,
    inputs: Vec<T>,
    gp: GpConditional<T>,
    _fit: &'a RegressionFit<T>,
}

impl<T: Real> DrawPredictor<'_, T> {
    pub fn predict(&self, xstar: T, kind: PredictiveKind) -> Result<PredictiveSummary<T>> {
        let kh = &self.hyper.kernel;
        match (kind, &self.hyper.warp) {
            (PredictiveKind::Level, None) => level_at(&self.gp, &self.inputs, kh, xstar),
            (PredictiveKind::Derivative, None) => derivative_at(&self.gp, &self.inputs, kh, xstar),
            (PredictiveKind::Level, Some(wh)) => level_at(&self.gp, &self.inputs, kh, warp(xstar, wh)),
            (PredictiveKind::Derivative, Some(wh)) => {
                warped_derivative_at(&self.gp, &self.inputs, kh, wh, xstar)
            }
        }
    }

    pub fn hyper(&self) -> &HyperParams<T> {
        &self.hyper
    }
}

impl<T: Real> RegressionFit<T> {
    pub fn kind(&self) -> ModelKind {
        self.model.kind
    }

    pub fn data(&self) -> &RegressionData<T> {
        &self.model.data
    }

    pub fn len(&self) -> usize {
        self.posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posterior.is_empty()
    }

    pub fn hyper(&self, draw: usize) -> HyperParams<T> {
        self.model.hyper_from_constrained(self.posterior.row(draw))
    }

    pub fn predictor(&self, draw: usize) -> Result<DrawPredictor<'_, T>> {
        let hyper = self.hyper(draw);
        let inputs = self.model.inputs(hyper.warp.as_ref());
        let gp = GpConditional::fit(&inputs, &self.model.data.ys, &hyper.kernel, hyper.noise.sigma2)?;
        Ok(DrawPredictor {
            hyper,
            inputs,
            gp,
            _fit: self,
        })
    }

    /// Conditional predictive mean/variance at `xstar` for every draw; failed
    /// draws are `None`.
    pub fn per_draw(&self, xstar: T, kind: PredictiveKind) -> Vec<Option<PredictiveSummary<T>>> {
        (0..self.len())
            .map(|i| self.predictor(i).and_then(|p| p.predict(xstar, kind)).ok())
            .collect()
    }
}

/// Fits a regression model by HMC from a MAP start.
pub fn fit_regression<T: Real>(
    data: &RegressionData<T>,
    kind: ModelKind,
    priors: &PriorSpec<T>,
    cfg: &McmcConfig,
) -> Result<RegressionFit<T>> {
    if data.len() < 2 {
        return Err(Error::InvalidInput(
            "a subsample needs at least two observations".into(),
        ));
    }
    let model = RegressionModel::new(data.clone(), kind, *priors)?;
    let layout = model.layout();
    let init = model.initial_point();
    let posterior = sample_posterior(|u: &[T]| model.log_posterior(u), &init, &layout, cfg)?;
    Ok(RegressionFit { model, posterior })
}
