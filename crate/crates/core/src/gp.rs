//! Exact GP regression conditionals for one subsample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    composite_kernel, composite_kernel_dxdx, gram_cross, gram_cross_dx, gram_matrix, KernelHyper,
};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::{half_ln_two_pi, Real};

/// Running variable and outcome of one side of the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionData<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
}

impl<T: Real> RegressionData<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput(format!(
                "xs has {} entries but ys has {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.is_empty() {
            return Err(Error::InvalidInput("regression data is empty".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite regression data".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// Gaussian observation noise variance σ².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseHyper<T> {
    pub sigma2: T,
}

impl<T: Real> NoiseHyper<T> {
    pub fn new(sigma2: T) -> Result<Self> {
        if !(sigma2 > T::zero()) || !sigma2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictiveKind {
    Level,
    Derivative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary<T> {
    pub mean: T,
    pub variance: T,
    pub kind: PredictiveKind,
}

/// Absolute slack below zero tolerated before a variance counts as negative.
/// Scaled by the prior variance, which sets the size of the cancellation.
const NEGATIVE_VARIANCE_TOL: f64 = 1e-8;

pub(crate) fn clamp_variance<T: Real>(v: T, prior: T) -> Result<T> {
    if v >= T::zero() {
        return Ok(v);
    }
    let tol = T::lit(NEGATIVE_VARIANCE_TOL) * prior.abs().max(T::one());
    if v >= -tol {
        Ok(T::zero())
    } else {
        Err(Error::NegativeVariance(v.as_f64()))
    }
}

/// A GP conditioned on training data: one Cholesky factor of `K + σ²I`
/// reused for every prediction.
#[derive(Clone, Debug)]
pub struct GpConditional<T> {
    chol: Cholesky<T>,
    /// `(K + σ²I)⁻¹ y`
    weights: Vec<T>,
}

impl<T: Real> GpConditional<T> {
    /// Conditions on `(inputs, ys)` where `inputs` are already in kernel space.
    pub fn fit(inputs: &[T], ys: &[T], kh: &KernelHyper<T>, sigma2: T) -> Result<Self> {
        let mut k = gram_matrix(inputs, kh, T::zero());
        k.add_diagonal(sigma2);
        let chol = Cholesky::new(&k)?;
        let weights = chol.solve(ys);
        Ok(Self { chol, weights })
    }

    pub fn cholesky(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Mean `c·w` and variance `prior - cᵀ(K+σ²I)⁻¹c` for a cross-covariance row `c`.
    pub fn condition(&self, cross: &[T], prior_var: T) -> Result<(T, T)> {
        let mean = dot(cross, &self.weights);
        let v = self.chol.solve_lower(cross);
        let var = clamp_variance(prior_var - dot(&v, &v), prior_var)?;
        Ok((mean, var))
    }

    /// `-½ yᵀ(K+σ²I)⁻¹y - ½ log|K+σ²I| - (N/2) log 2π`.
    pub fn log_marginal_likelihood(&self, ys: &[T]) -> T {
        let n = T::lit(ys.len() as f64);
        let half = T::lit(0.5);
        -half * dot(ys, &self.weights) - half * self.chol.log_det() - n * half_ln_two_pi::<T>()
    }

    /// `½ tr((wwᵀ - (K+σ²I)⁻¹) dK)` for each supplied `dK`, followed by the
    /// derivative with respect to σ² (where `dK = I`).
    pub(crate) fn lml_gradient(&self, dks: &[&Matrix<T>]) -> (Vec<T>, T) {
        let inv = self.chol.inverse();
        let w = &self.weights;
        let n = w.len();
        let half = T::lit(0.5);
        let mut grads = vec![T::zero(); dks.len()];
        let mut noise = T::zero();
        for i in 0..n {
            let wi = w[i];
            let inv_row = inv.row(i);
            noise += wi * wi - inv_row[i];
            for (g, dk) in grads.iter_mut().zip(dks) {
                let dk_row = dk.row(i);
                let mut acc = T::zero();
                for j in 0..n {
                    acc += (wi * w[j] - inv_row[j]) * dk_row[j];
                }
                *g += acc;
            }
        }
        (grads.into_iter().map(|g| half * g).collect(), half * noise)
    }
}

pub fn log_marginal_likelihood<T: Real>(
    data: &RegressionData<T>,
    kh: &KernelHyper<T>,
    nh: &NoiseHyper<T>,
) -> Result<T> {
    let gp = GpConditional::fit(&data.xs, &data.ys, kh, nh.sigma2)?;
    Ok(gp.log_marginal_likelihood(&data.ys))
}

/// Predictive mean and variance of the latent level `f(x*)`.
pub fn predict_level<T: Real>(
    data: &RegressionData<T>,
    kh: &KernelHyper<T>,
    nh: &NoiseHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let gp = GpConditional::fit(&data.xs, &data.ys, kh, nh.sigma2)?;
    level_at(&gp, &data.xs, kh, xstar)
}

/// Predictive mean and variance of the latent derivative `f'(x*)`.
pub fn predict_derivative<T: Real>(
    data: &RegressionData<T>,
    kh: &KernelHyper<T>,
    nh: &NoiseHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let gp = GpConditional::fit(&data.xs, &data.ys, kh, nh.sigma2)?;
    derivative_at(&gp, &data.xs, kh, xstar)
}

pub(crate) fn level_at<T: Real>(
    gp: &GpConditional<T>,
    inputs: &[T],
    kh: &KernelHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let cross = gram_cross(xstar, inputs, kh);
    let (mean, variance) = gp.condition(&cross, composite_kernel(xstar, xstar, kh))?;
    Ok(PredictiveSummary {
        mean,
        variance,
        kind: PredictiveKind::Level,
    })
}

pub(crate) fn derivative_at<T: Real>(
    gp: &GpConditional<T>,
    inputs: &[T],
    kh: &KernelHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let cross = gram_cross_dx(xstar, inputs, kh);
    let (mean, variance) = gp.condition(&cross, composite_kernel_dxdx(xstar, xstar, kh))?;
    Ok(PredictiveSummary {
        mean,
        variance,
        kind: PredictiveKind::Derivative,
    })
}
