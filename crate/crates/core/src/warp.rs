//! Hierarchical GP: a single-unit tanh layer `g(x) = tanh(λ₀ + λ₁x)` feeding the
//! composite-kernel GP. Derivative predictions are mapped back to the original
//! input scale with the chain rule, `d f(g(x))/dx = f'(g)·g'(x)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gp::{
    level_at, GpConditional, NoiseHyper, PredictiveKind, PredictiveSummary, RegressionData,
};
use crate::kernel::{composite_kernel_dxdx, gram_cross_dx, KernelHyper};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpHyper<T> {
    pub lambda0: T,
    pub lambda1: T,
}

impl<T: Real> WarpHyper<T> {
    pub fn new(lambda0: T, lambda1: T) -> Self {
        Self { lambda0, lambda1 }
    }
}

#[inline]
pub fn warp<T: Real>(x: T, wh: &WarpHyper<T>) -> T {
    (wh.lambda0 + wh.lambda1 * x).tanh()
}

/// `∂g/∂x = λ₁ (1 - tanh²(λ₀ + λ₁x))`.
#[inline]
pub fn warp_deriv<T: Real>(x: T, wh: &WarpHyper<T>) -> T {
    let t = warp(x, wh);
    wh.lambda1 * (T::one() - t * t)
}

pub fn warp_all<T: Real>(xs: &[T], wh: &WarpHyper<T>) -> Vec<T> {
    xs.iter().map(|&x| warp(x, wh)).collect()
}

/// Level prediction at `x*` for the GP on warped inputs.
pub fn warped_predict_level<T: Real>(
    data: &RegressionData<T>,
    kh: &KernelHyper<T>,
    nh: &NoiseHyper<T>,
    wh: &WarpHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let inputs = warp_all(&data.xs, wh);
    let gp = GpConditional::fit(&inputs, &data.ys, kh, nh.sigma2)?;
    level_at(&gp, &inputs, kh, warp(xstar, wh))
}

/// Derivative prediction at `x*` on the original input scale.
pub fn warped_predict_derivative<T: Real>(
    data: &RegressionData<T>,
    kh: &KernelHyper<T>,
    nh: &NoiseHyper<T>,
    wh: &WarpHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let inputs = warp_all(&data.xs, wh);
    let gp = GpConditional::fit(&inputs, &data.ys, kh, nh.sigma2)?;
    warped_derivative_at(&gp, &inputs, kh, wh, xstar)
}

pub(crate) fn warped_derivative_at<T: Real>(
    gp: &GpConditional<T>,
    inputs: &[T],
    kh: &KernelHyper<T>,
    wh: &WarpHyper<T>,
    xstar: T,
) -> Result<PredictiveSummary<T>> {
    let g = warp(xstar, wh);
    let slope = warp_deriv(xstar, wh);
    let cross: Vec<T> = gram_cross_dx(g, inputs, kh)
        .into_iter()
        .map(|v| v * slope)
        .collect();
    let prior = slope * slope * composite_kernel_dxdx(g, g, kh);
    let (mean, variance) = gp.condition(&cross, prior)?;
    Ok(PredictiveSummary {
        mean,
        variance,
        kind: PredictiveKind::Derivative,
    })
}
