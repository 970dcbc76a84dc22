//! Latent-GP classification of treatment take-up.
//!
//! The latent vector is sampled jointly with the hyperparameters in whitened
//! form, `f = L z` with `L Lᵀ = K + jitter·I`. Unconstrained coordinates are
//! `[log l, log α, γ, z₁, …, z_N]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    factor_gram, gram_cross, se_hyper_derivatives, KernelHyper, DEFAULT_JITTER,
};
use crate::linalg::{dot, Matrix};
use crate::mcmc::{optimized_start, sample_posterior, McmcConfig, ParamLayout, PosteriorDraws, Support};
use crate::prior::{log_half_normal, log_normal, PriorSpec};
use crate::scalar::{half_ln_two_pi, log_logistic, logistic, Real};

/// Running variable and take-up indicator coded `-1` (no take-up) / `+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationData<T> {
    pub xs: Vec<T>,
    pub ds: Vec<T>,
}

impl<T: Real> ClassificationData<T> {
    pub fn new(xs: Vec<T>, ds: Vec<T>) -> Result<Self> {
        if xs.len() != ds.len() {
            return Err(Error::InvalidInput(format!(
                "xs has {} entries but ds has {}",
                xs.len(),
                ds.len()
            )));
        }
        if xs.is_empty() {
            return Err(Error::InvalidInput("classification data is empty".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite running variable".into()));
        }
        if ds.iter().any(|&d| d != T::one() && d != -T::one()) {
            return Err(Error::InvalidInput("take-up labels must be -1 or +1".into()));
        }
        Ok(Self { xs, ds })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Same observations with the labels flipped.
    pub fn flipped(&self) -> Self {
        Self {
            xs: self.xs.clone(),
            ds: self.ds.iter().map(|&d| -d).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHyper<T> {
    pub gamma: T,
    pub kernel: KernelHyper<T>,
}

/// Posterior latent vectors `f̃ₙ`, one row per hyperparameter draw.
#[derive(Clone, Debug)]
pub struct LatentDraws<T> {
    pub latent: Matrix<T>,
}

impl<T: Real> LatentDraws<T> {
    pub fn len(&self) -> usize {
        self.latent.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.latent.rows() == 0
    }

    pub fn row(&self, n: usize) -> &[T] {
        self.latent.row(n)
    }
}

/// `Σᵢ log ψ(Dᵢ(γ + fᵢ))` with ψ the logistic function.
pub fn take_up_log_likelihood<T: Real>(ds: &[T], gamma: T, f: &[T]) -> T {
    ds.iter()
        .zip(f)
        .map(|(&d, &fi)| log_logistic(d * (gamma + fi)))
        .sum()
}

pub const GAMMA: &str = "gamma";

/// Builds the classification layout for `n` latent coordinates.
pub fn classification_layout(n: usize) -> ParamLayout {
    let mut layout = ParamLayout::new(&[
        (crate::fit::LENGTH_SCALE, Support::Positive),
        (crate::fit::ALPHA, Support::Positive),
        (GAMMA, Support::Real),
    ]);
    for i in 0..n {
        layout.push(format!("z[{i}]"), Support::Real);
    }
    layout
}

/// Log posterior on the whitened unconstrained scale `[log l, log α, γ, z]`
/// and its exact gradient.
///
/// The value is `Σ log ψ(Dᵢ(γ+fᵢ)) − ½zᵀz − (N/2) log 2π` plus the priors and
/// the log-Jacobian of `l` and `α`. Since `fᵀK⁻¹f = zᵀz`, this is the latent
/// density in `f` plus `log |L|`, the Jacobian of `f = L z`. A failed
/// factorization yields `-∞` with a zero gradient.
pub fn log_posterior_classification<T: Real>(
    data: &ClassificationData<T>,
    params: &[T],
    priors: &PriorSpec<T>,
) -> (T, Vec<T>) {
    let n = data.len();
    let dim = n + 3;
    let reject = || (T::neg_infinity(), vec![T::zero(); dim]);
    if params.len() != dim || params.iter().any(|v| !v.is_finite()) {
        return reject();
    }
    let (l, alpha, gamma) = (params[0].exp(), params[1].exp(), params[2]);
    if !(l > T::zero() && alpha > T::zero() && l.is_finite() && alpha.is_finite()) {
        return reject();
    }
    let z = &params[3..];
    let kh = KernelHyper::isotropic(l, alpha * alpha, priors.latent_poly_variance());
    let Ok((_, chol)) = factor_gram(&data.xs, &kh, T::lit(DEFAULT_JITTER)) else {
        return reject();
    };
    let f = chol.lower_mul(z);

    // a = ∂/∂f of the log likelihood
    let mut value = T::zero();
    let mut a = vec![T::zero(); n];
    for i in 0..n {
        let m = data.ds[i] * (gamma + f[i]);
        value += log_logistic(m);
        a[i] = data.ds[i] * (T::one() - logistic(m));
    }
    value += -T::lit(0.5) * dot(z, z) - T::lit(n as f64) * half_ln_two_pi::<T>();

    let mut grad = vec![T::zero(); dim];
    // kernel parameters enter through L only: backpropagate aᵀ(dL)z
    let lbar = Matrix::from_fn(n, n, |i, j| if j <= i { a[i] * z[j] } else { T::zero() });
    let abar = chol.adjoint(&lbar);
    let (d_log_l, d_log_alpha) = se_hyper_derivatives(&data.xs, &kh);
    for (k, dk) in [d_log_l, d_log_alpha].iter().enumerate() {
        grad[k] = (0..n).map(|i| dot(&abar.row(i)[..=i], &dk.row(i)[..=i])).sum();
    }
    let lt_a = chol.upper_mul(&a);
    for i in 0..n {
        grad[3 + i] = lt_a[i] - z[i];
    }
    grad[2] = a.iter().copied().sum();

    let hn = priors.half_normal_scale;
    for (k, x) in [l, alpha].into_iter().enumerate() {
        let (lp, dlp) = log_half_normal(x, hn);
        value += lp + params[k];
        grad[k] += dlp * x + T::one();
    }
    let (lp, dlp) = log_normal(gamma, priors.normal_scale);
    value += lp;
    grad[2] += dlp;

    if !value.is_finite() {
        return reject();
    }
    (value, grad)
}

/// Classification model for one subsample. Observations are reordered so the
/// extreme and median inputs come first, which lets the leading whitened
/// coordinates absorb the large polynomial prior variance.
#[derive(Clone, Debug)]
pub struct ClassificationModel<T> {
    pub data: ClassificationData<T>,
    pub priors: PriorSpec<T>,
}

impl<T: Real> ClassificationModel<T> {
    pub fn new(data: ClassificationData<T>, priors: PriorSpec<T>) -> Result<Self> {
        priors.validate()?;
        let order = pivot_order(&data.xs);
        let data = ClassificationData {
            xs: order.iter().map(|&i| data.xs[i]).collect(),
            ds: order.iter().map(|&i| data.ds[i]).collect(),
        };
        Ok(Self { data, priors })
    }

    pub fn layout(&self) -> ParamLayout {
        classification_layout(self.data.len())
    }

    pub fn log_posterior(&self, u: &[T]) -> (T, Vec<T>) {
        log_posterior_classification(&self.data, u, &self.priors)
    }

    pub fn default_init(&self) -> Vec<T> {
        let (lo, hi) = self
            .data
            .xs
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(a, b), &x| (a.min(x), b.max(x)));
        let takers = self.data.ds.iter().filter(|&&d| d > T::zero()).count() as f64;
        let rate = T::lit((takers + 0.5) / (self.data.len() as f64 + 1.0));
        let mut u = vec![
            ((hi - lo) / T::lit(2.0)).max(T::lit(1e-2)).ln(),
            T::zero(),
            (rate / (T::one() - rate)).ln(),
        ];
        u.extend(std::iter::repeat_n(T::zero(), self.data.len()));
        u
    }

    pub fn initial_point(&self) -> Vec<T> {
        optimized_start(|u| self.log_posterior(u), &self.default_init(), T::lit(1e-4))
    }

    pub fn hyper_from_constrained(&self, row: &[T]) -> ClassHyper<T> {
        ClassHyper {
            gamma: row[2],
            kernel: KernelHyper::isotropic(row[0], row[1] * row[1], self.priors.latent_poly_variance()),
        }
    }
}

/// Indices with min, max and median first, then the rest in input order.
fn pivot_order<T: Real>(xs: &[T]) -> Vec<usize> {
    let n = xs.len();
    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut head = Vec::with_capacity(3);
    for i in [sorted[0], sorted[n - 1], sorted[n / 2]] {
        if !head.contains(&i) {
            head.push(i);
        }
    }
    head.iter()
        .copied()
        .chain((0..n).filter(|i| !head.contains(i)))
        .collect()
}

/// Posterior of one subsample's take-up model.
#[derive(Clone, Debug)]
pub struct ClassificationFit<T> {
    pub model: ClassificationModel<T>,
    pub posterior: PosteriorDraws<T>,
    pub latent: LatentDraws<T>,
}

impl<T: Real> ClassificationFit<T> {
    pub fn len(&self) -> usize {
        self.posterior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posterior.is_empty()
    }

    pub fn data(&self) -> &ClassificationData<T> {
        &self.model.data
    }

    pub fn hyper(&self, draw: usize) -> ClassHyper<T> {
        self.model.hyper_from_constrained(self.posterior.row(draw))
    }
}

/// Take-up probability at a point: mean `p̂` and across-draw variance `v_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TakeUpPrediction<T> {
    pub p_hat: T,
    pub v_p: T,
    /// `p̃ₙ` per draw; `None` where the draw's factorization failed.
    pub per_draw: Vec<Option<T>>,
}

/// `p̃ = ψ(γ̃ + k*ᵀ (K + jitter·I)⁻¹ f̃)` for one draw.
pub fn draw_take_up_probability<T: Real>(
    xs: &[T],
    hyper: &ClassHyper<T>,
    latent: &[T],
    xstar: T,
) -> Result<T> {
    let (_, chol) = factor_gram(xs, &hyper.kernel, T::lit(DEFAULT_JITTER))?;
    let cross = gram_cross(xstar, xs, &hyper.kernel);
    let q = dot(&cross, &chol.solve(latent));
    Ok(logistic(hyper.gamma + q))
}

/// Aggregates per-draw take-up probabilities, skipping failed draws.
pub fn summarize_take_up<T: Real>(per_draw: Vec<Option<T>>) -> Result<TakeUpPrediction<T>> {
    let ok: Vec<T> = per_draw.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::TooManyFailedDraws {
            failed: per_draw.len(),
            total: per_draw.len(),
        });
    }
    let m = T::lit(ok.len() as f64);
    let p_hat = ok.iter().copied().sum::<T>() / m;
    let v_p = ok.iter().map(|&p| (p - p_hat) * (p - p_hat)).sum::<T>() / m;
    Ok(TakeUpPrediction { p_hat, v_p, per_draw })
}

/// Predictive take-up probability at `xstar` over all posterior draws.
pub fn predict_take_up_probability<T: Real>(
    data: &ClassificationData<T>,
    posterior: &PosteriorDraws<T>,
    latent: &LatentDraws<T>,
    priors: &PriorSpec<T>,
    xstar: T,
) -> Result<TakeUpPrediction<T>> {
    if posterior.is_empty() || latent.len() != posterior.len() {
        return Err(Error::InvalidInput(
            "posterior must be non-empty with one latent vector per draw".into(),
        ));
    }
    let per_draw: Vec<Option<T>> = (0..posterior.len())
        .into_par_iter()
        .map(|n| {
            let row = posterior.row(n);
            let hyper = ClassHyper {
                gamma: row[2],
                kernel: KernelHyper::isotropic(row[0], row[1] * row[1], priors.latent_poly_variance()),
            };
            draw_take_up_probability(&data.xs, &hyper, latent.row(n), xstar).ok()
        })
        .collect();
    summarize_take_up(per_draw)
}

impl<T: Real> ClassificationFit<T> {
    pub fn predict(&self, xstar: T) -> Result<TakeUpPrediction<T>> {
        predict_take_up_probability(&self.model.data, &self.posterior, &self.latent, &self.model.priors, xstar)
    }
}

/// Samples the take-up model by HMC and recovers `f̃ₙ = L(θ̃ₙ) z̃ₙ` per draw.
pub fn fit_classification<T: Real>(
    data: &ClassificationData<T>,
    priors: &PriorSpec<T>,
    cfg: &McmcConfig,
) -> Result<ClassificationFit<T>> {
    let model = ClassificationModel::new(data.clone(), *priors)?;
    let layout = model.layout();
    let init = model.initial_point();
    let posterior = sample_posterior(|u: &[T]| model.log_posterior(u), &init, &layout, cfg)?;
    let n = model.data.len();
    let rows: Vec<Vec<T>> = (0..posterior.len())
        .into_par_iter()
        .map(|d| {
            let row = posterior.row(d);
            let hyper = model.hyper_from_constrained(row);
            match factor_gram(&model.data.xs, &hyper.kernel, T::lit(DEFAULT_JITTER)) {
                Ok((_, chol)) => chol.lower_mul(&row[3..]),
                Err(_) => vec![T::nan(); n],
            }
        })
        .collect();
    let latent = LatentDraws {
        latent: Matrix::from_row_major(rows.len(), n, rows.into_iter().flatten().collect()),
    };
    Ok(ClassificationFit { model, posterior, latent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ClassificationData<f64> {
        let xs = vec![0.02, 0.05, 0.11, 0.13, 0.2];
        let ds = vec![1.0, -1.0, 1.0, 1.0, -1.0];
        ClassificationData::new(xs, ds).unwrap()
    }

    #[test]
    fn zero_latent_likelihood() {
        let d = toy();
        let ll = take_up_log_likelihood(&d.ds, 0.0, &[0.0; 5]);
        assert!((ll - 5.0 * 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn label_flip_symmetry() {
        let d = toy();
        let f = [0.3, -1.2, 0.4, 2.0, -0.1];
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let a = take_up_log_likelihood(&d.ds, 0.7, &f);
        let b = take_up_log_likelihood(&d.flipped().ds, -0.7, &neg);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_fd() {
        let d = toy();
        let priors = PriorSpec::default();
        let u = [-1.0, 0.2, 0.3, 0.5, -0.4, 0.1, 1.1, -0.7, 0.0];
        let u = &u[..8];
        let (_, g) = log_posterior_classification(&d, u, &priors);
        for k in 0..u.len() {
            let fd = crate::testutil::five_point(|v| log_posterior_classification(&d, v, &priors).0, u, k);
            assert!((fd - g[k]).abs() / fd.abs().max(1.0) < 1e-5, "coord {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(ClassificationData::new(vec![0.1], vec![0.0]).is_err());
        assert!(ClassificationData::new(vec![0.1, 0.2], vec![1.0]).is_err());
    }

    #[test]
    fn pivot_order_is_permutation() {
        let xs = [0.5, 0.1, 0.9, 0.3, 0.7];
        let mut o = pivot_order(&xs);
        assert_eq!(&o[..3], &[1, 2, 0]);
        o.sort();
        assert_eq!(o, vec![0, 1, 2, 3, 4]);
        assert_eq!(pivot_order(&[1.0]), vec![0]);
    }

    #[test]
    fn neutral_draws_give_half() {
        let p = summarize_take_up(vec![Some(0.5), Some(0.5), Some(0.5)]).unwrap();
        assert_eq!(p.p_hat, 0.5);
        assert_eq!(p.v_p, 0.0);
        let hyper = ClassHyper { gamma: 0.0, kernel: KernelHyper::isotropic(0.3, 1.0, 1e4) };
        let d = toy();
        let p = draw_take_up_probability(&d.xs, &hyper, &[0.0; 5], 0.0).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn interpolates_latent_at_training_point() {
        let xs = [-0.9_f64, -0.3, 0.2, 0.8];
        let hyper = ClassHyper { gamma: 0.0, kernel: KernelHyper::isotropic(0.3, 1.0, 1.0) };
        let f = [0.4, -0.2, 0.9, 0.1];
        let p = draw_take_up_probability(&xs, &hyper, &f, xs[2]).unwrap();
        assert!((p - logistic(0.9)).abs() < 1e-5);
    }
}
