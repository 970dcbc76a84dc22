//! Treatment-effect estimators built from per-draw cutoff predictions of the
//! two subsamples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{ClassificationData, ClassificationFit, TakeUpPrediction};
use crate::error::{Error, Result};
use crate::fit::RegressionFit;
use crate::gp::{PredictiveKind, RegressionData};
use crate::scalar::Real;

/// Normal quantile used for the 95% intervals.
pub const Z_95: f64 = 1.96;

/// Largest fraction of posterior draws that may be dropped after a failed
/// factorization.
pub const MAX_FAILED_DRAW_FRACTION: f64 = 0.05;

/// Smallest admissible magnitude of the take-up jump in a fuzzy ratio.
pub const MIN_DENOMINATOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimand {
    Srd,
    Srk,
    Srdp,
    Frd,
    Frk,
}

impl Estimand {
    pub const ALL: [Estimand; 5] = [Self::Srd, Self::Srk, Self::Srdp, Self::Frd, Self::Frk];

    pub fn label(self) -> &'static str {
        match self {
            Self::Srd => "SRD",
            Self::Srk => "SRK",
            Self::Srdp => "SRDP",
            Self::Frd => "FRD",
            Self::Frk => "FRK",
        }
    }

    pub fn is_fuzzy(self) -> bool {
        matches!(self, Self::Frd | Self::Frk)
    }
}

impl std::fmt::Display for Estimand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Observations on one side of the cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subsample<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    /// Take-up coded `-1`/`+1`, present for fuzzy designs.
    pub ds: Option<Vec<T>>,
}

impl<T: Real> Subsample<T> {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn regression(&self) -> Result<RegressionData<T>> {
        RegressionData::new(self.xs.clone(), self.ys.clone())
    }

    pub fn classification(&self) -> Result<ClassificationData<T>> {
        let ds = self
            .ds
            .clone()
            .ok_or_else(|| Error::InvalidInput("subsample has no take-up labels".into()))?;
        ClassificationData::new(self.xs.clone(), ds)
    }
}

/// A sample split at cutoff `c`: `below` holds `x < c`, `above` holds `x ≥ c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSample<T> {
    pub cutoff: T,
    pub below: Subsample<T>,
    pub above: Subsample<T>,
}

impl<T: Real> SplitSample<T> {
    pub fn from_observations(xs: &[T], ys: &[T], ds: Option<&[T]>, cutoff: T) -> Result<Self> {
        if xs.len() != ys.len() || ds.is_some_and(|d| d.len() != xs.len()) {
            return Err(Error::InvalidInput("observation columns differ in length".into()));
        }
        let empty = || Subsample {
            xs: Vec::new(),
            ys: Vec::new(),
            ds: ds.map(|_| Vec::new()),
        };
        let (mut below, mut above) = (empty(), empty());
        for i in 0..xs.len() {
            let side = if xs[i] < cutoff { &mut below } else { &mut above };
            side.xs.push(xs[i]);
            side.ys.push(ys[i]);
            if let (Some(sd), Some(d)) = (side.ds.as_mut(), ds) {
                sd.push(d[i]);
            }
        }
        let split = Self { cutoff, below, above };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        if self.below.is_empty() || self.above.is_empty() {
            return Err(Error::InvalidInput("both sides of the cutoff need observations".into()));
        }
        if self.below.xs.iter().any(|&x| !(x < self.cutoff))
            || self.above.xs.iter().any(|&x| !(x >= self.cutoff))
        {
            return Err(Error::InvalidInput("observations on the wrong side of the cutoff".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.below.len() + self.above.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-draw conditional predictions at the cutoff for one subsample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPredictive<T> {
    pub kind: PredictiveKind,
    /// `(m̃ₙ, ṽₙ)` per draw; `None` where the draw failed.
    pub per_draw: Vec<Option<(T, T)>>,
}

impl<T: Real> CutoffPredictive<T> {
    pub fn from_fit(fit: &RegressionFit<T>, cutoff: T, kind: PredictiveKind) -> Self {
        let per_draw = (0..fit.len())
            .into_par_iter()
            .map(|n| {
                fit.predictor(n)
                    .and_then(|p| p.predict(cutoff, kind))
                    .ok()
                    .map(|s| (s.mean, s.variance))
            })
            .collect();
        Self { kind, per_draw }
    }

    /// `μ̂` and the two-term variance over all successful draws.
    pub fn summary(&self) -> Option<(T, T)> {
        let kept: Vec<(T, T)> = self.per_draw.iter().flatten().copied().collect();
        two_term(&kept)
    }
}

/// Mean of `m̃` and `(1/Ñ)Σ(m̃ − μ̂)² + (1/Ñ)Σṽ`.
pub fn two_term<T: Real>(draws: &[(T, T)]) -> Option<(T, T)> {
    if draws.is_empty() {
        return None;
    }
    let n = T::lit(draws.len() as f64);
    let mu = draws.iter().map(|d| d.0).sum::<T>() / n;
    let across = draws.iter().map(|d| (d.0 - mu) * (d.0 - mu)).sum::<T>() / n;
    let within = draws.iter().map(|d| d.1).sum::<T>() / n;
    Some((mu, across + within))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate<T> {
    pub kind: Estimand,
    pub tau_hat: T,
    pub v_hat: T,
    pub ci_low: T,
    pub ci_high: T,
    /// Number of posterior draws the estimate is based on.
    pub draws_used: usize,
}

impl<T: Real> EffectEstimate<T> {
    pub fn new(kind: Estimand, tau_hat: T, v_hat: T, draws_used: usize) -> Self {
        let v_hat = v_hat.max(T::zero());
        let half = T::lit(Z_95) * v_hat.sqrt();
        Self {
            kind,
            tau_hat,
            v_hat,
            ci_low: tau_hat - half,
            ci_high: tau_hat + half,
            draws_used,
        }
    }

    pub fn se(&self) -> T {
        self.v_hat.sqrt()
    }

    pub fn covers(&self, truth: T) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }

    pub fn interval_length(&self) -> T {
        self.ci_high - self.ci_low
    }
}

/// A sharp estimate plus its per-draw effect `m̃ₙ₁ − m̃ₙ₀`, aligned with the
/// draw index (`None` for dropped draws). The per-draw stream feeds the fuzzy
/// ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpEffect<T> {
    pub estimate: EffectEstimate<T>,
    pub draw_effects: Vec<Option<T>>,
}

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if total == 0 || failed as f64 > MAX_FAILED_DRAW_FRACTION * total as f64 || failed == total {
        return Err(Error::TooManyFailedDraws { failed, total });
    }
    Ok(())
}

/// Combines per-draw `(m̃, ṽ)` of both sides, dropping any draw index that
/// failed on either side.
pub fn combine_sides<T: Real>(
    kind: Estimand,
    below: &[Option<(T, T)>],
    above: &[Option<(T, T)>],
) -> Result<SharpEffect<T>> {
    let total = below.len().max(above.len());
    let paired: Vec<Option<((T, T), (T, T))>> = (0..total)
        .map(|n| match (below.get(n).copied().flatten(), above.get(n).copied().flatten()) {
            (Some(b), Some(a)) => Some((b, a)),
            _ => None,
        })
        .collect();
    let failed = paired.iter().filter(|p| p.is_none()).count();
    check_failures(failed, total)?;
    let kept: Vec<((T, T), (T, T))> = paired.iter().flatten().copied().collect();
    let b: Vec<(T, T)> = kept.iter().map(|k| k.0).collect();
    let a: Vec<(T, T)> = kept.iter().map(|k| k.1).collect();
    let (mu0, v0) = two_term(&b).expect("non-empty after failure check");
    let (mu1, v1) = two_term(&a).expect("non-empty after failure check");
    Ok(SharpEffect {
        estimate: EffectEstimate::new(kind, mu1 - mu0, v0 + v1, kept.len()),
        draw_effects: paired.iter().map(|p| p.map(|(b, a)| a.0 - b.0)).collect(),
    })
}

fn sharp<T: Real>(
    kind: Estimand,
    pk: PredictiveKind,
    below: &RegressionFit<T>,
    above: &RegressionFit<T>,
    cutoff: T,
) -> Result<SharpEffect<T>> {
    if below.is_empty() || above.is_empty() {
        return Err(Error::InvalidInput("posterior has no draws".into()));
    }
    let p0 = CutoffPredictive::from_fit(below, cutoff, pk);
    let p1 = CutoffPredictive::from_fit(above, cutoff, pk);
    combine_sides(kind, &p0.per_draw, &p1.per_draw)
}

/// Level jump `μ̂₁ − μ̂₀` at the cutoff.
pub fn estimate_srd<T: Real>(
    below: &RegressionFit<T>,
    above: &RegressionFit<T>,
    cutoff: T,
) -> Result<SharpEffect<T>> {
    sharp(Estimand::Srd, PredictiveKind::Level, below, above, cutoff)
}

/// Slope jump at the cutoff.
pub fn estimate_srk<T: Real>(
    below: &RegressionFit<T>,
    above: &RegressionFit<T>,
    cutoff: T,
) -> Result<SharpEffect<T>> {
    sharp(Estimand::Srk, PredictiveKind::Derivative, below, above, cutoff)
}

/// Take-up probability jump from two per-side predictions. The variance is
/// the across-draw variance on each side, summed.
pub fn combine_take_up<T: Real>(
    below: &TakeUpPrediction<T>,
    above: &TakeUpPrediction<T>,
) -> Result<SharpEffect<T>> {
    let zero_var = |v: &[Option<T>]| v.iter().map(|p| p.map(|p| (p, T::zero()))).collect::<Vec<_>>();
    combine_sides(Estimand::Srdp, &zero_var(&below.per_draw), &zero_var(&above.per_draw))
}

pub fn estimate_srdp<T: Real>(
    below: &ClassificationFit<T>,
    above: &ClassificationFit<T>,
    cutoff: T,
) -> Result<SharpEffect<T>> {
    if below.is_empty() || above.is_empty() {
        return Err(Error::InvalidInput("posterior has no draws".into()));
    }
    combine_take_up(&below.predict(cutoff)?, &above.predict(cutoff)?)
}

/// Result of the jackknife-over-draws ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JackknifeRatio<T> {
    /// Bias-corrected ratio `Ñ·r_all − (Ñ−1)·mean(r⁽⁻ⁿ⁾)`.
    pub tau: T,
    /// Plain ratio of draw means.
    pub r_all: T,
    pub numerator_mean: T,
    pub denominator_mean: T,
    pub draws: usize,
}

pub fn jackknife_ratio<T: Real>(numerator: &[T], denominator: &[T]) -> Result<JackknifeRatio<T>> {
    let n = numerator.len();
    if n != denominator.len() || n < 2 {
        return Err(Error::InvalidInput(
            "jackknife needs two equally long draw streams of length at least 2".into(),
        ));
    }
    let nt = T::lit(n as f64);
    let sum_num: T = numerator.iter().copied().sum();
    let sum_den: T = denominator.iter().copied().sum();
    let (num_mean, den_mean) = (sum_num / nt, sum_den / nt);
    let min_den = T::lit(MIN_DENOMINATOR);
    if !(den_mean.abs() > min_den) {
        return Err(Error::DenominatorNearZero(den_mean.as_f64()));
    }
    let r_all = num_mean / den_mean;
    let mut loo_sum = T::zero();
    for i in 0..n {
        let den = sum_den - denominator[i];
        if den == T::zero() {
            return Err(Error::DenominatorNearZero(0.0));
        }
        loo_sum += (sum_num - numerator[i]) / den;
    }
    let loo_mean = loo_sum / nt;
    let tau = if numerator.iter().all(|&v| v == numerator[0])
        && denominator.iter().all(|&v| v == denominator[0])
    {
        // exact for constant streams, where rounding would otherwise leak in
        numerator[0] / denominator[0]
    } else {
        nt * r_all - (nt - T::one()) * loo_mean
    };
    Ok(JackknifeRatio {
        tau,
        r_all,
        numerator_mean: num_mean,
        denominator_mean: den_mean,
        draws: n,
    })
}

/// Fuzzy ratio of a sharp effect over the take-up jump, paired by draw index.
fn fuzzy<T: Real>(kind: Estimand, numerator: &SharpEffect<T>, take_up: &SharpEffect<T>) -> Result<EffectEstimate<T>> {
    if numerator.draw_effects.len() != take_up.draw_effects.len() {
        return Err(Error::InvalidInput(format!(
            "numerator has {} draws but the take-up jump has {}",
            numerator.draw_effects.len(),
            take_up.draw_effects.len()
        )));
    }
    let total = numerator.draw_effects.len();
    let (mut num, mut den) = (Vec::with_capacity(total), Vec::with_capacity(total));
    for (a, b) in numerator.draw_effects.iter().zip(&take_up.draw_effects) {
        if let (Some(a), Some(b)) = (a, b) {
            num.push(*a);
            den.push(*b);
        }
    }
    check_failures(total - num.len(), total)?;
    let jk = jackknife_ratio(&num, &den)?;
    let (t_num, v_num) = (numerator.estimate.tau_hat, numerator.estimate.v_hat);
    let (t_den, v_den) = (take_up.estimate.tau_hat, take_up.estimate.v_hat);
    if !(t_den.abs() > T::lit(MIN_DENOMINATOR)) {
        return Err(Error::DenominatorNearZero(t_den.as_f64()));
    }
    let m = T::lit(jk.draws as f64);
    let t2 = t_den * t_den;
    let v = (v_num / t2 + t_num * t_num * v_den / (t2 * t2)) / m;
    Ok(EffectEstimate::new(kind, jk.tau, v, jk.draws))
}

/// Fuzzy RD: level jump over take-up jump.
pub fn estimate_frd<T: Real>(srd: &SharpEffect<T>, srdp: &SharpEffect<T>) -> Result<EffectEstimate<T>> {
    fuzzy(Estimand::Frd, srd, srdp)
}

/// Fuzzy RK: slope jump over take-up jump.
pub fn estimate_frk<T: Real>(srk: &SharpEffect<T>, srdp: &SharpEffect<T>) -> Result<EffectEstimate<T>> {
    fuzzy(Estimand::Frk, srk, srdp)
}
