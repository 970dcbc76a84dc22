//! Posterior sampling by Hamiltonian Monte Carlo, plus a MAP optimizer.
//!
//! The sampler works on an unconstrained parameter vector. Positive parameters
//! are sampled on the log scale; [`constrained_target`] adds the log-Jacobian
//! for densities written on the constrained scale, and [`ParamLayout`] maps
//! stored draws back to the constrained scale.

mod adapt;
pub mod diagnostics;
mod hmc;
mod map;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub use diagnostics::split_rhat;
pub use map::{map_estimate, MAX_MAP_ITERATIONS};

/// Iteration budget of the optimizer used to pick a sampler start.
const START_ITERATIONS: usize = 200;

/// Starting point for sampling: the best point of a short BFGS run from
/// `init`, or `init` itself if the run fails or wanders off.
pub fn optimized_start<T, F>(logdensity: F, init: &[T], tol: T) -> Vec<T>
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>),
{
    match map::bfgs(logdensity, init, tol, START_ITERATIONS) {
        Ok(run) if run.point.iter().all(|v| v.is_finite() && v.abs() < T::lit(20.0)) => run.point,
        _ => init.to_vec(),
    }
}

/// Fraction of post-warmup transitions allowed to diverge.
pub const MAX_DIVERGENT_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub draws: usize,
    pub warmup: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_leapfrog: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            draws: 1000,
            warmup: 1000,
            seed: 0,
            target_accept: 0.8,
            max_leapfrog: 32,
        }
    }
}

impl McmcConfig {
    /// Two chains of 500 draws after 500 warmup iterations.
    pub fn desk() -> Self {
        Self {
            chains: 2,
            draws: 500,
            warmup: 500,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 || self.warmup == 0 || self.max_leapfrog == 0 {
            return Err(Error::InvalidInput(
                "chains, draws, warmup and max_leapfrog must all be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidInput(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        Ok(())
    }

    /// Total number of retained draws Ñ.
    pub fn total_draws(&self) -> usize {
        self.chains * self.draws
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Support {
    Real,
    /// Sampled as `log x`.
    Positive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub names: Vec<String>,
    pub supports: Vec<Support>,
}

impl ParamLayout {
    pub fn new(params: &[(&str, Support)]) -> Self {
        Self {
            names: params.iter().map(|(n, _)| n.to_string()).collect(),
            supports: params.iter().map(|(_, s)| *s).collect(),
        }
    }

    /// All-real layout with generated names `theta[i]`.
    pub fn real(dim: usize) -> Self {
        Self {
            names: (0..dim).map(|i| format!("theta[{i}]")).collect(),
            supports: vec![Support::Real; dim],
        }
    }

    pub fn push(&mut self, name: impl Into<String>, support: Support) {
        self.names.push(name.into());
        self.supports.push(support);
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn to_constrained<T: Real>(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .zip(&self.supports)
            .map(|(&v, s)| match s {
                Support::Real => v,
                Support::Positive => v.exp(),
            })
            .collect()
    }

    pub fn to_unconstrained<T: Real>(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.supports)
            .map(|(&v, s)| match s {
                Support::Real => v,
                Support::Positive => v.ln(),
            })
            .collect()
    }
}

/// Wraps a density on the constrained scale into one on the unconstrained
/// scale, adding `log x` per positive coordinate.
pub fn constrained_target<'a, T, F>(
    layout: &'a ParamLayout,
    density: F,
) -> impl Fn(&[T]) -> (T, Vec<T>) + Sync + 'a
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>) + Sync + 'a,
{
    move |u: &[T]| {
        let x = layout.to_constrained(u);
        let (v, g) = density(&x);
        let mut value = v;
        let grad = g
            .iter()
            .zip(&x)
            .zip(u)
            .zip(&layout.supports)
            .map(|(((&gi, &xi), &ui), s)| match s {
                Support::Real => gi,
                Support::Positive => {
                    value += ui;
                    gi * xi + T::one()
                }
            })
            .collect();
        (value, grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Split-R̂ per parameter, in layout order.
    pub rhat: Vec<f64>,
    /// Mean Metropolis acceptance probability over post-warmup transitions.
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub transitions: usize,
    /// Adapted step size per chain.
    pub step_sizes: Vec<f64>,
}

/// Post-warmup draws on the constrained scale, chains concatenated in order.
#[derive(Clone, Debug)]
pub struct PosteriorDraws<T> {
    draws: Matrix<T>,
    layout: ParamLayout,
    chains: usize,
    pub diagnostics: Diagnostics,
}

impl<T: Real> PosteriorDraws<T> {
    /// Assembles draws directly; rows are constrained parameter vectors.
    pub fn from_rows(rows: Vec<Vec<T>>, layout: ParamLayout, chains: usize) -> Result<Self> {
        let p = layout.dim();
        if rows.is_empty() || rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput(
                "posterior rows must be non-empty and match the layout".into(),
            ));
        }
        let n = rows.len();
        let draws = Matrix::from_row_major(n, p, rows.into_iter().flatten().collect());
        let rhat = (0..p)
            .map(|j| split_rhat(&draws.column(j), chains.max(1)))
            .collect();
        Ok(Self {
            draws,
            layout,
            chains: chains.max(1),
            diagnostics: Diagnostics {
                rhat,
                acceptance_rate: f64::NAN,
                divergences: 0,
                transitions: n,
                step_sizes: Vec::new(),
            },
        })
    }

    pub fn len(&self) -> usize {
        self.draws.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.rows() == 0
    }

    pub fn n_params(&self) -> usize {
        self.draws.cols()
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn param_names(&self) -> &[String] {
        &self.layout.names
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.draws.row(i)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.draws
    }

    pub fn column(&self, name: &str) -> Option<Vec<T>> {
        self.layout.index_of(name).map(|j| self.draws.column(j))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.len()).map(move |i| self.draws.row(i))
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `cfg.chains` independent HMC chains from `init` (unconstrained scale)
/// and returns their post-warmup draws on the constrained scale.
pub fn sample_posterior<T, F>(
    logdensity: F,
    init: &[T],
    layout: &ParamLayout,
    cfg: &McmcConfig,
) -> Result<PosteriorDraws<T>>
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>) + Sync,
{
    cfg.validate()?;
    if init.len() != layout.dim() {
        return Err(Error::InvalidInput(format!(
            "init has {} coordinates but the layout has {}",
            init.len(),
            layout.dim()
        )));
    }
    let (v0, g0) = logdensity(init);
    if !v0.is_finite() || g0.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteDensity);
    }

    let outputs: Vec<hmc::ChainOutput<T>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| hmc::run_chain(&logdensity, init, cfg, derive_seed(cfg.seed, c as u64)))
        .collect::<Result<_>>()?;

    let transitions = cfg.chains * cfg.draws;
    let divergences: usize = outputs.iter().map(|o| o.divergences).sum();
    if divergences as f64 > MAX_DIVERGENT_FRACTION * transitions as f64 {
        return Err(Error::DivergentChains {
            divergent: divergences,
            total: transitions,
        });
    }
    let acceptance_rate =
        outputs.iter().map(|o| o.accept_sum).sum::<f64>() / transitions as f64;
    let step_sizes = outputs.iter().map(|o| o.step_size).collect();

    let rows: Vec<Vec<T>> = outputs
        .into_iter()
        .flat_map(|o| o.draws)
        .map(|u| layout.to_constrained(&u))
        .collect();
    let mut post = PosteriorDraws::from_rows(rows, layout.clone(), cfg.chains)?;
    post.diagnostics.acceptance_rate = acceptance_rate;
    post.diagnostics.divergences = divergences;
    post.diagnostics.step_sizes = step_sizes;
    Ok(post)
}
