mod common;

use std::time::Instant;

use common::ess;
use gprd_core::mcmc::{constrained_target, map_estimate};
use gprd_core::prior::log_half_normal;
use gprd_core::{sample_posterior, McmcConfig, ParamLayout, Posterior, Support};

fn config(seed: u64) -> McmcConfig {
    McmcConfig {
        chains: 4,
        draws: 2000,
        warmup: 1000,
        seed,
        ..McmcConfig::default()
    }
}

fn chains_of(post: &Posterior, k: usize) -> Vec<Vec<f64>> {
    let per = post.len() / post.chains();
    (0..post.chains())
        .map(|c| (0..per).map(|i| post.row(c * per + i)[k]).collect())
        .collect()
}

/// Checks that the mean of `values(draw)` is within three Monte Carlo
/// standard errors of `truth`.
fn within_mcse(name: &str, chains: Vec<Vec<f64>>, truth: f64) {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let sd = (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mcse = sd / ess(&chains).sqrt();
    assert!(
        (mean - truth).abs() <= 3.0 * mcse,
        "{name}: mean {mean} vs {truth} (mcse {mcse})"
    );
}

fn map_chains(chains: &[Vec<f64>], f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    chains.iter().map(|c| c.iter().map(|&v| f(v)).collect()).collect()
}

#[test]
fn standard_normal_moments() {
    let start = Instant::now();
    let layout = ParamLayout::real(1);
    let post = sample_posterior(|u: &[f64]| (-0.5 * u[0] * u[0], vec![-u[0]]), &[0.5], &layout, &config(1)).unwrap();
    let x = chains_of(&post, 0);
    within_mcse("mean", x.clone(), 0.0);
    within_mcse("second moment", map_chains(&x, |v| v * v), 1.0);
    assert!(post.diagnostics.rhat[0] < 1.01);
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn correlated_gaussian_moments() {
    let rho = 0.8;
    let det = 1.0 - rho * rho;
    let target = |u: &[f64]| {
        let (a, b) = (u[0], u[1]);
        (
            -0.5 * (a * a - 2.0 * rho * a * b + b * b) / det,
            vec![-(a - rho * b) / det, -(b - rho * a) / det],
        )
    };
    let post = sample_posterior(target, &[1.0, -1.0], &ParamLayout::real(2), &config(2)).unwrap();
    let (x, y) = (chains_of(&post, 0), chains_of(&post, 1));
    within_mcse("mean x", x.clone(), 0.0);
    within_mcse("mean y", y.clone(), 0.0);
    within_mcse("var x", map_chains(&x, |v| v * v), 1.0);
    within_mcse("var y", map_chains(&y, |v| v * v), 1.0);
    let xy: Vec<Vec<f64>> = x.iter().zip(&y).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).collect()).collect();
    within_mcse("covariance", xy, rho);
}

#[test]
fn half_normal_through_log_transform() {
    let layout = ParamLayout::new(&[("scale", Support::Positive)]);
    let target = constrained_target(&layout, |x: &[f64]| {
        let (v, d) = log_half_normal(x[0], 5.0);
        (v, vec![d])
    });
    let post = sample_posterior(target, &[0.0], &layout, &config(3)).unwrap();
    let x = chains_of(&post, 0);
    assert!(x.iter().flatten().all(|&v| v > 0.0));
    within_mcse("mean", x, 5.0 * (2.0 / std::f64::consts::PI).sqrt());
}

#[test]
fn identical_seeds_reproduce_draws() {
    let target = |u: &[f64]| (-0.5 * (u[0] * u[0] + 4.0 * u[1] * u[1]), vec![-u[0], -4.0 * u[1]]);
    let cfg = McmcConfig {
        chains: 3,
        draws: 300,
        warmup: 300,
        seed: 42,
        ..McmcConfig::default()
    };
    let layout = ParamLayout::real(2);
    let a = sample_posterior(target, &[0.1, 0.1], &layout, &cfg).unwrap();
    let b = sample_posterior(target, &[0.1, 0.1], &layout, &cfg).unwrap();
    let bits = |p: &Posterior| p.matrix().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.diagnostics, b.diagnostics);
    let c = sample_posterior(target, &[0.1, 0.1], &layout, &cfg.clone().with_seed(43)).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn map_matches_grid_search() {
    // skewed two-dimensional density with a known-by-search maximum
    let f = |u: &[f64]| {
        let (a, b) = (u[0], u[1]);
        let v = -(a - 1.0).powi(2) - 3.0 * (b + 0.5).powi(2) - 0.5 * a * b + 0.2 * a.powi(3) / (1.0 + a * a);
        let da = -2.0 * (a - 1.0) - 0.5 * b + 0.2 * (3.0 * a * a * (1.0 + a * a) - 2.0 * a.powi(4)) / (1.0 + a * a).powi(2);
        let db = -6.0 * (b + 0.5) - 0.5 * a;
        (v, vec![da, db])
    };
    let map = map_estimate(f, &[0.0, 0.0], 1e-10).unwrap();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let steps = 2001;
    for i in 0..steps {
        for j in 0..steps {
            let a = -1.0 + 4.0 * i as f64 / (steps - 1) as f64;
            let b = -2.0 + 3.0 * j as f64 / (steps - 1) as f64;
            let v = f(&[a, b]).0;
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    assert!((map[0] - best.1).abs() <= 2e-3 && (map[1] - best.2).abs() <= 2e-3, "{map:?} vs {best:?}");
    assert!(f(&map).0 >= best.0);
}
