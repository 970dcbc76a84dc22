//! Data window of twice Silverman's rule-of-thumb bandwidth around the cutoff.

use gprd_core::{SplitSample, Subsample};

use crate::error::{Result, SimError};

/// Fewest observations a side of the window may keep.
pub const MIN_PER_SIDE: usize = 5;

/// `1.06 · sd · N^(−1/5)` with the sample standard deviation.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Indices with `|x − c| ≤ 2h`.
pub fn silverman_window(xs: &[f64], cutoff: f64) -> Result<Vec<usize>> {
    let h = silverman_bandwidth(xs);
    let kept: Vec<usize> = (0..xs.len())
        .filter(|&i| (xs[i] - cutoff).abs() <= 2.0 * h)
        .collect();
    let below = kept.iter().filter(|&&i| xs[i] < cutoff).count();
    let above = kept.len() - below;
    if below < MIN_PER_SIDE || above < MIN_PER_SIDE {
        return Err(SimError::EmptyWindow { below, above });
    }
    Ok(kept)
}

/// Restricts both sides of a split sample to the window, with the bandwidth
/// computed from the pooled running variable.
pub fn apply_window(split: &SplitSample<f64>) -> Result<SplitSample<f64>> {
    let pooled: Vec<f64> = split.below.xs.iter().chain(&split.above.xs).copied().collect();
    let kept = silverman_window(&pooled, split.cutoff)?;
    let nb = split.below.len();
    let pick = |side: &Subsample<f64>, idx: &[usize]| Subsample {
        xs: idx.iter().map(|&i| side.xs[i]).collect(),
        ys: idx.iter().map(|&i| side.ys[i]).collect(),
        ds: side.ds.as_ref().map(|d| idx.iter().map(|&i| d[i]).collect()),
    };
    let below_idx: Vec<usize> = kept.iter().copied().filter(|&i| i < nb).collect();
    let above_idx: Vec<usize> = kept.iter().filter(|&&i| i >= nb).map(|&i| i - nb).collect();
    Ok(SplitSample {
        cutoff: split.cutoff,
        below: pick(&split.below, &below_idx),
        above: pick(&split.above, &above_idx),
    })
}
