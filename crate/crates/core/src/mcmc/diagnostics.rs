//! Convergence diagnostics.

use crate::scalar::Real;

/// Split-R̂ of one parameter. `values` holds `chains` equal-length chains
/// concatenated in order; each chain is split in half.
pub fn split_rhat<T: Real>(values: &[T], chains: usize) -> f64 {
    if chains == 0 || values.len() % chains != 0 {
        return f64::NAN;
    }
    let per_chain = values.len() / chains;
    let half = per_chain / 2;
    if half < 2 {
        return f64::NAN;
    }
    let mut seqs: Vec<Vec<f64>> = Vec::with_capacity(2 * chains);
    for c in 0..chains {
        let chain = &values[c * per_chain..(c + 1) * per_chain];
        // drop the middle draw of odd-length chains
        seqs.push(chain[..half].iter().map(|v| v.as_f64()).collect());
        seqs.push(chain[per_chain - half..].iter().map(|v| v.as_f64()).collect());
    }
    let m = seqs.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = seqs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}
