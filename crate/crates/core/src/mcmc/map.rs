//! MAP estimation by BFGS with Armijo backtracking.

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Real;

pub const MAX_MAP_ITERATIONS: usize = 2000;

const ARMIJO: f64 = 1e-4;

/// Maximizes `logdensity` from `init` until the gradient norm is at most `tol`.
pub fn map_estimate<T, F>(logdensity: F, init: &[T], tol: T) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>),
{
    let run = bfgs(logdensity, init, tol, MAX_MAP_ITERATIONS)?;
    if run.converged {
        Ok(run.point)
    } else {
        Err(Error::NoConvergence {
            iterations: run.iterations,
            grad_norm: run.grad_norm.as_f64(),
        })
    }
}

pub(crate) struct BfgsRun<T> {
    /// Best point reached, converged or not.
    pub point: Vec<T>,
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS ascent with at most `max_iter` iterations. Stops early, unconverged,
/// when the line search can no longer make progress.
pub(crate) fn bfgs<T, F>(logdensity: F, init: &[T], tol: T, max_iter: usize) -> Result<BfgsRun<T>>
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>),
{
    let n = init.len();
    // minimize φ = -log density
    let eval = |x: &[T]| {
        let (v, g) = logdensity(x);
        (-v, g.into_iter().map(|gi| -gi).collect::<Vec<T>>())
    };
    let mut x = init.to_vec();
    let (mut f, mut g) = eval(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDensity);
    }
    let identity = |n: usize| {
        let mut h = vec![T::zero(); n * n];
        for i in 0..n {
            h[i * n + i] = T::one();
        }
        h
    };
    let mut h = identity(n);
    let mut first_step = true;

    for it in 0..max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= tol {
            return Ok(BfgsRun { point: x, grad_norm: gnorm, iterations: it, converged: true });
        }
        let mut d: Vec<T> = (0..n)
            .map(|i| -dot(&h[i * n..(i + 1) * n], &g))
            .collect();
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            h = identity(n);
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
        }

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + t * di).collect();
            let (fnew, gnew) = eval(&xn);
            if fnew.is_finite()
                && gnew.iter().all(|v| v.is_finite())
                && fnew <= f + T::lit(ARMIJO) * t * slope
            {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            t *= T::lit(0.5);
        }
        let Some((xn, fnew, gnew)) = accepted else {
            return Ok(BfgsRun { point: x, grad_norm: gnorm, iterations: it, converged: false });
        };

        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = gnew.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(1e-12) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_step {
                let scale = sy / dot(&y, &y);
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] = if i == j { scale } else { T::zero() };
                    }
                }
                first_step = false;
            }
            // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = T::one() / sy;
            let hy: Vec<T> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = h[i * n + j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    let grad_norm = dot(&g, &g).sqrt();
    Ok(BfgsRun { point: x, grad_norm, iterations: max_iter, converged: grad_norm <= tol })
}
