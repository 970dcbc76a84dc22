//! Covariance functions on a scalar input.
//!
//! The composite kernel is the sum of a polynomial covariance, which absorbs a
//! quadratic mean `h(x)ᵀβ` with `β ~ N(0, Σ)`, and a squared-exponential term:
//!
//! ```text
//! k(x, x') = h(x)ᵀ Σ h(x') + α² exp(-(x - x')² / (2 l²)),   h(x) = [1, x, x²]
//! ```
//!
//! First and mixed second derivatives are provided for derivative-GP
//! prediction. `dx` differentiates in the first argument; `dxdx` is the mixed
//! partial `∂²k / ∂x ∂x'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Real;

/// Number of polynomial basis functions (quadratic mean).
pub const BASIS_DIM: usize = 3;

/// Diagonal jitter used when a Gram matrix has no noise term.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// Prior standard deviation of the mean-basis coefficients.
pub const DEFAULT_POLY_SCALE: f64 = 100.0;

pub type PolyCov<T> = [[T; BASIS_DIM]; BASIS_DIM];

/// `h(x) = [1, x, x²]`.
#[inline]
pub fn basis<T: Real>(x: T) -> [T; BASIS_DIM] {
    [T::one(), x, x * x]
}

/// `h'(x) = [0, 1, 2x]`.
#[inline]
pub fn basis_deriv<T: Real>(x: T) -> [T; BASIS_DIM] {
    [T::zero(), T::one(), T::lit(2.0) * x]
}

#[inline]
fn quad_form<T: Real>(a: &[T; BASIS_DIM], s: &PolyCov<T>, b: &[T; BASIS_DIM]) -> T {
    let mut acc = T::zero();
    for i in 0..BASIS_DIM {
        if a[i] == T::zero() {
            continue;
        }
        let mut row = T::zero();
        for j in 0..BASIS_DIM {
            row += s[i][j] * b[j];
        }
        acc += a[i] * row;
    }
    acc
}

/// Hyperparameters of the composite kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper<T> {
    pub length_scale: T,
    /// SE scale α².
    pub alpha2: T,
    /// Prior covariance Σ of the mean-basis coefficients.
    pub poly_cov: PolyCov<T>,
}

impl<T: Real> KernelHyper<T> {
    pub fn new(length_scale: T, alpha2: T, poly_cov: PolyCov<T>) -> Result<Self> {
        let hp = Self {
            length_scale,
            alpha2,
            poly_cov,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Σ = `poly_var`·I. A zero variance switches the polynomial part off.
    pub fn isotropic(length_scale: T, alpha2: T, poly_var: T) -> Self {
        let mut s = [[T::zero(); BASIS_DIM]; BASIS_DIM];
        for (i, row) in s.iter_mut().enumerate() {
            row[i] = poly_var;
        }
        Self {
            length_scale,
            alpha2,
            poly_cov: s,
        }
    }

    /// Σ = 100²·I, the weakly informative mean-coefficient prior.
    pub fn with_default_poly(length_scale: T, alpha2: T) -> Self {
        Self::isotropic(
            length_scale,
            alpha2,
            T::lit(DEFAULT_POLY_SCALE * DEFAULT_POLY_SCALE),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > T::zero()) || !self.length_scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.alpha2 > T::zero()) || !self.alpha2.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha2 must be positive, got {}",
                self.alpha2
            )));
        }
        let s = &self.poly_cov;
        let tol = T::lit(1e-12);
        for i in 0..BASIS_DIM {
            for j in 0..i {
                if (s[i][j] - s[j][i]).abs() > tol * (T::one() + s[i][j].abs()) {
                    return Err(Error::InvalidInput("poly_cov is not symmetric".into()));
                }
            }
        }
        let m = Matrix::from_fn(BASIS_DIM, BASIS_DIM, |i, j| s[i][j]);
        Cholesky::new(&m)
            .map(|_| ())
            .map_err(|_| Error::InvalidInput("poly_cov is not positive definite".into()))
    }
}

/// `α² exp(-(x - x')² / (2 l²))`.
#[inline]
pub fn se_kernel<T: Real>(x: T, xp: T, hp: &KernelHyper<T>) -> T {
    let d = x - xp;
    let l2 = hp.length_scale * hp.length_scale;
    hp.alpha2 * (-(d * d) / (T::lit(2.0) * l2)).exp()
}

#[inline]
pub fn poly_kernel<T: Real>(x: T, xp: T, hp: &KernelHyper<T>) -> T {
    quad_form(&basis(x), &hp.poly_cov, &basis(xp))
}

#[inline]
pub fn composite_kernel<T: Real>(x: T, xp: T, hp: &KernelHyper<T>) -> T {
    poly_kernel(x, xp, hp) + se_kernel(x, xp, hp)
}

/// `∂k(x, x')/∂x`.
#[inline]
pub fn composite_kernel_dx<T: Real>(x: T, xp: T, hp: &KernelHyper<T>) -> T {
    let l2 = hp.length_scale * hp.length_scale;
    quad_form(&basis_deriv(x), &hp.poly_cov, &basis(xp)) - (x - xp) / l2 * se_kernel(x, xp, hp)
}

/// `∂²k(x, x')/∂x∂x'`.
///
/// The SE contribution is `(1/l² - (x - x')²/l⁴)·k_se`; on the diagonal it
/// reduces to `α²/l²`.
#[inline]
pub fn composite_kernel_dxdx<T: Real>(x: T, xp: T, hp: &KernelHyper<T>) -> T {
    let l2 = hp.length_scale * hp.length_scale;
    let d = x - xp;
    quad_form(&basis_deriv(x), &hp.poly_cov, &basis_deriv(xp))
        + (T::one() / l2 - d * d / (l2 * l2)) * se_kernel(x, xp, hp)
}

/// `K[i][j] = k(xs[i], xs[j])` plus `jitter` on the diagonal. Assembly only.
pub fn gram_matrix<T: Real>(xs: &[T], hp: &KernelHyper<T>, jitter: T) -> Matrix<T> {
    let n = xs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = composite_kernel(xs[i], xs[j], hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += jitter;
    }
    k
}

/// Assembles the jittered Gram matrix and checks it factorizes.
pub fn factor_gram<T: Real>(
    xs: &[T],
    hp: &KernelHyper<T>,
    jitter: T,
) -> Result<(Matrix<T>, Cholesky<T>)> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty input vector".into()));
    }
    let k = gram_matrix(xs, hp, jitter);
    let chol = Cholesky::new(&k)?;
    Ok((k, chol))
}

/// Row `k(x*, xs[i])`.
pub fn gram_cross<T: Real>(xstar: T, xs: &[T], hp: &KernelHyper<T>) -> Vec<T> {
    xs.iter().map(|&x| composite_kernel(xstar, x, hp)).collect()
}

/// Row `∂k(x*, xs[i])/∂x*`.
pub fn gram_cross_dx<T: Real>(xstar: T, xs: &[T], hp: &KernelHyper<T>) -> Vec<T> {
    xs.iter()
        .map(|&x| composite_kernel_dx(xstar, x, hp))
        .collect()
}

/// Derivatives of the Gram matrix with respect to `log l` and `log α`
/// (SE part only; Σ is fixed).
pub(crate) fn se_hyper_derivatives<T: Real>(
    xs: &[T],
    hp: &KernelHyper<T>,
) -> (Matrix<T>, Matrix<T>) {
    let n = xs.len();
    let l2 = hp.length_scale * hp.length_scale;
    let two = T::lit(2.0);
    let mut d_log_l = Matrix::zeros(n, n);
    let mut d_log_alpha = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let d = xs[i] - xs[j];
            let k = se_kernel(xs[i], xs[j], hp);
            let a = k * d * d / l2;
            let b = two * k;
            d_log_l[(i, j)] = a;
            d_log_l[(j, i)] = a;
            d_log_alpha[(i, j)] = b;
            d_log_alpha[(j, i)] = b;
        }
    }
    (d_log_l, d_log_alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(sigma: f64) -> KernelHyper<f64> {
        KernelHyper::isotropic(1.0, 1.0, sigma)
    }

    #[test]
    fn se_values() {
        let hp = KernelHyper::isotropic(1.0, 4.0, 0.0);
        assert_eq!(se_kernel(0.0, 0.0, &hp), 4.0);
        assert_relative_eq!(se_kernel(0.0, 1.0, &unit(0.0)), 0.6065306597126334, epsilon = 1e-15);
        let hp = KernelHyper::isotropic(2.0, 3.0, 0.0);
        assert_relative_eq!(se_kernel(0.0, 2.0, &hp), 1.8195919791379003, epsilon = 1e-14);
    }

    #[test]
    fn poly_values() {
        assert_eq!(poly_kernel(0.0, 0.0, &unit(1.0)), 1.0);
        assert_eq!(poly_kernel(1.0, 1.0, &unit(1.0)), 3.0);
        let hp = KernelHyper::with_default_poly(1.0, 1.0);
        assert_relative_eq!(poly_kernel(1.0, 2.0, &hp), 70000.0, epsilon = 1e-9);
    }

    #[test]
    fn composite_values() {
        assert_eq!(composite_kernel(0.0, 0.0, &unit(1.0)), 2.0);
        assert_relative_eq!(composite_kernel(0.0, 1.0, &unit(1.0)), 1.6065306597126334, epsilon = 1e-15);
    }

    #[test]
    fn derivative_values() {
        for hp in [unit(1.0), KernelHyper::isotropic(0.3, 2.5, 1.0)] {
            assert_eq!(composite_kernel_dx(0.0, 0.0, &hp), 0.0);
        }
        assert_relative_eq!(composite_kernel_dx(1.0, 0.0, &unit(0.0)), -0.6065306597126334, epsilon = 1e-15);
        assert_relative_eq!(composite_kernel_dx(1.0, 1.0, &unit(1.0)), 3.0, epsilon = 1e-15);

        let hp = KernelHyper::isotropic(2.0, 8.0, 0.0);
        assert_eq!(composite_kernel_dxdx(0.7, 0.7, &hp), 2.0);
        assert_relative_eq!(composite_kernel_dxdx(1.0, 1.0, &unit(1.0)), 6.0, epsilon = 1e-15);
        assert_eq!(composite_kernel_dxdx(0.0, 1.0, &unit(0.0)), 0.0);
    }

    #[test]
    fn gram_small_cases() {
        let k = gram_matrix(&[0.0], &unit(1.0), 0.0);
        assert_eq!(k.as_slice(), &[2.0]);
        let hp = unit(1.0);
        assert!(factor_gram(&[0.0, 0.0], &hp, 0.0).is_err());
        assert!(factor_gram(&[0.0, 0.0], &hp, 1e-6).is_ok());
        assert!(factor_gram::<f64>(&[], &hp, 1e-6).is_err());
    }

    #[test]
    fn gram_matches_pairwise_calls() {
        let xs = [-0.9, -0.2, 0.05, 0.4, 0.77];
        let hp = KernelHyper::isotropic(0.6, 1.7, 2.0);
        let k = gram_matrix(&xs, &hp, 1e-6);
        for i in 0..5 {
            for j in 0..5 {
                let want = composite_kernel(xs[i], xs[j], &hp) + if i == j { 1e-6 } else { 0.0 };
                assert_eq!(k[(i, j)], want);
            }
        }
        let row = gram_cross(0.1, &xs, &hp);
        let drow = gram_cross_dx(0.1, &xs, &hp);
        for i in 0..5 {
            assert_eq!(row[i], composite_kernel(0.1, xs[i], &hp));
            assert_eq!(drow[i], composite_kernel_dx(0.1, xs[i], &hp));
        }
    }

    #[test]
    fn validation() {
        assert!(KernelHyper::new(0.0, 1.0, unit(1.0).poly_cov).is_err());
        assert!(KernelHyper::new(1.0, -1.0, unit(1.0).poly_cov).is_err());
        let mut bad = unit(1.0).poly_cov;
        bad[0][1] = 5.0;
        assert!(KernelHyper::new(1.0, 1.0, bad).is_err());
        bad[1][0] = 5.0;
        assert!(KernelHyper::new(1.0, 1.0, bad).is_err());
        assert!(KernelHyper::new(1.0, 1.0, unit(1.0).poly_cov).is_ok());
    }

    #[test]
    fn single_precision_path() {
        let hp = KernelHyper::<f32>::isotropic(1.0, 1.0, 1.0);
        assert!((composite_kernel(0.0f32, 1.0, &hp) - 1.6065307).abs() < 1e-6);
        assert!((composite_kernel_dxdx(1.0f32, 1.0, &hp) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn hyper_derivatives_match_finite_differences() {
        let xs = [-0.5, 0.1, 0.3];
        let hp = KernelHyper::isotropic(0.4, 1.3, 1.0);
        let (dl, da) = se_hyper_derivatives(&xs, &hp);
        let h = 1e-6_f64;
        let bump = |fl: f64, fa: f64| {
            let mut p = hp;
            p.length_scale *= fl;
            p.alpha2 *= fa * fa;
            gram_matrix(&xs, &p, 0.0)
        };
        let (lp, lm) = (bump(h.exp(), 1.0), bump((-h).exp(), 1.0));
        let (ap, am) = (bump(1.0, h.exp()), bump(1.0, (-h).exp()));
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!((lp[(i, j)] - lm[(i, j)]) / (2.0 * h), dl[(i, j)], epsilon = 1e-6);
                assert_relative_eq!((ap[(i, j)] - am[(i, j)]) / (2.0 * h), da[(i, j)], epsilon = 1e-6);
            }
        }
    }
}
