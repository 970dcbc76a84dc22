//! Hyperparameter priors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{half_ln_two_pi, Real};

/// Prior scales. Defaults: `N⁺(0, 5²)` on l, α, σ; `N(0, 5²)` on the
/// classification offset and the warp coefficients; `N(0, 100²)` on the
/// regression mean-basis coefficients and `N(0, 1)` on those of the take-up
/// latent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec<T> {
    pub half_normal_scale: T,
    pub normal_scale: T,
    pub poly_coef_scale: T,
    pub latent_coef_scale: T,
}

impl<T: Real> Default for PriorSpec<T> {
    fn default() -> Self {
        Self {
            half_normal_scale: T::lit(5.0),
            normal_scale: T::lit(5.0),
            poly_coef_scale: T::lit(100.0),
            latent_coef_scale: T::one(),
        }
    }
}

impl<T: Real> PriorSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if ok(self.half_normal_scale) && ok(self.normal_scale) && ok(self.poly_coef_scale) && ok(self.latent_coef_scale) {
            Ok(())
        } else {
            Err(Error::InvalidInput("prior scales must be positive and finite".into()))
        }
    }

    /// Σ entry on the diagonal of the polynomial covariance.
    pub fn poly_variance(&self) -> T {
        self.poly_coef_scale * self.poly_coef_scale
    }

    /// Σ entry for the take-up latent's basis coefficients.
    pub fn latent_poly_variance(&self) -> T {
        self.latent_coef_scale * self.latent_coef_scale
    }
}

/// Log density of `N(0, s²)` at `x` and its derivative in `x`.
pub fn log_normal<T: Real>(x: T, s: T) -> (T, T) {
    let s2 = s * s;
    (
        -x * x / (T::lit(2.0) * s2) - s.ln() - half_ln_two_pi::<T>(),
        -x / s2,
    )
}

/// Log density of the half-normal `N⁺(0, s²)` at `x > 0` and its derivative.
pub fn log_half_normal<T: Real>(x: T, s: T) -> (T, T) {
    let (v, d) = log_normal(x, s);
    (v + T::lit(std::f64::consts::LN_2), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_normal_integrates_to_one() {
        let s = 5.0_f64;
        let h = 1e-3;
        let total: f64 = (0..60_000)
            .map(|i| (i as f64 + 0.5) * h)
            .map(|x| log_half_normal(x, s).0.exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn normal_derivative() {
        let (_, d) = log_normal(1.5_f64, 2.0);
        let h = 1e-6;
        let fd = (log_normal(1.5 + h, 2.0).0 - log_normal(1.5 - h, 2.0).0) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn validation() {
        assert!(PriorSpec::<f64>::default().validate().is_ok());
        let bad = PriorSpec { normal_scale: 0.0, ..PriorSpec::<f64>::default() };
        assert!(bad.validate().is_err());
        assert_eq!(PriorSpec::<f64>::default().poly_variance(), 1e4);
        assert_eq!(PriorSpec::<f64>::default().latent_poly_variance(), 1.0);
    }
}
