//! Simulation designs: running variable `x = 2·Beta(2,4) − 1`, Gaussian noise,
//! three mean functions, and an optional fuzzy take-up rule.

use gprd_core::mcmc::derive_seed;
use gprd_core::SplitSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{Result, SimError};

pub const NOISE_SD: f64 = 0.1295;
/// Shift of the probit take-up curve on each side of the cutoff.
pub const TAKE_UP_SHIFT: f64 = 1.28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpId {
    Dgp1,
    Dgp2,
    Dgp3,
}

impl DgpId {
    pub const ALL: [DgpId; 3] = [DgpId::Dgp1, DgpId::Dgp2, DgpId::Dgp3];

    pub fn label(self) -> &'static str {
        match self {
            DgpId::Dgp1 => "DGP1",
            DgpId::Dgp2 => "DGP2",
            DgpId::Dgp3 => "DGP3",
        }
    }

    /// Conditional mean with the cutoff at zero.
    pub fn mean(self, x: f64) -> f64 {
        let poly = |c: [f64; 6]| c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci);
        match self {
            DgpId::Dgp1 => {
                let jump = if x >= 0.0 { 0.1 } else { 0.0 };
                poly([0.42, 0.84, -3.0, 7.99, -9.01, 3.56]) + jump
            }
            DgpId::Dgp2 => {
                if x < 0.0 {
                    poly([3.71, 2.30, 3.28, 1.45, 0.23, 0.03])
                } else {
                    poly([0.26, 18.49, -54.18, 74.30, -45.02, 9.83])
                }
            }
            DgpId::Dgp3 => x * x * x,
        }
    }
}

impl std::str::FromStr for DgpId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dgp1" | "1" => Ok(DgpId::Dgp1),
            "dgp2" | "2" => Ok(DgpId::Dgp2),
            "dgp3" | "3" => Ok(DgpId::Dgp3),
            other => Err(SimError::InvalidSpec(format!("unknown design `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Design {
    Sharp,
    Fuzzy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: DgpId,
    pub design: Design,
    pub n: usize,
    pub noise_sd: f64,
    pub cutoff: f64,
}

impl DgpSpec {
    /// Noise level and cutoff of the reference study.
    pub fn standard(id: DgpId, design: Design, n: usize) -> Self {
        Self {
            id,
            design,
            n,
            noise_sd: NOISE_SD,
            cutoff: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SimError::InvalidSpec("sample size must be positive".into()));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(SimError::InvalidSpec("noise_sd must be positive".into()));
        }
        if !self.cutoff.is_finite() {
            return Err(SimError::InvalidSpec("cutoff must be finite".into()));
        }
        Ok(())
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    StdNormal::standard().cdf(x)
}

/// `p(D = +1 | x)`: `Φ(x − c − 1.28)` below the cutoff, `Φ(x − c + 1.28)` above.
pub fn take_up_probability(x: f64, cutoff: f64) -> f64 {
    let u = x - cutoff;
    if u < 0.0 {
        normal_cdf(u - TAKE_UP_SHIFT)
    } else {
        normal_cdf(u + TAKE_UP_SHIFT)
    }
}

/// Raw simulated sample before splitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ds: Option<Vec<f64>>,
}

/// Draws `(x, y)` and, for fuzzy designs, `D ∈ {−1, +1}`. Take-up uses its own
/// random stream, so both designs share `(x, y)` under the same seed.
pub fn generate_observations(spec: &DgpSpec, seed: u64) -> Result<Observations> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let beta = Beta::new(2.0, 4.0).expect("valid shape");
    let noise = Normal::new(0.0, spec.noise_sd).expect("validated scale");
    let mut xs = Vec::with_capacity(spec.n);
    let mut ys = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let x = 2.0 * beta.sample(&mut rng) - 1.0 + spec.cutoff;
        xs.push(x);
        ys.push(spec.id.mean(x - spec.cutoff) + noise.sample(&mut rng));
    }
    let ds = (spec.design == Design::Fuzzy).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
        xs.iter()
            .map(|&x| {
                if rng.random::<f64>() < take_up_probability(x, spec.cutoff) {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    });
    Ok(Observations { xs, ys, ds })
}

pub fn generate_dataset(spec: &DgpSpec, seed: u64) -> Result<SplitSample<f64>> {
    let obs = generate_observations(spec, seed)?;
    Ok(SplitSample::from_observations(
        &obs.xs,
        &obs.ys,
        obs.ds.as_deref(),
        spec.cutoff,
    )?)
}
