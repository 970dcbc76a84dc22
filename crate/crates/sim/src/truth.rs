use gprd_core::Estimand;
use serde::{Deserialize, Serialize};

use crate::dgp::{normal_cdf, DgpId, TAKE_UP_SHIFT};

/// True take-up jump `Φ(1.28) − Φ(−1.28)`.
pub fn srdp_truth() -> f64 {
    normal_cdf(TAKE_UP_SHIFT) - normal_cdf(-TAKE_UP_SHIFT)
}

/// True effects of every design and estimand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthTable;

impl TruthTable {
    pub fn srd(id: DgpId) -> f64 {
        match id {
            DgpId::Dgp1 => 0.1,
            DgpId::Dgp2 => 0.26 - 3.71,
            DgpId::Dgp3 => 0.0,
        }
    }

    pub fn srk(id: DgpId) -> f64 {
        match id {
            DgpId::Dgp1 => 0.0,
            DgpId::Dgp2 => 18.49 - 2.30,
            DgpId::Dgp3 => 0.0,
        }
    }

    pub fn truth(id: DgpId, estimand: Estimand) -> f64 {
        match estimand {
            Estimand::Srd => Self::srd(id),
            Estimand::Srk => Self::srk(id),
            Estimand::Srdp => srdp_truth(),
            Estimand::Frd => Self::srd(id) / srdp_truth(),
            Estimand::Frk => Self::srk(id) / srdp_truth(),
        }
    }
}
