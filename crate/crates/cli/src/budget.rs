//! Squeezing budget for a collective-decay scheme with weak independent decay.
//!
//! Rates are angular frequencies (rad/s when physical); `*_hz` fields divide
//! by 2π for display.

use crate::error::Result;
use crate::fit::PowerLawFit;
use serde::{Deserialize, Serialize};
use spinsq_core::Error as CoreError;
use std::f64::consts::PI;

/// `ξ²_min ≈ A·N^b` for the driven model at `Vx = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub prefactor: f64,
    pub exponent: f64,
}

impl ScalingLaw {
    pub const DEFAULT: ScalingLaw = ScalingLaw { prefactor: 1.70, exponent: -0.29 };

    pub fn xi2(&self, n: f64) -> f64 {
        self.prefactor * n.powf(self.exponent)
    }
}

impl Default for ScalingLaw {
    fn default() -> Self {
        ScalingLaw::DEFAULT
    }
}

impl From<PowerLawFit> for ScalingLaw {
    fn from(f: PowerLawFit) -> Self {
        ScalingLaw { prefactor: f.prefactor, exponent: f.exponent }
    }
}

/// γi·τ above this is outside the weak-independent-decay regime.
pub const REGIME_LIMIT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetInput {
    pub n_atoms: f64,
    pub cooperativity: f64,
    pub gamma_i: f64,
    /// Strong `Vx ≫ γc` interaction, which halves the collective-only ξ².
    pub large_vx: bool,
    pub law: ScalingLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub input: BudgetInput,
    pub gamma_c: f64,
    pub gamma_c_hz: f64,
    pub gamma_i_hz: f64,
    pub xi2_0: f64,
    /// `2/(N𝒞ξ²₀)`
    pub correction: f64,
    pub xi2_total: f64,
    /// Relaxation time `1/|λ|`, with `|λ| = γc·ξ²₀/2` at `Vx = 0`.
    pub tau: f64,
    pub omega_c: f64,
    pub omega_c_hz: f64,
    pub gamma_i_tau: f64,
    pub regime_warning: bool,
    pub law_default: ScalingLaw,
}

pub fn budget(input: BudgetInput) -> Result<BudgetReport> {
    let BudgetInput { n_atoms: n, cooperativity: c, gamma_i, large_vx, law } = input;
    let finite = [n, c, gamma_i, law.prefactor, law.exponent].iter().all(|v| v.is_finite());
    if !finite || !(n * c > 0.0) || !(n >= 1.0) || !(gamma_i > 0.0) || !(law.prefactor > 0.0) {
        return Err(CoreError::InvalidParameter("budget needs N ≥ 1, 𝒞 > 0, γi > 0 and a positive law".into()).into());
    }
    let gamma_c = n * c * gamma_i;
    let xi2_vx0 = law.xi2(n);
    let xi2_0 = if large_vx { 0.5 * xi2_vx0 } else { xi2_vx0 };
    let correction = 2.0 / (n * c * xi2_0);
    // The slowest rate is set by the drive alone, so τ uses the Vx = 0 value.
    let tau = 2.0 / (gamma_c * xi2_vx0);
    let omega_c = 0.5 * gamma_c;
    let gamma_i_tau = gamma_i * tau;
    Ok(BudgetReport {
        input,
        gamma_c,
        gamma_c_hz: gamma_c / (2.0 * PI),
        gamma_i_hz: gamma_i / (2.0 * PI),
        xi2_0,
        correction,
        xi2_total: xi2_0 + correction,
        tau,
        omega_c,
        omega_c_hz: omega_c / (2.0 * PI),
        gamma_i_tau,
        regime_warning: gamma_i_tau > REGIME_LIMIT,
        law_default: ScalingLaw::DEFAULT,
    })
}
