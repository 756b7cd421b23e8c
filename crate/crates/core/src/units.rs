//! Physical constants, frequency conventions and isotropic material parameters.
//!
//! Rates are evaluated internally in angular frequency (rad/s). Anything a user
//! reads or writes (config files, CLI output, Python) is cyclic: Hz or GHz.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K (exact, SI 2019).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const GHZ: f64 = 1e9;
pub const NS: f64 = 1e-9;
pub const NM: f64 = 1e-9;

/// Snapshot of the constants used by every rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub h: f64,
    pub hbar: f64,
    pub k_b: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants { h: PLANCK, hbar: HBAR, k_b: BOLTZMANN };
}

/// Which frequency unit a number is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    CyclicHz,
    AngularRadPerS,
}

impl FrequencyConvention {
    /// Convert `value` from this convention into `target`.
    pub fn convert(self, value: f64, target: FrequencyConvention) -> f64 {
        use FrequencyConvention::*;
        match (self, target) {
            (CyclicHz, AngularRadPerS) => value * 2.0 * PI,
            (AngularRadPerS, CyclicHz) => value / (2.0 * PI),
            _ => value,
        }
    }
}

#[inline]
pub fn to_angular(cyclic_hz: f64) -> f64 {
    2.0 * PI * cyclic_hz
}

#[inline]
pub fn to_cyclic(angular: f64) -> f64 {
    angular / (2.0 * PI)
}

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Mass density, kg/m³.
    #[serde(rename = "rho_kg_m3")]
    pub rho: f64,
    /// Young's modulus, Pa.
    #[serde(rename = "youngs_Pa")]
    pub youngs: f64,
    /// Poisson ratio.
    #[serde(rename = "poisson")]
    pub poisson: f64,
}

impl MaterialParams {
    /// Isotropic diamond: ρ = 3515 kg/m³, E = 1050 GPa, ν = 0.2.
    pub const DIAMOND: MaterialParams = MaterialParams { rho: 3515.0, youngs: 1050e9, poisson: 0.2 };

    pub fn new(rho: f64, youngs: f64, poisson: f64) -> Result<Self> {
        let m = MaterialParams { rho, youngs, poisson };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::invalid(format!("mass density must be positive, got {}", self.rho)));
        }
        if !(self.youngs.is_finite() && self.youngs > 0.0) {
            return Err(Error::invalid(format!("Young's modulus must be positive, got {}", self.youngs)));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::invalid(format!("Poisson ratio must lie in (-1, 0.5), got {}", self.poisson)));
        }
        Ok(())
    }

    /// Lamé parameters (λ, μ) in Pa.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs, self.poisson);
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::DIAMOND
    }
}

/// Transverse and longitudinal bulk sound speeds, m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeeds {
    pub transverse: f64,
    pub longitudinal: f64,
}

/// `v_t = sqrt(E/ρ · 1/(2(1+ν)))`, `v_l = sqrt(E/ρ · (1−ν)/((1+ν)(1−2ν)))`.
pub fn wave_speeds(m: &MaterialParams) -> Result<WaveSpeeds> {
    m.validate()?;
    let stiffness = m.youngs / m.rho;
    let nu = m.poisson;
    Ok(WaveSpeeds {
        transverse: (stiffness / (2.0 * (1.0 + nu))).sqrt(),
        longitudinal: (stiffness * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))).sqrt(),
    })
}
