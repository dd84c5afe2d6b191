//! Polytropic gas relations.
//!
//! Pressure `p = A e^{S/cv} rho^gamma`, enthalpy `tau(rho, S)`, its inverse `H(xi, tau)`
//! and the temperature and sound speed used by the vorticity source.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("vacuum: enthalpy argument {tau} is not positive")]
    Vacuum { tau: f64 },
    #[error("invalid gas parameters: {0}")]
    InvalidGas(String),
}

/// Gas constants: adiabatic exponent, pressure coefficient and specific heat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasParams {
    pub gamma: f64,
    pub a: f64,
    pub cv: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self { gamma: 1.4, a: 1.0, cv: 1.0 }
    }
}

impl GasParams {
    pub fn new(gamma: f64, a: f64, cv: f64) -> Result<Self, ThermoError> {
        let gas = Self { gamma, a, cv };
        gas.validate()?;
        Ok(gas)
    }

    pub fn validate(&self) -> Result<(), ThermoError> {
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(ThermoError::InvalidGas(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(ThermoError::InvalidGas(format!("A must be positive, got {}", self.a)));
        }
        if !(self.cv.is_finite() && self.cv > 0.0) {
            return Err(ThermoError::InvalidGas(format!("cv must be positive, got {}", self.cv)));
        }
        Ok(())
    }

    /// `A e^{S/cv}`, the entropy-dependent pressure coefficient.
    #[inline]
    pub fn entropy_factor(&self, s: f64) -> f64 {
        self.a * (s / self.cv).exp()
    }

    pub fn pressure(&self, rho: f64, s: f64) -> Result<f64, ThermoError> {
        check_density(rho)?;
        Ok(self.entropy_factor(s) * rho.powf(self.gamma))
    }

    /// Specific enthalpy `tau(rho, S) = gamma A e^{S/cv} rho^{gamma-1} / (gamma - 1)`.
    pub fn enthalpy(&self, rho: f64, s: f64) -> Result<f64, ThermoError> {
        check_density(rho)?;
        let g = self.gamma;
        Ok(g * self.entropy_factor(s) * rho.powf(g - 1.0) / (g - 1.0))
    }

    /// Density from entropy and enthalpy, the inverse of [`GasParams::enthalpy`].
    #[inline]
    pub fn density_h(&self, xi: f64, tau: f64) -> Result<f64, ThermoError> {
        if !(tau > 0.0) {
            return Err(ThermoError::Vacuum { tau });
        }
        let g = self.gamma;
        let base = (g - 1.0) * tau / (g * self.a) * (-xi / self.cv).exp();
        Ok(base.powf(1.0 / (g - 1.0)))
    }

    /// `dH/dtau = H / ((gamma - 1) tau) = rho / c^2`.
    pub fn density_h_tau(&self, xi: f64, tau: f64) -> Result<f64, ThermoError> {
        let h = self.density_h(xi, tau)?;
        Ok(h / ((self.gamma - 1.0) * tau))
    }

    pub fn temperature(&self, rho: f64, s: f64) -> Result<f64, ThermoError> {
        check_density(rho)?;
        let g = self.gamma;
        Ok(self.entropy_factor(s) * rho.powf(g - 1.0) / (self.cv * (g - 1.0)))
    }

    pub fn sound_speed_sq(&self, rho: f64, s: f64) -> Result<f64, ThermoError> {
        check_density(rho)?;
        let g = self.gamma;
        Ok(g * self.entropy_factor(s) * rho.powf(g - 1.0))
    }

    /// Bernoulli function `|u|^2/2 + tau(rho, S)`.
    pub fn bernoulli(&self, rho: f64, speed_sq: f64, s: f64) -> Result<f64, ThermoError> {
        Ok(0.5 * speed_sq + self.enthalpy(rho, s)?)
    }

    /// Enthalpy from pressure and entropy.
    pub fn enthalpy_from_pressure(&self, p: f64, s: f64) -> Result<f64, ThermoError> {
        if !(p > 0.0) {
            return Err(ThermoError::InvalidGas(format!("pressure must be positive, got {p}")));
        }
        let rho = (p / self.entropy_factor(s)).powf(1.0 / self.gamma);
        self.enthalpy(rho, s)
    }
}

#[inline]
fn check_density(rho: f64) -> Result<(), ThermoError> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(ThermoError::NonPositiveDensity(rho))
    }
}
