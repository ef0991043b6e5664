//! System constants. Every frequency is stored in units of the mechanical
//! frequency, so `omega_m == 1` internally.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams<T> {
    #[serde(rename = "g0_over_omega_m")]
    g0: T,
    #[serde(rename = "gamma_c_over_omega_m")]
    gamma_c: T,
}

impl<T: Real> SystemParams<T> {
    /// From the dimensionless ratios `g0 / omega_m` and `gamma_c / omega_m`.
    pub fn from_ratios(g0: T, gamma_c: T) -> Result<Self> {
        if !g0.is_finite() || g0 < T::zero() {
            return Err(invalid(format!("g0/omega_m must be finite and >= 0, got {g0:e}")));
        }
        if !gamma_c.is_finite() || gamma_c <= T::zero() {
            return Err(invalid(format!("gamma_c/omega_m must be finite and > 0, got {gamma_c:e}")));
        }
        Ok(Self { g0, gamma_c })
    }

    /// From raw frequencies in any common unit.
    pub fn from_raw(g0: T, gamma_c: T, omega_m: T) -> Result<Self> {
        if !omega_m.is_finite() || omega_m <= T::zero() {
            return Err(invalid(format!("omega_m must be finite and > 0, got {omega_m:e}")));
        }
        Self::from_ratios(g0 / omega_m, gamma_c / omega_m)
    }

    pub fn g0(&self) -> T {
        self.g0
    }

    pub fn gamma_c(&self) -> T {
        self.gamma_c
    }

    pub fn omega_m(&self) -> T {
        T::one()
    }

    /// Displacement `beta0 = g0 / omega_m` of the photon-dressed oscillator.
    pub fn beta0(&self) -> T {
        self.g0 / self.omega_m()
    }

    /// Polaron shift `delta = g0^2 / omega_m`.
    pub fn delta(&self) -> T {
        self.g0 * self.g0 / self.omega_m()
    }

    /// Flat cavity-continuum coupling `xi_c = sqrt(gamma_c / 2 pi)`.
    pub fn continuum_coupling(&self) -> T {
        (self.gamma_c / (lit::<T>(2.0) * T::pi())).sqrt()
    }
}

/// Lorentzian single-photon wave packet centred at `center` with half width
/// `width` (both in units of omega_m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPacket<T> {
    #[serde(rename = "center_over_omega_m")]
    center: T,
    #[serde(rename = "width_over_omega_m")]
    width: T,
}

impl<T: Real> LorentzianPacket<T> {
    pub fn new(center: T, width: T) -> Result<Self> {
        if !center.is_finite() {
            return Err(invalid("packet center must be finite"));
        }
        if !width.is_finite() || width <= T::zero() {
            return Err(invalid(format!("packet width must be > 0, got {width:e}")));
        }
        Ok(Self { center, width })
    }

    pub fn center(&self) -> T {
        self.center
    }

    pub fn width(&self) -> T {
        self.width
    }
}
