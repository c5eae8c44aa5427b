use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};

pub const DEFAULT_K_MIN: f64 = 1e-3;
pub const DEFAULT_ECKHAUS_MARGIN: f64 = 1e-2;

/// `1/sqrt(3)`: rolls are Eckhaus-unstable beyond this wavenumber.
pub fn eckhaus_wavenumber() -> f64 {
    1.0 / 3.0_f64.sqrt()
}

/// Roll wavenumber and the constants derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GLParams {
    pub k: f64,
    /// `sqrt(1 - k^2)`, the roll amplitude.
    pub tau: f64,
    /// `2 tau^2`
    pub a: f64,
    /// `4 k^2`
    pub b: f64,
    /// `(1 - k^2) / (1 - 3 k^2)`
    pub alpha: f64,
    pub eps: f64,
    pub phi0: f64,
}

impl GLParams {
    pub fn new(k: f64, eps: f64, phi0: f64) -> Result<Self> {
        Self::with_margins(k, eps, phi0, DEFAULT_K_MIN, DEFAULT_ECKHAUS_MARGIN)
    }

    pub fn with_margins(k: f64, eps: f64, phi0: f64, k_min: f64, margin: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(GlError::param("k", "must be finite"));
        }
        let bound = eckhaus_wavenumber() - margin;
        if k.abs() >= bound {
            return Err(GlError::param(
                "k",
                format!(
                    "|k| = {} violates the Eckhaus bound |k| < 1/sqrt(3) - {margin} = {bound:.6}",
                    k.abs()
                ),
            ));
        }
        if k.abs() < k_min {
            return Err(GlError::param(
                "k",
                format!("|k| = {} is below k_min = {k_min} (degenerate coupling)", k.abs()),
            ));
        }
        if !eps.is_finite() {
            return Err(GlError::param("eps", "must be finite"));
        }
        if !phi0.is_finite() {
            return Err(GlError::param("phi0", "must be finite"));
        }
        Ok(Self::unchecked(k, eps, phi0))
    }

    /// No range checks: used by the symbol diagnostics, which are also
    /// evaluated at `k = 0` and on the Eckhaus-unstable side (`|k| < 1` only).
    pub fn unchecked(k: f64, eps: f64, phi0: f64) -> Self {
        let tau2 = 1.0 - k * k;
        Self {
            k,
            tau: tau2.sqrt(),
            a: 2.0 * tau2,
            b: 4.0 * k * k,
            alpha: tau2 / (1.0 - 3.0 * k * k),
            eps,
            phi0,
        }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    pub fn with_phi0(self, phi0: f64) -> Self {
        Self { phi0, ..self }
    }

    /// `sqrt(1 - 3k^2) / (pi (1 - k^2))`, prefactor of the c1 quadrature.
    pub fn c1_prefactor(&self) -> f64 {
        (1.0 - 3.0 * self.k * self.k).sqrt() / (std::f64::consts::PI * (1.0 - self.k * self.k))
    }

    /// Long-wave phase diffusivity along the roll direction, `1 / alpha`.
    pub fn d_parallel(&self) -> f64 {
        (1.0 - 3.0 * self.k * self.k) / (1.0 - self.k * self.k)
    }
}
