//! Leading-order log coefficient `c1(phi)` and the selected phases.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::{ComplexField, Grid2D, RealField};
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::params::GLParams;
use crate::quadrature;

/// Below this `|G_hat|` no leading-order phase is selected.
pub const DEGENERATE_G_HAT: f64 = 1e-12;

/// `iint g(x, y) e^{-ikx} dx dy` by trapezoid quadrature.
pub fn g_hat(g: &Inhomogeneity, k: f64, grid: &Grid2D) -> Result<Complex64> {
    let gs = g.sample(grid)?;
    g_hat_sampled(&gs, k)
}

pub(crate) fn g_hat_sampled(gs: &ComplexField, k: f64) -> Result<Complex64> {
    let grid = gs.grid;
    let integrand = ComplexField {
        grid,
        values: (0..grid.len())
            .map(|m| gs.values[m] * Complex64::from_polar(1.0, -k * grid.xy(m).0))
            .collect(),
    };
    quadrature::integrate_complex(&integrand)
}

/// `c1(phi) = kappa iint Im[g e^{-i(kx + phi)}]`, `kappa = sqrt(1-3k^2) / (pi (1-k^2))`.
///
/// Computed by direct quadrature and cross-checked against
/// `kappa Im[G_hat e^{-i phi}]`.
pub fn c1_of_phi(g: &Inhomogeneity, params: &GLParams, grid: &Grid2D, phi: f64) -> Result<f64> {
    let gs = g.sample(grid)?;
    let kappa = params.c1_prefactor();
    let integrand = RealField {
        grid: *grid,
        values: (0..grid.len())
            .map(|m| {
                let (x, _) = grid.xy(m);
                (gs.values[m] * Complex64::from_polar(1.0, -(params.k * x + phi))).im
            })
            .collect(),
    };
    let direct = kappa * quadrature::integrate(&integrand)?;
    let ghat = g_hat_sampled(&gs, params.k)?;
    let via_transform = kappa * (ghat * Complex64::from_polar(1.0, -phi)).im;
    let scale = kappa * ghat.norm().max(1.0);
    if (direct - via_transform).abs() > 1e-8 * scale {
        return Err(GlError::Consistency(format!(
            "c1 quadrature {direct} disagrees with transform form {via_transform}"
        )));
    }
    Ok(direct)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedPhases {
    /// `arg G_hat` in `[0, 2 pi)`; `c1' = -kappa |G_hat|` there.
    pub phi1: f64,
    /// `phi1 + pi` in `[0, 2 pi)`; `c1' = +kappa |G_hat|` there.
    pub phi2: f64,
    pub slope1: f64,
    pub slope2: f64,
    pub g_hat: Complex64,
}

pub fn selected_phase(
    g: &Inhomogeneity,
    params: &GLParams,
    grid: &Grid2D,
) -> Result<SelectedPhases> {
    let ghat = g_hat(g, params.k, grid)?;
    if ghat.norm() <= DEGENERATE_G_HAT {
        return Err(GlError::DegenerateInhomogeneity(ghat.norm()));
    }
    let kappa = params.c1_prefactor();
    let phi1 = ghat.arg().rem_euclid(TAU);
    let phi2 = (phi1 + PI).rem_euclid(TAU);
    for phi in [phi1, phi2] {
        let c = c1_of_phi(g, params, grid, phi)?;
        if c.abs() > 1e-10 * ghat.norm().max(1.0) {
            return Err(GlError::Consistency(format!(
                "c1 at selected phase {phi} is {c}, expected 0"
            )));
        }
    }
    Ok(SelectedPhases {
        phi1,
        phi2,
        slope1: -kappa * ghat.norm(),
        slope2: kappa * ghat.norm(),
        g_hat: ghat,
    })
}

/// Leading-order `c` from the flux balance of the far-field phase equation,
/// `-eps k sqrt(alpha) Im[G_hat e^{-i phi0}] / (2 pi)`, in the normalization
/// where the phase carries `c / (2 k tau) ln(alpha x^2 + y^2)`. It equals
/// `eps c1(phi0)` times `-k tau alpha / 2`.
pub fn c_flux_balance(g: &Inhomogeneity, params: &GLParams, grid: &Grid2D) -> Result<f64> {
    let ghat = g_hat(g, params.k, grid)?;
    let h = (ghat * Complex64::from_polar(1.0, -params.phi0)).im;
    Ok(-params.eps * params.k * params.alpha.sqrt() * h / (2.0 * PI))
}
