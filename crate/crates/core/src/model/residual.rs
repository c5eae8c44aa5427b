//! Amplitude-phase and complex residuals of the stationary equation
//! `0 = Delta A + A - A|A|^2 + eps g`.

use num_complex::Complex64;

use crate::error::{GlError, Result};
use crate::grid::{ComplexField, Grid2D, RealField};
use crate::model::farfield::{CorrectorFields, Cutoff};
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::params::GLParams;
use crate::stencil;

/// Unknowns of the bordered ansatz.
///
/// Total amplitude: `tau + s + c * Pa` with the slaved corrector
/// `Pa = -d/dx[chi ln(alpha x^2 + y^2)] / (2 tau^2)`.
/// Total phase: `k x + phi0 + phi_loc + phi_inf chi + c / (2 k tau) chi ln(alpha x^2 + y^2)`.
///
/// `chi` is the state's own cutoff; a state is only meaningful together with it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateAP {
    pub s: RealField,
    pub phi_loc: RealField,
    pub c: f64,
    pub phi_inf: f64,
    pub cutoff: Cutoff,
}

impl StateAP {
    pub fn zero(grid: Grid2D) -> Self {
        Self::zero_with_cutoff(grid, Cutoff::default())
    }

    pub fn zero_with_cutoff(grid: Grid2D, cutoff: Cutoff) -> Self {
        Self {
            s: RealField::zeros(grid),
            phi_loc: RealField::zeros(grid),
            c: 0.0,
            phi_inf: 0.0,
            cutoff,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.s.grid
    }

    pub fn ensure_finite(&self) -> Result<()> {
        self.s.ensure_finite("s")?;
        self.phi_loc.ensure_finite("phi_loc")?;
        if !(self.c.is_finite() && self.phi_inf.is_finite()) {
            return Err(GlError::NonFinite {
                what: "scalar unknowns",
                index: 0,
            });
        }
        Ok(())
    }
}

/// Local values of the total fields at one node.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct NodeValues {
    pub amp: f64,
    pub s_x: f64,
    pub s_y: f64,
    pub lap_s: f64,
    pub theta: f64,
    pub th_x: f64,
    pub th_y: f64,
    pub lap_phi: f64,
    pub g: Complex64,
}

impl NodeValues {
    /// `(R_amp, R_phase)`
    #[inline]
    pub fn residual(&self, eps: f64) -> (f64, f64) {
        let grad2 = self.th_x * self.th_x + self.th_y * self.th_y;
        let forcing = eps * self.g * Complex64::from_polar(1.0, -self.theta);
        let r_amp = self.lap_s + self.amp - self.amp * grad2 - self.amp.powi(3) + forcing.re;
        let r_phase = self.lap_phi
            + (2.0 * (self.s_x * self.th_x + self.s_y * self.th_y) + forcing.im) / self.amp;
        (r_amp, r_phase)
    }
}

/// Everything the residual needs that does not change between Newton steps.
#[derive(Clone, Debug)]
pub struct ApModel {
    pub params: GLParams,
    pub grid: Grid2D,
    pub cutoff: Cutoff,
    pub correctors: CorrectorFields,
    pub g: ComplexField,
}

impl ApModel {
    pub fn new(params: GLParams, g: &Inhomogeneity, grid: Grid2D) -> Result<Self> {
        Self::with_cutoff(params, g, grid, Cutoff::default())
    }

    /// Zero state carrying this model's cutoff.
    pub fn zero_state(&self) -> StateAP {
        StateAP::zero_with_cutoff(self.grid, self.cutoff.clone())
    }

    pub fn with_cutoff(
        params: GLParams,
        g: &Inhomogeneity,
        grid: Grid2D,
        cutoff: Cutoff,
    ) -> Result<Self> {
        let correctors = CorrectorFields::new(&cutoff, &params, &grid);
        Ok(Self {
            params,
            grid,
            cutoff,
            correctors,
            g: g.sample(&grid)?,
        })
    }

    /// `c / (2 k tau)`: coefficient of `chi ln(alpha x^2 + y^2)` in the phase.
    pub fn log_scale(&self) -> f64 {
        1.0 / (2.0 * self.params.k * self.params.tau)
    }

    /// Assemble total-field values from local values (`s`, derivatives of
    /// `s` and `phi_loc`) at node `m`.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    pub(crate) fn node_values(
        &self,
        m: usize,
        s: f64,
        s_x: f64,
        s_y: f64,
        lap_s: f64,
        phi: f64,
        phi_x: f64,
        phi_y: f64,
        lap_phi: f64,
        c: f64,
        phi_inf: f64,
    ) -> NodeValues {
        let p = &self.params;
        let cr = &self.correctors.nodes[m];
        let cq = c * self.log_scale();
        let (x, _) = self.grid.xy(m);
        NodeValues {
            amp: p.tau + s + c * cr.amp[0],
            s_x: s_x + c * cr.amp[1],
            s_y: s_y + c * cr.amp[2],
            lap_s: lap_s + c * cr.amp[3],
            theta: p.k * x + p.phi0 + phi + phi_inf * cr.chi[0] + cq * cr.q[0],
            th_x: p.k + phi_x + phi_inf * cr.chi[1] + cq * cr.q[1],
            th_y: phi_y + phi_inf * cr.chi[2] + cq * cr.q[2],
            lap_phi: lap_phi + phi_inf * cr.chi[3] + cq * cr.q[3],
            g: self.g.values[m],
        }
    }

    /// Total amplitude `tau + s + c Pa` at every node.
    pub fn total_amplitude(&self, state: &StateAP) -> RealField {
        let tau = self.params.tau;
        RealField {
            grid: self.grid,
            values: (0..self.grid.len())
                .map(|m| tau + state.s.values[m] + state.c * self.correctors.nodes[m].amp[0])
                .collect(),
        }
    }

    /// Total phase `Theta` (including `k x`) at every node.
    pub fn total_phase(&self, state: &StateAP) -> RealField {
        let p = &self.params;
        let cq = state.c * self.log_scale();
        RealField {
            grid: self.grid,
            values: (0..self.grid.len())
                .map(|m| {
                    let cr = &self.correctors.nodes[m];
                    let (x, _) = self.grid.xy(m);
                    p.k * x
                        + p.phi0
                        + state.phi_loc.values[m]
                        + state.phi_inf * cr.chi[0]
                        + cq * cr.q[0]
                })
                .collect(),
        }
    }

    pub fn check_amplitude(&self, state: &StateAP) -> Result<()> {
        let threshold = 0.1 * self.params.tau;
        let min_amplitude = self
            .total_amplitude(state)
            .values
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_amplitude <= threshold {
            return Err(GlError::AmplitudeCollapse {
                min_amplitude,
                threshold,
            });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, state: &StateAP) -> Result<()> {
        if state.grid() != self.grid {
            return Err(GlError::ShapeMismatch {
                expected: self.grid.len(),
                got: state.grid().len(),
            });
        }
        if state.cutoff != self.cutoff {
            return Err(GlError::param(
                "cutoff",
                "state and model use different cutoffs",
            ));
        }
        state.ensure_finite()
    }

    /// `(R_amp, R_phase)` at every node; boundary nodes use the one-sided closures.
    pub fn residual_ap(&self, state: &StateAP) -> Result<(RealField, RealField)> {
        self.check_state(state)?;
        self.check_amplitude(state)?;
        let ds = stencil::derivatives(&state.s)?;
        let dp = stencil::derivatives(&state.phi_loc)?;
        let mut r_amp = RealField::zeros(self.grid);
        let mut r_phase = RealField::zeros(self.grid);
        for m in 0..self.grid.len() {
            let v = self.node_values(
                m,
                state.s.values[m],
                ds.dx.values[m],
                ds.dy.values[m],
                ds.lap.values[m],
                state.phi_loc.values[m],
                dp.dx.values[m],
                dp.dy.values[m],
                dp.lap.values[m],
                state.c,
                state.phi_inf,
            );
            let (ra, rp) = v.residual(self.params.eps);
            r_amp.values[m] = ra;
            r_phase.values[m] = rp;
        }
        Ok((r_amp, r_phase))
    }

    /// `A = (tau + s + c Pa) exp(i Theta)`
    pub fn reconstruct(&self, state: &StateAP) -> ComplexField {
        let amp = self.total_amplitude(state);
        let phase = self.total_phase(state);
        ComplexField {
            grid: self.grid,
            values: amp
                .values
                .iter()
                .zip(&phase.values)
                .map(|(&r, &t)| Complex64::from_polar(r, t))
                .collect(),
        }
    }

    pub fn residual_complex(&self, a: &ComplexField) -> Result<ComplexField> {
        residual_complex_with(a, &self.g, self.params.eps)
    }
}

pub fn residual_ap(
    state: &StateAP,
    params: &GLParams,
    g: &Inhomogeneity,
    grid: &Grid2D,
) -> Result<(RealField, RealField)> {
    ApModel::with_cutoff(*params, g, *grid, state.cutoff.clone())?.residual_ap(state)
}

pub fn reconstruct_a(state: &StateAP, params: &GLParams, grid: &Grid2D) -> Result<ComplexField> {
    let model = ApModel::with_cutoff(
        *params,
        &Inhomogeneity::unit_gaussian(),
        *grid,
        state.cutoff.clone(),
    )?;
    model.check_state(state)?;
    Ok(model.reconstruct(state))
}

fn residual_complex_with(a: &ComplexField, g: &ComplexField, eps: f64) -> Result<ComplexField> {
    a.ensure_finite("A")?;
    let lap_re = stencil::laplacian(&a.re());
    let lap_im = stencil::laplacian(&a.im());
    Ok(ComplexField {
        grid: a.grid,
        values: (0..a.grid.len())
            .map(|m| {
                let z = a.values[m];
                Complex64::new(lap_re.values[m], lap_im.values[m]) + z - z * z.norm_sqr()
                    + eps * g.values[m]
            })
            .collect(),
    })
}

/// `Delta A + A - A|A|^2 + eps g` at every node.
pub fn residual_complex(
    a: &ComplexField,
    params: &GLParams,
    g: &Inhomogeneity,
    grid: &Grid2D,
) -> Result<ComplexField> {
    residual_complex_with(a, &g.sample(grid)?, params.eps)
}
