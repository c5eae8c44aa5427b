//! Phase reconstruction from its scaled gradient by integration along rays.

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{Grid2D, RealField};
use crate::model::params::GLParams;

/// Bilinear interpolation; points outside the grid are clamped to it.
pub fn bilinear(f: &RealField, x: f64, y: f64) -> f64 {
    let g = f.grid;
    let n = g.n();
    let h = g.h();
    let to_index = |c: f64| {
        let u = ((c + g.half_width()) / h).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        (i, u - i as f64)
    };
    let (i, tx) = to_index(x);
    let (j, ty) = to_index(y);
    let v = |a: usize, b: usize| f.values[g.idx(a, b)];
    (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i + 1, j))
        + ty * ((1.0 - tx) * v(i, j + 1) + tx * v(i + 1, j + 1))
}

/// `phi0 + 1/(2 k tau) int_0^1 (psi(tx, ty) x + theta(tx, ty) y) dt` at every node.
///
/// Composite Simpson along the ray with roughly one panel per grid spacing.
pub fn phase_from_gradient(
    psi: &RealField,
    theta: &RealField,
    params: &GLParams,
    grid: &Grid2D,
    phi0: f64,
) -> Result<RealField> {
    psi.ensure_finite("psi")?;
    theta.ensure_finite("theta")?;
    let scale = 1.0 / (2.0 * params.k * params.tau);
    let h = grid.h();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let (x, y) = grid.xy(m);
            let r = x.hypot(y);
            if r == 0.0 {
                return phi0;
            }
            let panels = 2 * ((r / h).ceil() as usize).max(1);
            let dt = 1.0 / panels as f64;
            let integrand = |t: f64| {
                bilinear(psi, t * x, t * y) * x + bilinear(theta, t * x, t * y) * y
            };
            let mut acc = integrand(0.0) + integrand(1.0);
            for p in 1..panels {
                let w = if p % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * integrand(p as f64 * dt);
            }
            phi0 + scale * acc * dt / 3.0
        })
        .collect();
    Ok(RealField {
        grid: *grid,
        values,
    })
}
