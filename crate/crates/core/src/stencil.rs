//! Second-order finite differences on [`Grid2D`].
//!
//! Interior nodes use central differences; boundary nodes use second-order
//! one-sided closures. The mixed derivative is the x-difference of the
//! y-difference, which reduces to the usual 4-point cross stencil inside.

use crate::error::Result;
use crate::grid::{Grid2D, RealField};

#[derive(Clone, Debug)]
pub struct Derivatives {
    pub dx: RealField,
    pub dy: RealField,
    pub dxx: RealField,
    pub dxy: RealField,
    pub dyy: RealField,
    pub lap: RealField,
}

/// First derivative along a line of `n` samples with spacing `h`.
fn d1_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let inv = 1.0 / (2.0 * h);
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
}

/// Second derivative along a line; the one-sided closure is the 4-point
/// second-order formula.
fn d2_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let inv = 1.0 / (h * h);
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * inv;
    }
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv;
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn apply_lines(f: &RealField, axis: Axis, op: fn(&[f64], f64, &mut [f64])) -> RealField {
    let g = f.grid;
    let n = g.n();
    let h = g.h();
    let mut out = vec![0.0; g.len()];
    let mut line = vec![0.0; n];
    let mut res = vec![0.0; n];
    for k in 0..n {
        for l in 0..n {
            line[l] = match axis {
                Axis::X => f.values[g.idx(l, k)],
                Axis::Y => f.values[g.idx(k, l)],
            };
        }
        op(&line, h, &mut res);
        for l in 0..n {
            let m = match axis {
                Axis::X => g.idx(l, k),
                Axis::Y => g.idx(k, l),
            };
            out[m] = res[l];
        }
    }
    RealField {
        grid: g,
        values: out,
    }
}

pub fn dx(f: &RealField) -> RealField {
    apply_lines(f, Axis::X, d1_line)
}

pub fn dy(f: &RealField) -> RealField {
    apply_lines(f, Axis::Y, d1_line)
}

pub fn dxx(f: &RealField) -> RealField {
    apply_lines(f, Axis::X, d2_line)
}

pub fn dyy(f: &RealField) -> RealField {
    apply_lines(f, Axis::Y, d2_line)
}

pub fn laplacian(f: &RealField) -> RealField {
    dxx(f).zip_with(&dyy(f), |a, b| a + b)
}

/// All first and second partial derivatives of `f`.
pub fn derivatives(f: &RealField) -> Result<Derivatives> {
    f.ensure_finite("derivative input")?;
    let fx = dx(f);
    let fy = dy(f);
    let fxx = dxx(f);
    let fyy = dyy(f);
    let fxy = dx(&fy);
    let lap = fxx.zip_with(&fyy, |a, b| a + b);
    Ok(Derivatives {
        dx: fx,
        dy: fy,
        dxx: fxx,
        dxy: fxy,
        dyy: fyy,
        lap,
    })
}

/// Interior-only stencil weights, used by the Newton assembly so that the
/// Jacobian and the residual share one definition.
pub(crate) struct InteriorStencil {
    pub n: usize,
    pub inv_2h: f64,
    pub inv_h2: f64,
}

impl InteriorStencil {
    pub fn new(grid: &Grid2D) -> Self {
        let h = grid.h();
        Self {
            n: grid.n(),
            inv_2h: 1.0 / (2.0 * h),
            inv_h2: 1.0 / (h * h),
        }
    }

    #[inline]
    pub fn dx(&self, f: &[f64], m: usize) -> f64 {
        (f[m + 1] - f[m - 1]) * self.inv_2h
    }

    #[inline]
    pub fn dy(&self, f: &[f64], m: usize) -> f64 {
        (f[m + self.n] - f[m - self.n]) * self.inv_2h
    }

    #[inline]
    pub fn lap(&self, f: &[f64], m: usize) -> f64 {
        (f[m + 1] + f[m - 1] + f[m + self.n] + f[m - self.n] - 4.0 * f[m]) * self.inv_h2
    }
}
