//! Fourier-symbol diagnostics of the linearization at the roll, cokernel
//! pairings of the extended operator `T`, and the bordering integrals.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::{Grid2D, RealField};
use crate::model::farfield::{p1_coefficient, Cutoff};
use crate::model::params::GLParams;
use crate::quadrature::{self, CompensatedSum};
use crate::stencil;

/// Eigenvalues of `[[-q^2 - 2 tau^2, -2 k tau i xi], [(2k/tau) i xi, -q^2]]`,
/// most negative first.
///
/// Both are real. The soft one is formed as `det / lambda_big` with the
/// determinant written as a sum of nonnegative terms whenever `3k^2 <= 1`,
/// so its sign is exact.
pub fn l_symbol_eigs(xi: f64, eta: f64, params: &GLParams) -> [Complex64; 2] {
    let tau2 = params.tau * params.tau;
    let k2 = params.k * params.k;
    let q2 = xi * xi + eta * eta;
    let det = xi * xi * (q2 + 2.0 * tau2 - 4.0 * k2) + eta * eta * (q2 + 2.0 * tau2);
    let tr = -2.0 * q2 - 2.0 * tau2;
    let disc = 4.0 * tau2 * tau2 + 16.0 * k2 * xi * xi;
    let big = 0.5 * (tr - disc.sqrt());
    let soft = if big == 0.0 { 0.0 } else { det / big };
    [Complex64::new(big, 0.0), Complex64::new(soft, 0.0)]
}

/// The symbol matrix itself, for residual checks.
pub fn l_symbol_matrix(xi: f64, eta: f64, params: &GLParams) -> [[Complex64; 2]; 2] {
    let q2 = xi * xi + eta * eta;
    let (k, tau) = (params.k, params.tau);
    [
        [
            Complex64::new(-q2 - 2.0 * tau * tau, 0.0),
            Complex64::new(0.0, -2.0 * k * tau * xi),
        ],
        [Complex64::new(0.0, 2.0 * k / tau * xi), Complex64::new(-q2, 0.0)],
    ]
}

/// Sampled Fourier modes `(xi, eta)`.
#[derive(Clone, Debug)]
pub struct ModeGrid {
    pub axis: Vec<f64>,
    pub modes: Vec<(f64, f64)>,
}

impl ModeGrid {
    /// Tensor grid of an axis that is linear with step `step` on
    /// `[-inner, inner]` and geometric (ratio `ratio`) out to `outer`.
    pub fn log_linear(inner: f64, step: f64, outer: f64, ratio: f64) -> Result<Self> {
        if !(step > 0.0 && inner > 0.0 && outer > inner && ratio > 1.0) {
            return Err(GlError::param("mode_grid", "need 0 < step, 0 < inner < outer, ratio > 1"));
        }
        let half = (inner / step).round() as i64;
        let mut positive: Vec<f64> = (1..=half).map(|i| i as f64 * step).collect();
        let mut r = half as f64 * step;
        while r < outer {
            r = (r * ratio).min(outer);
            positive.push(r);
        }
        let mut axis: Vec<f64> = positive.iter().rev().map(|v| -v).collect();
        axis.push(0.0);
        axis.extend(&positive);
        let modes = axis
            .iter()
            .flat_map(|&eta| axis.iter().map(move |&xi| (xi, eta)))
            .collect();
        Ok(Self { axis, modes })
    }

    /// Step 0.005 on `[-0.2, 0.2]`, geometric to 4.
    pub fn standard() -> Self {
        Self::log_linear(0.2, 0.005, 4.0, 1.05).expect("valid standard grid")
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SymbolSample {
    pub xi: f64,
    pub eta: f64,
    pub eigs: [Complex64; 2],
    /// `None` where the multiplier is undefined (`3k^2 >= 1`) or at the origin.
    pub m_hat: Option<f64>,
    pub m_hat_inv: Option<f64>,
}

pub fn symbol_table(params: &GLParams, modes: &ModeGrid) -> Vec<SymbolSample> {
    modes
        .modes
        .par_iter()
        .map(|&(xi, eta)| {
            let m = m_hat(xi, eta, params).ok().flatten();
            SymbolSample {
                xi,
                eta,
                eigs: l_symbol_eigs(xi, eta, params),
                m_hat: m,
                m_hat_inv: m.map(|v| 1.0 / v),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EckhausReport {
    pub max_real_part: f64,
    pub argmax: (f64, f64),
    /// Fitted `d` in `lambda_soft(xi, 0) = -d xi^2 + e xi^4` over `0 < |xi| <= 0.05`.
    pub d_parallel: f64,
    pub d_parallel_expected: f64,
    pub fit_points: usize,
    pub modes: usize,
}

pub fn eckhaus_report(params: &GLParams, modes: &ModeGrid) -> Result<EckhausReport> {
    let (max_real_part, argmax) = modes
        .modes
        .par_iter()
        .map(|&(xi, eta)| {
            let e = l_symbol_eigs(xi, eta, params);
            (e[0].re.max(e[1].re), (xi, eta))
        })
        .reduce(
            || (f64::NEG_INFINITY, (0.0, 0.0)),
            |a, b| if b.0 > a.0 { b } else { a },
        );

    // least squares for (d, e) on lambda = -d xi^2 + e xi^4
    let pts: Vec<(f64, f64)> = modes
        .axis
        .iter()
        .filter(|&&xi| xi != 0.0 && xi.abs() <= 0.05 + 1e-12)
        .map(|&xi| (xi, l_symbol_eigs(xi, 0.0, params)[1].re))
        .collect();
    if pts.len() < 3 {
        return Err(GlError::param(
            "mode_grid",
            "need at least three modes with 0 < |xi| <= 0.05 for the long-wave fit",
        ));
    }
    let (mut s22, mut s24, mut s44, mut r2, mut r4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(xi, lam) in &pts {
        let (a, b) = (-xi * xi, xi.powi(4));
        s22 += a * a;
        s24 += a * b;
        s44 += b * b;
        r2 += a * lam;
        r4 += b * lam;
    }
    let det = s22 * s44 - s24 * s24;
    let d_parallel = (r2 * s44 - r4 * s24) / det;
    Ok(EckhausReport {
        max_real_part,
        argmax,
        d_parallel,
        d_parallel_expected: params.d_parallel(),
        fit_points: pts.len(),
        modes: modes.len(),
    })
}

/// `M(xi, eta) = q^2 / (q^2 - (b/a) xi^2) - b xi^2 / ((q^2 + a)(q^2 - (b/a) xi^2))`,
/// evaluated as `a / (q^2 + a) + q^4 / ((q^2 + a) D)` with
/// `D = (1 - b/a) xi^2 + eta^2`. `Ok(None)` at the origin.
pub fn m_hat(xi: f64, eta: f64, params: &GLParams) -> Result<Option<f64>> {
    let ratio = params.b / params.a;
    if ratio >= 1.0 {
        return Err(GlError::param(
            "k",
            "multiplier undefined for k^2 >= 1/3 (denominator vanishes on a cone)",
        ));
    }
    let q2 = xi * xi + eta * eta;
    if q2 == 0.0 {
        return Ok(None);
    }
    let d = (1.0 - ratio) * xi * xi + eta * eta;
    Ok(Some(params.a / (q2 + params.a) + q2 * q2 / ((q2 + params.a) * d)))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub sup_abs: f64,
    pub sup_abs_inv: f64,
    /// Limit at the origin, taken along 64 directions at `|q| = 1e-8`.
    pub origin_value: f64,
    /// Spread of that limit over the directions.
    pub origin_spread: f64,
    /// Range over directions of the `|q| -> infinity` limit `1 / (1 - (b/a) cos^2)`.
    pub far_limit_min: f64,
    pub far_limit_max: f64,
    pub samples: usize,
}

pub fn m_symbol_report(params: &GLParams, modes: &ModeGrid) -> Result<MultiplierReport> {
    m_hat(1.0, 0.0, params)?;
    let directions = 64;
    let angles: Vec<f64> = (0..directions)
        .map(|i| i as f64 * std::f64::consts::TAU / directions as f64)
        .collect();
    let mut samples: Vec<(f64, f64)> = modes.modes.clone();
    // radial far grid out to 1e3
    let mut r: f64 = 4.0;
    while r < 1e3 {
        r = (r * 1.2).min(1e3);
        samples.extend(angles.iter().map(|t| (r * t.cos(), r * t.sin())));
    }
    let values: Vec<f64> = samples
        .par_iter()
        .filter_map(|&(xi, eta)| m_hat(xi, eta, params).ok().flatten())
        .collect();
    let sup_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sup_abs_inv = values.iter().fold(0.0_f64, |m, v| m.max(1.0 / v.abs()));

    let near: Vec<f64> = angles
        .iter()
        .map(|t| m_hat(1e-8 * t.cos(), 1e-8 * t.sin(), params).map(|v| v.unwrap_or(f64::NAN)))
        .collect::<Result<_>>()?;
    let origin_value = near.iter().sum::<f64>() / near.len() as f64;
    let origin_spread = near
        .iter()
        .fold(0.0_f64, |m, v| m.max((v - origin_value).abs()));
    let ratio = params.b / params.a;
    Ok(MultiplierReport {
        sup_abs,
        sup_abs_inv,
        origin_value,
        origin_spread,
        far_limit_min: 1.0,
        far_limit_max: 1.0 / (1.0 - ratio),
        samples: values.len(),
    })
}

/// Right-hand sides `(f1, ..., f6)` of the extended linear operator `T`.
#[derive(Clone, Debug)]
pub struct TestFieldSextuple {
    pub f: [RealField; 6],
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

impl TestFieldSextuple {
    /// `T (s, psi, theta, u, v, w)` with `psi = 2k tau phi_x`, `theta = 2k tau phi_y`,
    /// `u = s_xx`, `v = s_xy`, `w = s_yy`, all by central differences.
    pub fn from_potentials(s: &RealField, phi: &RealField, params: &GLParams) -> Result<Self> {
        if s.grid != phi.grid {
            return Err(GlError::ShapeMismatch {
                expected: s.grid.len(),
                got: phi.grid.len(),
            });
        }
        let (a, b) = (params.a, params.b);
        let two_k_tau = 2.0 * params.k * params.tau;
        let psi = stencil::dx(phi).scaled(two_k_tau);
        let theta = stencil::dy(phi).scaled(two_k_tau);
        let u = stencil::dxx(s);
        let v = stencil::dx(&stencil::dy(s));
        let w = stencil::dyy(s);
        let helm = |f: &RealField| stencil::laplacian(f).zip_with(f, |l, x| l - a * x);
        let f1 = helm(s).zip_with(&psi, |l, p| l - p);
        let f2 = stencil::laplacian(&psi).zip_with(&u, |l, x| l + b * x);
        let f3 = stencil::laplacian(&theta).zip_with(&v, |l, x| l + b * x);
        let f4 = helm(&u).zip_with(&stencil::dxx(&psi), |l, x| l - x);
        let f5 = helm(&v).zip_with(&stencil::dxx(&theta), |l, x| l - x);
        let f6 = helm(&w).zip_with(&stencil::dyy(&psi), |l, x| l - x);
        Ok(Self {
            f: [f1, f2, f3, f4, f5, f6],
        })
    }

    /// Tensor-product bumps with seeded centers, widths and amplitudes, kept
    /// inside the middle two thirds of the grid.
    pub fn random(seed: u64, grid: &Grid2D, params: &GLParams) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = grid.half_width();
        let draw = |rng: &mut ChaCha8Rng| {
            let cx = rng.random_range(-l / 4.0..l / 4.0);
            let cy = rng.random_range(-l / 4.0..l / 4.0);
            let wx = rng.random_range(l / 8.0..l / 3.0);
            let wy = rng.random_range(l / 8.0..l / 3.0);
            let amp = rng.random_range(-1.0..1.0);
            grid.sample(|x, y| amp * bump((x - cx) / wx) * bump((y - cy) / wy))
        };
        let s = draw(&mut rng);
        let phi = draw(&mut rng);
        Self::from_potentials(&s, &phi, params)
    }

    pub fn grid(&self) -> Grid2D {
        self.f[0].grid
    }

    pub fn scale(&self) -> f64 {
        self.f.iter().fold(0.0_f64, |m, f| m.max(f.max_abs()))
    }
}

/// `iint (a f2 + b f4) e` and `iint (a f3 + b f5) e` for `e` in `{1, x, y}`,
/// in that order.
pub fn cokernel_pairing(t: &TestFieldSextuple, params: &GLParams) -> Result<[f64; 6]> {
    let grid = t.grid();
    let margin = 5;
    let scale = t.scale();
    for f in &t.f {
        f.ensure_finite("test field")?;
        for m in 0..grid.len() {
            if grid.boundary_distance(m) < margin && f.values[m].abs() > 1e-12 * scale.max(1e-300) {
                return Err(GlError::SupportViolation {
                    margin: margin as f64 * grid.h(),
                });
            }
        }
    }
    let (a, b) = (params.a, params.b);
    let g2 = t.f[1].zip_with(&t.f[3], |p, q| a * p + b * q);
    let g3 = t.f[2].zip_with(&t.f[4], |p, q| a * p + b * q);
    let weights: [&dyn Fn(f64, f64) -> f64; 3] = [&|_, _| 1.0, &|x, _| x, &|_, y| y];
    let mut out = [0.0; 6];
    for (col, e) in weights.iter().enumerate() {
        for (row, g) in [&g2, &g3].into_iter().enumerate() {
            out[3 * row + col] = quadrature::integrate_values(&grid, |m| {
                let (x, y) = grid.xy(m);
                g.values[m] * e(x, y)
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BorderingIntegrals {
    /// `iint [Delta P2 + b P1_xx] x`
    pub along_x: f64,
    /// `iint [Delta P3 + b P1_xy] y`
    pub along_y: f64,
    /// Contribution of grid nodes outside the cutoff transition annulus.
    pub exterior_x: f64,
    pub exterior_y: f64,
}

/// Integrands `([Delta P2 + b P1_xx] x, [Delta P3 + b P1_xy] y)` at a point.
fn bordering_integrands(cutoff: &Cutoff, params: &GLParams, x: f64, y: f64) -> (f64, f64) {
    let (_, q) = cutoff.jets(x, y, params.alpha);
    let bp1 = params.b * p1_coefficient(params);
    let ix = 0.5 * (q.d(3, 0) + q.d(1, 2)) + bp1 * q.d(3, 0);
    let iy = 0.5 * (q.d(2, 1) + q.d(0, 3)) + bp1 * q.d(2, 1);
    (ix * x, iy * y)
}

pub fn bordering_integral(params: &GLParams, grid: &Grid2D) -> Result<BorderingIntegrals> {
    bordering_integral_with(params, grid, &Cutoff::default())
}

/// The integrands are smooth inside the transition annulus
/// `r_in < sqrt(alpha x^2 + y^2) < r_out` but only `C^1` across its edges, so
/// the annulus is integrated in scaled polar coordinates
/// (Gauss-Legendre in the radius, trapezoid in the angle) and the trapezoid
/// rule on the grid covers the remaining nodes.
pub fn bordering_integral_with(
    params: &GLParams,
    grid: &Grid2D,
    cutoff: &Cutoff,
) -> Result<BorderingIntegrals> {
    const PANELS: usize = 4;
    const ANGLES: usize = 512;
    let alpha = params.alpha;
    let sa = alpha.sqrt();
    if grid.half_width() <= cutoff.r_out {
        return Err(GlError::param(
            "grid",
            "half width must exceed the outer cutoff radius",
        ));
    }
    let gl = GaussLegendre::new(NonZeroUsize::new(12).unwrap());
    let rule = gl.as_node_weight_pairs();
    let width = (cutoff.r_out - cutoff.r_in) / PANELS as f64;
    let dtheta = std::f64::consts::TAU / ANGLES as f64;
    let annulus: Vec<(f64, f64)> = (0..ANGLES)
        .into_par_iter()
        .map(|j| {
            let (sin, cos) = (j as f64 * dtheta).sin_cos();
            let (mut sx, mut sy) = (CompensatedSum::default(), CompensatedSum::default());
            for p in 0..PANELS {
                let r0 = cutoff.r_in + p as f64 * width;
                for &(u, w) in rule {
                    let rho = r0 + 0.5 * width * (u + 1.0);
                    let weight = 0.5 * width * w * rho / sa * dtheta;
                    let (fx, fy) = bordering_integrands(cutoff, params, rho * cos / sa, rho * sin);
                    sx.add(weight * fx);
                    sy.add(weight * fy);
                }
            }
            (sx.value(), sy.value())
        })
        .collect();
    let exterior: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let (x, y) = grid.xy(m);
            let rho = (alpha * x * x + y * y).sqrt();
            if rho > cutoff.r_in && rho < cutoff.r_out {
                return (0.0, 0.0);
            }
            let w = quadrature::trapezoid_weight(grid, m);
            let (fx, fy) = bordering_integrands(cutoff, params, x, y);
            (w * fx, w * fy)
        })
        .collect();
    let sum = |v: &[(f64, f64)], first: bool| -> f64 {
        v.iter()
            .map(|p| if first { p.0 } else { p.1 })
            .collect::<CompensatedSum>()
            .value()
    };
    let (exterior_x, exterior_y) = (sum(&exterior, true), sum(&exterior, false));
    Ok(BorderingIntegrals {
        along_x: sum(&annulus, true) + exterior_x,
        along_y: sum(&annulus, false) + exterior_y,
        exterior_x,
        exterior_y,
    })
}
