//! Far-field measurements on a computed pattern: log coefficient `c`,
//! phase constant and limiting amplitude.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::{ComplexField, Grid2D, RealField};
use crate::model::params::GLParams;
use crate::model::farfield::Cutoff;
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::residual::{reconstruct_a, StateAP};
use crate::quadrature::AnnulusMask;
use crate::solvers::newton::{solve_stationary, NewtonConfig};

pub const MIN_ANNULUS_NODES: usize = 50;
/// Nodes with `|A| < UNWRAP_FLOOR * tau` carry no usable phase.
pub const UNWRAP_FLOOR: f64 = 0.1;

/// Wrap into `(-pi, pi]`.
pub fn wrap_angle(t: f64) -> f64 {
    let r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Clone, Debug)]
pub struct UnwrappedPhase {
    /// `Phi - k x`; NaN at excluded nodes.
    pub phase: RealField,
    pub excluded: Vec<usize>,
}

/// Neighbor one step closer to the origin along the ray through `(di, dj)`.
fn ray_parent(di: i64, dj: i64) -> (i64, i64) {
    let m = di.abs().max(dj.abs());
    let back = |d: i64| ((d as f64) * (m - 1) as f64 / m as f64).round() as i64;
    (back(di), back(dj))
}

/// Recover `Phi - k x` from `A = S e^{i Phi}` by marching outward along rays
/// from the origin. The origin value lies in `(-pi, pi]`.
pub fn unwrap_phase(a: &ComplexField, params: &GLParams) -> Result<UnwrappedPhase> {
    a.ensure_finite("A")?;
    let grid = a.grid;
    let n = grid.n() as i64;
    let c = grid.center() as i64;
    let floor = UNWRAP_FLOOR * params.tau;
    // co-moving field: its phase varies slowly
    let b: Vec<Complex64> = (0..grid.len())
        .map(|m| {
            let (x, _) = grid.xy(m);
            a.values[m] * Complex64::from_polar(1.0, -params.k * x)
        })
        .collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    let cheb = |m: usize| {
        let (i, j) = grid.ij(m);
        (i as i64 - c).abs().max((j as i64 - c).abs())
    };
    order.sort_by_key(|&m| cheb(m));

    // unwrapped value carried along each chain, also through excluded nodes
    let mut carried = vec![0.0; grid.len()];
    let mut phase = vec![f64::NAN; grid.len()];
    let mut excluded = Vec::new();
    for &m in &order {
        let (i, j) = grid.ij(m);
        let (di, dj) = (i as i64 - c, j as i64 - c);
        let here = b[m].arg();
        let value = if di == 0 && dj == 0 {
            here
        } else {
            let (pi_, pj) = ray_parent(di, dj);
            let parent = ((pj + c) * n + (pi_ + c)) as usize;
            let base = carried[parent];
            base + wrap_angle(here - base)
        };
        carried[m] = value;
        if b[m].norm() < floor {
            excluded.push(m);
        } else {
            phase[m] = value;
        }
    }
    excluded.sort_unstable();
    Ok(UnwrappedPhase {
        phase: RealField::from_values(grid, phase)?,
        excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c_fit: f64,
    /// In `(-pi, pi]`.
    pub phi_inf_fit: f64,
    pub s_inf_fit: f64,
    /// RMS of the phase regression.
    pub residual: f64,
    pub annulus: [f64; 2],
    pub nodes: usize,
}

/// `[0.55 L, 0.8 L]`
pub fn default_annulus(grid: &Grid2D) -> Result<AnnulusMask> {
    AnnulusMask::relative(grid, 0.55, 0.8)
}

/// Least squares of `Phi - kx - phi0` against `{ln(alpha x^2 + y^2) / (2 k tau), 1}`
/// over the annulus.
pub fn fit_far_field(a: &ComplexField, params: &GLParams, annulus: &AnnulusMask) -> Result<FitResult> {
    if params.k == 0.0 {
        return Err(GlError::param("k", "far-field log fit needs k != 0"));
    }
    let grid = a.grid;
    if annulus.r0 < 1.0 {
        return Err(GlError::InvalidAnnulus {
            r0: annulus.r0,
            r1: annulus.r1,
            reason: "inner radius must be at least 1".into(),
        });
    }
    let un = unwrap_phase(a, params)?;
    let scale = 1.0 / (2.0 * params.k * params.tau);
    let rows: Vec<(f64, f64, f64)> = annulus
        .nodes
        .par_iter()
        .filter_map(|&m| {
            let p = un.phase.values[m];
            if p.is_nan() {
                return None;
            }
            let (x, y) = grid.xy(m);
            let l = (params.alpha * x * x + y * y).ln() * scale;
            Some((l, p - params.phi0, a.values[m].norm()))
        })
        .collect();
    if rows.len() < MIN_ANNULUS_NODES {
        return Err(GlError::InvalidAnnulus {
            r0: annulus.r0,
            r1: annulus.r1,
            reason: format!(
                "{} usable nodes, need at least {MIN_ANNULUS_NODES}",
                rows.len()
            ),
        });
    }
    let nf = rows.len() as f64;
    let lm = rows.iter().map(|r| r.0).sum::<f64>() / nf;
    let pm = rows.iter().map(|r| r.1).sum::<f64>() / nf;
    let sll: f64 = rows.iter().map(|r| (r.0 - lm).powi(2)).sum();
    let slp: f64 = rows.iter().map(|r| (r.0 - lm) * (r.1 - pm)).sum();
    if sll <= 0.0 {
        return Err(GlError::InvalidAnnulus {
            r0: annulus.r0,
            r1: annulus.r1,
            reason: "log basis is constant on the annulus".into(),
        });
    }
    let c_fit = slp / sll;
    let icpt = pm - c_fit * lm;
    let residual = (rows
        .iter()
        .map(|r| (r.1 - icpt - c_fit * r.0).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    let s_inf_fit = rows.iter().map(|r| r.2).sum::<f64>() / nf;
    Ok(FitResult {
        c_fit,
        phi_inf_fit: wrap_angle(icpt),
        s_inf_fit,
        residual,
        annulus: [annulus.r0, annulus.r1],
        nodes: rows.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub phi: f64,
    pub c_fit: f64,
    pub phi_inf_fit: f64,
    pub s_inf_fit: f64,
    pub residual: f64,
    /// Bordered unknown `c` from the solver.
    pub c: f64,
    /// `Some` when the solve or the fit failed; numeric fields are then NaN.
    pub failure: Option<String>,
}

/// `c_fit(phi) ~ p cos(phi) + q sin(phi) + r`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    /// `c_fit` crosses zero upward at `rising_zero`.
    pub rising_zero: f64,
    pub offset: f64,
    /// RMS misfit relative to `amplitude`.
    pub relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionScan {
    pub rows: Vec<ScanRow>,
    /// Linear interpolation at each sign change of `c_fit` between adjacent rows,
    /// wrapped into `(-pi, pi]`.
    pub roots: Vec<f64>,
    pub sinusoid: Option<SinusoidFit>,
}

/// Zeros of the piecewise-linear interpolant through `pts` (sorted by phase).
/// When the samples cover a full period the last and first points are
/// joined across the wrap as well.
pub fn sign_change_roots(pts: &[(f64, f64)]) -> Vec<f64> {
    let mut pairs: Vec<((f64, f64), (f64, f64))> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    if let (Some(&first), Some(&last)) = (pts.first(), pts.last()) {
        let gap = first.0 + TAU - last.0;
        let widest = pts.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0, f64::max);
        if pts.len() >= 3 && gap > 0.0 && gap <= 1.5 * widest {
            pairs.push((last, (first.0 + TAU, first.1)));
        }
    }
    pairs
        .into_iter()
        .filter(|(a, b)| a.1 == 0.0 || a.1.signum() != b.1.signum())
        .map(|(a, b)| {
            let r = if a.1 == b.1 { a.0 } else { a.0 - a.1 * (b.0 - a.0) / (b.1 - a.1) };
            wrap_angle(r)
        })
        .collect()
}

fn solve3(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = v[r];
        }
        *o = det(mc) / d;
    }
    Some(out)
}

pub fn fit_sinusoid(pts: &[(f64, f64)]) -> Option<SinusoidFit> {
    if pts.len() < 4 {
        return None;
    }
    let mut m = [[0.0; 3]; 3];
    let mut v = [0.0; 3];
    for &(phi, y) in pts {
        let b = [phi.cos(), phi.sin(), 1.0];
        for r in 0..3 {
            v[r] += b[r] * y;
            for c in 0..3 {
                m[r][c] += b[r] * b[c];
            }
        }
    }
    let [p, q, r] = solve3(m, v)?;
    let amplitude = p.hypot(q);
    // p cos + q sin = A sin(phi - z) with q = A cos z, p = -A sin z
    let rising_zero = wrap_angle((-p).atan2(q));
    let rms = (pts
        .iter()
        .map(|&(phi, y)| (y - p * phi.cos() - q * phi.sin() - r).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    Some(SinusoidFit {
        amplitude,
        rising_zero,
        offset: r,
        relative_residual: if amplitude > 0.0 { rms / amplitude } else { f64::INFINITY },
    })
}

/// Stationary solve and far-field fit for each `phi0` in `phis` (independent
/// solves, run in parallel).
pub fn selection_scan(
    g: &Inhomogeneity,
    params: &GLParams,
    grid: &Grid2D,
    phis: &[f64],
    cutoff: &Cutoff,
    annulus: &AnnulusMask,
    cfg: &NewtonConfig,
) -> Result<SelectionScan> {
    cfg.validate()?;
    let rows: Vec<ScanRow> = phis
        .par_iter()
        .map(|&phi| {
            let p = params.with_phi0(phi);
            let failed = |msg: String| ScanRow {
                phi,
                c_fit: f64::NAN,
                phi_inf_fit: f64::NAN,
                s_inf_fit: f64::NAN,
                residual: f64::NAN,
                c: f64::NAN,
                failure: Some(msg),
            };
            let init = StateAP::zero_with_cutoff(*grid, cutoff.clone());
            let (state, rep) = match solve_stationary(&p, g, grid, &init, cfg) {
                Ok(v) => v,
                Err(e) => return failed(e.to_string()),
            };
            if !rep.success {
                return failed(rep.failure.unwrap_or_else(|| "not converged".into()));
            }
            let a = match reconstruct_a(&state, &p, grid) {
                Ok(a) => a,
                Err(e) => return failed(e.to_string()),
            };
            match fit_far_field(&a, &p, annulus) {
                Ok(f) => ScanRow {
                    phi,
                    c_fit: f.c_fit,
                    phi_inf_fit: f.phi_inf_fit,
                    s_inf_fit: f.s_inf_fit,
                    residual: f.residual,
                    c: state.c,
                    failure: None,
                },
                Err(e) => failed(e.to_string()),
            }
        })
        .collect();
    let good: Vec<&ScanRow> = rows.iter().filter(|r| r.failure.is_none()).collect();
    let pts: Vec<(f64, f64)> = good.iter().map(|r| (r.phi, r.c_fit)).collect();
    Ok(SelectionScan {
        roots: sign_change_roots(&pts),
        rows,
        sinusoid: fit_sinusoid(&pts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GLParams {
        GLParams::new(0.3, 0.0, 0.4).unwrap()
    }

    #[test]
    fn roots_found_across_the_wrap() {
        let phis: Vec<f64> = (0..12).map(|i| -PI + (i as f64 + 0.5) * TAU / 12.0).collect();
        let pts: Vec<(f64, f64)> = phis.iter().map(|&p| (p, (p - 0.3).sin())).collect();
        let mut r = sign_change_roots(&pts);
        r.sort_by(f64::total_cmp);
        assert_eq!(r.len(), 2, "{r:?}");
        assert!((r[0] - (0.3 - PI)).abs() < 0.05 && (r[1] - 0.3).abs() < 0.05, "{r:?}");
        // a half-period scan is not closed
        let half: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 0.5, (i as f64 * 0.5 - 1.2).sin())).collect();
        assert_eq!(sign_change_roots(&half).len(), 1);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn ray_parent_is_adjacent_and_closer() {
        for di in -7_i64..=7 {
            for dj in -7_i64..=7 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (a, b) = ray_parent(di, dj);
                assert!((a - di).abs() <= 1 && (b - dj).abs() <= 1);
                assert_eq!(a.abs().max(b.abs()), di.abs().max(dj.abs()) - 1);
            }
        }
    }

    #[test]
    fn roll_unwraps_to_constant() {
        let p = params();
        let g = Grid2D::new(10.0, 101).unwrap();
        let a = g.sample_complex(|x, _| Complex64::from_polar(p.tau, p.k * x + 0.3));
        let u = unwrap_phase(&a, &p).unwrap();
        assert!(u.excluded.is_empty());
        for v in &u.phase.values {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn log_phase_has_no_jumps() {
        let p = params();
        let g = Grid2D::new(30.0, 151).unwrap();
        let syn = |x: f64, y: f64| 3.0 + 0.8 * (p.alpha * x * x + y * y).max(1.0).ln();
        let a = g.sample_complex(|x, y| Complex64::from_polar(p.tau, p.k * x + syn(x, y)));
        let u = unwrap_phase(&a, &p).unwrap();
        let shift = u.phase.values[g.origin()] - syn(0.0, 0.0);
        let turns = (shift / (2.0 * PI)).round();
        assert!((shift - turns * 2.0 * PI).abs() < 1e-9);
        for m in 0..g.len() {
            let (x, y) = g.xy(m);
            assert!((u.phase.values[m] - shift - syn(x, y)).abs() < 1e-9);
        }
    }

    #[test]
    fn low_amplitude_nodes_are_excluded() {
        let p = params();
        let g = Grid2D::new(5.0, 51).unwrap();
        let a = g.sample_complex(|x, y| {
            let s = if x.hypot(y) < 1.0 { 0.01 } else { p.tau };
            Complex64::from_polar(s, p.k * x)
        });
        let u = unwrap_phase(&a, &p).unwrap();
        assert!(!u.excluded.is_empty());
        assert!(u.phase.values[g.origin()].is_nan());
        let far = g.idx(g.n() - 1, g.center());
        assert!(u.phase.values[far].abs() < 1e-12);
    }

    #[test]
    fn pure_roll_fit() {
        let p = params();
        let g = Grid2D::new(20.0, 201).unwrap();
        let a = g.sample_complex(|x, _| Complex64::from_polar(p.tau, p.k * x + p.phi0));
        let f = fit_far_field(&a, &p, &default_annulus(&g).unwrap()).unwrap();
        assert!(f.c_fit.abs() < 1e-8);
        assert!((f.s_inf_fit - p.tau).abs() < 1e-8);
        assert!(f.phi_inf_fit.abs() < 1e-8);
    }

    #[test]
    fn reconstructed_state_round_trip() {
        let p = params();
        let g = Grid2D::new(20.0, 201).unwrap();
        let mut st = StateAP::zero(g);
        st.c = 0.013;
        st.phi_inf = -0.21;
        let a = reconstruct_a(&st, &p, &g).unwrap();
        let f = fit_far_field(&a, &p, &default_annulus(&g).unwrap()).unwrap();
        assert!((f.c_fit - 0.013).abs() < 1e-6, "{f:?}");
        assert!((f.phi_inf_fit + 0.21).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn gauge_shift_moves_only_the_constant() {
        let p = params();
        let g = Grid2D::new(20.0, 201).unwrap();
        let mut st = StateAP::zero(g);
        st.c = 0.02;
        st.phi_inf = 0.1;
        let a = reconstruct_a(&st, &p, &g).unwrap();
        let ann = default_annulus(&g).unwrap();
        let f0 = fit_far_field(&a, &p, &ann).unwrap();
        let d = 0.7;
        let f1 = fit_far_field(&a.scaled(Complex64::from_polar(1.0, d)), &p, &ann).unwrap();
        assert!((f1.c_fit - f0.c_fit).abs() < 1e-10);
        assert!((wrap_angle(f1.phi_inf_fit - f0.phi_inf_fit - d)).abs() < 1e-10);
    }

    #[test]
    fn small_annulus_rejected() {
        let p = params();
        let g = Grid2D::new(10.0, 21).unwrap();
        let a = g.sample_complex(|x, _| Complex64::from_polar(p.tau, p.k * x));
        let ann = AnnulusMask::new(&g, 5.0, 6.0).unwrap();
        assert!(fit_far_field(&a, &p, &ann).is_err());
    }
    #[test]
    fn sinusoid_fit_recovers_zero_phase() {
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let phi = i as f64 * PI / 6.0;
                (phi, 0.3 * (phi - 1.1).sin() + 0.01)
            })
            .collect();
        let f = fit_sinusoid(&pts).unwrap();
        assert!((f.amplitude - 0.3).abs() < 1e-12);
        assert!((f.rising_zero - 1.1).abs() < 1e-12);
        assert!((f.offset - 0.01).abs() < 1e-12);
        assert!(f.relative_residual < 1e-12);
    }
}
