//! First-order IMEX time stepping of `A_t = Delta A + A - A|A|^2 + eps g`.
//!
//! The stepper works on the co-moving field `B = A e^{-ikx}`, which satisfies
//! `B_t = Delta B + 2ik B_x + (1 - k^2) B - B|B|^2 + eps g e^{-ikx}`. A roll is a
//! constant `B`, so a homogeneous Neumann condition on `B` leaves the far-field
//! phase free while a fixed boundary value pins it. The implicit part
//! `Delta - sigma` is diagonalized by DCT-I (Neumann) or DST-I (Dirichlet);
//! `sigma B` is added back explicitly, which keeps the split unconditionally
//! stable around rolls for `sigma >= tau^2`.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustdct::{Dct1, DctPlanner, Dst1};
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::fit::{fit_far_field, FitResult};
use crate::grid::{ComplexField, Grid2D};
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::params::GLParams;
use crate::quadrature::AnnulusMask;

pub const BLOW_UP_LEVEL: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// `d_n (A e^{-ikx}) = 0`
    Neumann,
    /// `A = tau e^{i(kx + phi0)}` on the boundary.
    DirichletRoll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Stop once `||A_t||_inf` falls below this.
    pub threshold: f64,
    pub bc: BoundaryKind,
    /// Time between diagnostic snapshots.
    pub snapshot_every: f64,
    /// Implicit shift `sigma`.
    pub stabilization: f64,
    /// Far-field annulus for the snapshot fits; `None` means the default.
    pub annulus: Option<[f64; 2]>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_end: 100.0,
            threshold: 1e-9,
            bc: BoundaryKind::Neumann,
            snapshot_every: 10.0,
            stabilization: 1.0,
            annulus: None,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GlError::param(key, format!("must be positive, got {v}")))
            }
        };
        pos("evolve.dt", self.dt)?;
        pos("evolve.t_end", self.t_end)?;
        pos("evolve.threshold", self.threshold)?;
        pos("evolve.snapshot_every", self.snapshot_every)?;
        if !(self.stabilization.is_finite() && self.stabilization >= 0.0) {
            return Err(GlError::param("evolve.stabilization", "must be >= 0"));
        }
        Ok(())
    }

    fn annulus_mask(&self, grid: &Grid2D) -> Result<AnnulusMask> {
        match self.annulus {
            Some([r0, r1]) => AnnulusMask::new(grid, r0, r1),
            None => crate::fit::default_annulus(grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// `||A_t||_inf`, from the last step.
    pub rate: f64,
    pub max_abs: f64,
    /// `None` when the fit was not possible (e.g. collapsed amplitude).
    pub fit: Option<FitResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolveStatus {
    ReachedEnd,
    Steady,
    BlowUp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub status: EvolveStatus,
    pub steps: usize,
    pub t_final: f64,
    pub snapshots: Vec<Snapshot>,
    /// Max-norm residual of the discrete stationary equation at the final state.
    pub final_residual: f64,
    pub elapsed_seconds: f64,
}

/// Separable solver for `(1 + dt (sigma - Delta_h)) u = f` on one real component.
struct ImplicitSolve {
    n: usize,
    /// transform length along each axis
    m: usize,
    offset: usize,
    dct: Option<Arc<dyn Dct1<f64>>>,
    dst: Option<Arc<dyn Dst1<f64>>>,
    denom: Vec<f64>,
    norm: f64,
}

impl ImplicitSolve {
    fn new(grid: &Grid2D, bc: BoundaryKind, dt: f64, sigma: f64) -> Self {
        let n = grid.n();
        let h = grid.h();
        let mut planner = DctPlanner::new();
        let (m, offset, eig, dct, dst, norm): (usize, usize, Vec<f64>, _, _, f64) = match bc {
            BoundaryKind::Neumann => {
                let m = n;
                let eig = (0..m)
                    .map(|q| {
                        let s = (std::f64::consts::PI * q as f64 / (2.0 * (n - 1) as f64)).sin();
                        4.0 * s * s / (h * h)
                    })
                    .collect();
                let norm = 2.0 / (n - 1) as f64;
                (m, 0, eig, Some(planner.plan_dct1(m)), None, norm * norm)
            }
            BoundaryKind::DirichletRoll => {
                let m = n - 2;
                let eig = (1..=m)
                    .map(|q| {
                        let s = (std::f64::consts::PI * q as f64 / (2.0 * (n - 1) as f64)).sin();
                        4.0 * s * s / (h * h)
                    })
                    .collect();
                let norm = 2.0 / (m + 1) as f64;
                (m, 1, eig, None, Some(planner.plan_dst1(m)), norm * norm)
            }
        };
        let mut denom = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..m {
                denom[j * m + i] = 1.0 + dt * (sigma + eig[i] + eig[j]);
            }
        }
        Self {
            n,
            m,
            offset,
            dct,
            dst,
            denom,
            norm,
        }
    }

    fn transform_rows(&self, buf: &mut [f64]) {
        buf.par_chunks_mut(self.m).for_each(|row| {
            if let Some(d) = &self.dct {
                d.process_dct1(row);
            } else if let Some(d) = &self.dst {
                d.process_dst1(row);
            }
        });
    }

    fn transpose(&self, buf: &[f64], out: &mut [f64]) {
        let m = self.m;
        out.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = buf[i * m + j];
            }
        });
    }

    /// Overwrites the solved nodes of `f` (all nodes for Neumann, interior for Dirichlet).
    fn solve(&self, f: &mut [f64]) {
        let (m, n, o) = (self.m, self.n, self.offset);
        let mut buf = vec![0.0; m * m];
        for j in 0..m {
            buf[j * m..(j + 1) * m].copy_from_slice(&f[(j + o) * n + o..(j + o) * n + o + m]);
        }
        let mut tmp = vec![0.0; m * m];
        self.transform_rows(&mut buf);
        self.transpose(&buf, &mut tmp);
        self.transform_rows(&mut tmp);
        // tmp is indexed [i * m + j] now; denom is symmetric in (i, j)
        tmp.par_iter_mut()
            .zip(self.denom.par_iter())
            .for_each(|(v, d)| *v *= self.norm / d);
        self.transform_rows(&mut tmp);
        self.transpose(&tmp, &mut buf);
        self.transform_rows(&mut buf);
        for j in 0..m {
            f[(j + o) * n + o..(j + o) * n + o + m].copy_from_slice(&buf[j * m..(j + 1) * m]);
        }
    }
}

/// Explicit part and discrete operators on the co-moving field.
struct Comoving<'a> {
    grid: Grid2D,
    params: &'a GLParams,
    bc: BoundaryKind,
    forcing: Vec<Complex64>,
}

impl Comoving<'_> {
    #[inline]
    fn neighbor(&self, b: &[Complex64], i: usize, j: usize, di: isize, dj: isize) -> Complex64 {
        // only reached at the boundary for Neumann: reflect
        let n = self.grid.n() as isize;
        let refl = |p: isize| {
            if p < 0 {
                -p
            } else if p >= n {
                2 * (n - 1) - p
            } else {
                p
            }
        };
        let ii = refl(i as isize + di) as usize;
        let jj = refl(j as isize + dj) as usize;
        b[self.grid.idx(ii, jj)]
    }

    fn is_fixed(&self, m: usize) -> bool {
        self.bc == BoundaryKind::DirichletRoll && self.grid.is_boundary(m)
    }

    /// `(D_x, Delta_h)` at node `m`.
    fn derivs(&self, b: &[Complex64], m: usize) -> (Complex64, Complex64) {
        let (i, j) = self.grid.ij(m);
        let h = self.grid.h();
        let e = self.neighbor(b, i, j, 1, 0);
        let w = self.neighbor(b, i, j, -1, 0);
        let nn = self.neighbor(b, i, j, 0, 1);
        let s = self.neighbor(b, i, j, 0, -1);
        ((e - w) / (2.0 * h), (e + w + nn + s - 4.0 * b[m]) / (h * h))
    }

    fn nonlinear(&self, b: Complex64, bx: Complex64, m: usize, sigma: f64) -> Complex64 {
        let p = self.params;
        let ik2 = Complex64::new(0.0, 2.0 * p.k);
        (1.0 - p.k * p.k + sigma) * b + ik2 * bx - b * b.norm_sqr() + p.eps * self.forcing[m]
    }

    /// Max-norm of `Delta_h B + 2ik D_x B + (1-k^2) B - B|B|^2 + eps g e^{-ikx}` over free nodes.
    fn residual(&self, b: &[Complex64]) -> f64 {
        (0..b.len())
            .into_par_iter()
            .filter(|&m| !self.is_fixed(m))
            .map(|m| {
                let (bx, lap) = self.derivs(b, m);
                (lap + self.nonlinear(b[m], bx, m, 0.0)).norm()
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn to_lab(b: &[Complex64], grid: &Grid2D, k: f64) -> ComplexField {
    ComplexField {
        grid: *grid,
        values: b
            .iter()
            .enumerate()
            .map(|(m, v)| v * Complex64::from_polar(1.0, k * grid.xy(m).0))
            .collect(),
    }
}

/// Integrate from `a0` to `cfg.t_end` or until steady. Blow-up is reported
/// through the status, with the last finite state returned.
pub fn evolve(
    a0: &ComplexField,
    params: &GLParams,
    g: &Inhomogeneity,
    grid: &Grid2D,
    cfg: &EvolveConfig,
) -> Result<(ComplexField, EvolveReport)> {
    cfg.validate()?;
    if a0.grid != *grid {
        return Err(GlError::ShapeMismatch {
            expected: grid.len(),
            got: a0.values.len(),
        });
    }
    a0.ensure_finite("A0")?;
    let start = Instant::now();
    let gs = g.sample(grid)?;
    let k = params.k;
    let forcing: Vec<Complex64> = (0..grid.len())
        .map(|m| gs.values[m] * Complex64::from_polar(1.0, -k * grid.xy(m).0))
        .collect();
    let ops = Comoving {
        grid: *grid,
        params,
        bc: cfg.bc,
        forcing,
    };
    let mut b: Vec<Complex64> = (0..grid.len())
        .map(|m| a0.values[m] * Complex64::from_polar(1.0, -k * grid.xy(m).0))
        .collect();
    let wall = Complex64::from_polar(params.tau, params.phi0);
    if cfg.bc == BoundaryKind::DirichletRoll {
        for m in grid.boundary_nodes() {
            b[m] = wall;
        }
    }
    let sigma = cfg.stabilization;
    let dt = cfg.dt;
    let solver = ImplicitSolve::new(grid, cfg.bc, dt, sigma);
    let annulus = cfg.annulus_mask(grid)?;
    let steps_total = (cfg.t_end / dt).round().max(1.0) as usize;
    let every = ((cfg.snapshot_every / dt).round() as usize).max(1);

    let snapshot = |b: &[Complex64], t: f64, rate: f64| Snapshot {
        t,
        rate,
        max_abs: b.iter().fold(0.0_f64, |m, v| m.max(v.norm())),
        fit: fit_far_field(&to_lab(b, grid, k), params, &annulus).ok(),
    };
    let mut snapshots = vec![snapshot(&b, 0.0, f64::NAN)];
    let mut status = EvolveStatus::ReachedEnd;
    let mut steps = 0;
    let mut re = vec![0.0; grid.len()];
    let mut im = vec![0.0; grid.len()];
    while steps < steps_total {
        // right-hand side B + dt N(B); for Dirichlet the boundary value is lifted out
        let lift = if cfg.bc == BoundaryKind::DirichletRoll {
            (1.0 + dt * sigma) * wall
        } else {
            Complex64::new(0.0, 0.0)
        };
        let rhs: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map(|m| {
                if ops.is_fixed(m) {
                    return Complex64::new(0.0, 0.0);
                }
                let (bx, _) = ops.derivs(&b, m);
                b[m] + dt * ops.nonlinear(b[m], bx, m, sigma) - lift
            })
            .collect();
        for (m, v) in rhs.iter().enumerate() {
            re[m] = v.re;
            im[m] = v.im;
        }
        rayon::join(|| solver.solve(&mut re), || solver.solve(&mut im));
        let mut next: Vec<Complex64> = (0..grid.len())
            .map(|m| Complex64::new(re[m], im[m]))
            .collect();
        if cfg.bc == BoundaryKind::DirichletRoll {
            for (m, v) in next.iter_mut().enumerate() {
                if grid.is_boundary(m) {
                    *v = wall;
                } else {
                    *v += wall;
                }
            }
        }
        steps += 1;
        let t = steps as f64 * dt;
        let max_abs = next.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if !max_abs.is_finite() || max_abs > BLOW_UP_LEVEL {
            status = EvolveStatus::BlowUp;
            snapshots.push(Snapshot {
                t,
                rate: f64::NAN,
                max_abs,
                fit: None,
            });
            break;
        }
        let rate = next
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
            / dt;
        b = next;
        let steady = rate <= cfg.threshold;
        if steps % every == 0 || steady || steps == steps_total {
            snapshots.push(snapshot(&b, t, rate));
        }
        if steady {
            status = EvolveStatus::Steady;
            break;
        }
    }
    let final_residual = ops.residual(&b);
    let report = EvolveReport {
        status,
        steps,
        t_final: steps as f64 * dt,
        snapshots,
        final_residual,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((to_lab(&b, grid, k), report))
}
