//! Bordered Newton solver for the stationary amplitude-phase system.
//!
//! Unknown vector `z = (s, phi_loc, c, phi_inf)` of length `2N + 2`.
//! Rows, in the same order:
//!
//! * `R_amp` at interior nodes, `s = 0` on the boundary;
//! * `R_phase` at interior nodes, inward one-sided `d_n phi_loc = 0` on the
//!   boundary (corners sum both directions);
//! * mean of `phi_loc` over the boundary nodes `= 0`;
//! * `phi_loc(0, 0) = 0`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::{Grid2D, RealField};
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::params::GLParams;
use crate::model::residual::{ApModel, StateAP};
use crate::solvers::linalg::{gmres, Csr, SparseLu};
use crate::stencil::InteriorStencil;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearSolver {
    /// Fresh sparse LU at every Newton step.
    SparseDirect,
    /// Restarted GMRES preconditioned by the LU of the initial Jacobian.
    Gmres {
        tol: f64,
        restart: usize,
        max_iter: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest accepted damping factor.
    pub min_step: f64,
    pub linear: LinearSolver,
    /// Estimate the conditioning of the final Jacobian (two extra solves per
    /// Hager iteration).
    pub condition_estimate: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
            min_step: 1.0 / 1024.0,
            linear: LinearSolver::SparseDirect,
            condition_estimate: true,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(GlError::param("newton.tol", "must be positive"));
        }
        if self.max_iter < 1 {
            return Err(GlError::param("newton.max_iter", "must be at least 1"));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(GlError::param("newton.min_step", "must lie in (0, 1]"));
        }
        if let LinearSolver::Gmres { tol, restart, max_iter } = self.linear {
            if !(tol > 0.0) || restart == 0 || max_iter == 0 {
                return Err(GlError::param(
                    "newton.linear",
                    "gmres needs tol > 0, restart >= 1, max_iter >= 1",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Max-norm of the full residual vector, one entry per accepted iterate.
    pub residual_history: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub final_residual: f64,
    /// Estimate of `||J^{-1}||_inf` at the final iterate.
    pub condition_estimate: Option<f64>,
    /// `||J||_inf`; times `condition_estimate` gives the usual condition number.
    pub jacobian_norm: Option<f64>,
    /// Max over interior nodes of the complex-form residual of the reconstructed field.
    pub complex_residual: Option<f64>,
    pub success: bool,
    pub failure: Option<String>,
    pub elapsed_seconds: f64,
}

impl SolveReport {
    pub fn kappa(&self) -> Option<f64> {
        Some(self.condition_estimate? * self.jacobian_norm?)
    }
}

/// Residual and Jacobian assembly for one model.
pub struct BorderedSystem<'a> {
    pub model: &'a ApModel,
    stencil: InteriorStencil,
    boundary: Vec<usize>,
}

struct RowPartials {
    // derivatives of a residual row with respect to the local total quantities
    s: f64,
    s_x: f64,
    s_y: f64,
    lap_s: f64,
    th: f64,
    th_x: f64,
    th_y: f64,
    lap_phi: f64,
}

impl<'a> BorderedSystem<'a> {
    pub fn new(model: &'a ApModel) -> Self {
        Self {
            stencil: InteriorStencil::new(&model.grid),
            boundary: model.grid.boundary_nodes(),
            model,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.model.grid
    }

    pub fn dim(&self) -> usize {
        2 * self.grid().len() + 2
    }

    pub fn pack(&self, state: &StateAP) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim());
        z.extend(&state.s.values);
        z.extend(&state.phi_loc.values);
        z.push(state.c);
        z.push(state.phi_inf);
        z
    }

    pub fn unpack(&self, z: &[f64]) -> StateAP {
        let grid = self.grid();
        let nn = grid.len();
        StateAP {
            s: RealField {
                grid,
                values: z[..nn].to_vec(),
            },
            phi_loc: RealField {
                grid,
                values: z[nn..2 * nn].to_vec(),
            },
            c: z[2 * nn],
            phi_inf: z[2 * nn + 1],
            cutoff: self.model.cutoff.clone(),
        }
    }

    fn min_amplitude(&self, z: &[f64]) -> f64 {
        let nn = self.grid().len();
        let (tau, c) = (self.model.params.tau, z[2 * nn]);
        (0..nn)
            .map(|m| tau + z[m] + c * self.model.correctors.nodes[m].amp[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn neumann_terms(&self, m: usize) -> Vec<(usize, f64)> {
        let grid = self.grid();
        let n = grid.n();
        let (i, j) = grid.ij(m);
        let w = 1.0 / (2.0 * grid.h());
        let mut out = Vec::with_capacity(6);
        let mut push = |step: isize| {
            let at = |k: isize| (m as isize + k * step) as usize;
            out.push((at(0), -3.0 * w));
            out.push((at(1), 4.0 * w));
            out.push((at(2), -w));
        };
        if i == 0 {
            push(1);
        } else if i == n - 1 {
            push(-1);
        }
        if j == 0 {
            push(n as isize);
        } else if j == n - 1 {
            push(-(n as isize));
        }
        out
    }

    /// Residual vector and, on request, the Jacobian triplets.
    #[allow(clippy::type_complexity)]
    fn assemble(&self, z: &[f64], jac: bool) -> (Vec<f64>, Option<Vec<(usize, usize, f64)>>) {
        let model = self.model;
        let grid = self.grid();
        let n = grid.n();
        let nn = grid.len();
        let (c, phi_inf) = (z[2 * nn], z[2 * nn + 1]);
        let s = &z[..nn];
        let phi = &z[nn..2 * nn];
        let st = &self.stencil;
        let eps = model.params.eps;
        let cq_scale = model.log_scale();
        let (ic, ip) = (2 * nn, 2 * nn + 1);

        let rows: Vec<(Vec<(usize, f64)>, Vec<(usize, usize, f64)>)> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut res = Vec::with_capacity(2 * n);
                let mut trip = Vec::new();
                for i in 0..n {
                    let m = grid.idx(i, j);
                    if grid.is_boundary(m) {
                        res.push((m, s[m]));
                        let terms = self.neumann_terms(m);
                        res.push((nn + m, terms.iter().map(|&(k, w)| w * phi[k]).sum()));
                        if jac {
                            trip.push((m, m, 1.0));
                            trip.extend(terms.iter().map(|&(k, w)| (nn + m, nn + k, w)));
                        }
                        continue;
                    }
                    let v = model.node_values(
                        m,
                        s[m],
                        st.dx(s, m),
                        st.dy(s, m),
                        st.lap(s, m),
                        phi[m],
                        st.dx(phi, m),
                        st.dy(phi, m),
                        st.lap(phi, m),
                        c,
                        phi_inf,
                    );
                    let (ra, rp) = v.residual(eps);
                    res.push((m, ra));
                    res.push((nn + m, rp));
                    if !jac {
                        continue;
                    }
                    let e = eps * v.g * num_complex::Complex64::from_polar(1.0, -v.theta);
                    let grad2 = v.th_x * v.th_x + v.th_y * v.th_y;
                    let amp_row = RowPartials {
                        s: 1.0 - grad2 - 3.0 * v.amp * v.amp,
                        s_x: 0.0,
                        s_y: 0.0,
                        lap_s: 1.0,
                        th: e.im,
                        th_x: -2.0 * v.amp * v.th_x,
                        th_y: -2.0 * v.amp * v.th_y,
                        lap_phi: 0.0,
                    };
                    let num = 2.0 * (v.s_x * v.th_x + v.s_y * v.th_y) + e.im;
                    let inv = 1.0 / v.amp;
                    let phase_row = RowPartials {
                        s: -num * inv * inv,
                        s_x: 2.0 * v.th_x * inv,
                        s_y: 2.0 * v.th_y * inv,
                        lap_s: 0.0,
                        th: -e.re * inv,
                        th_x: 2.0 * v.s_x * inv,
                        th_y: 2.0 * v.s_y * inv,
                        lap_phi: 1.0,
                    };
                    let cr = &model.correctors.nodes[m];
                    for (row, p) in [(m, amp_row), (nn + m, phase_row)] {
                        let (d, l) = (st.inv_2h, st.inv_h2);
                        // s block
                        trip.push((row, m, p.s - 4.0 * l * p.lap_s));
                        trip.push((row, m + 1, d * p.s_x + l * p.lap_s));
                        trip.push((row, m - 1, -d * p.s_x + l * p.lap_s));
                        trip.push((row, m + n, d * p.s_y + l * p.lap_s));
                        trip.push((row, m - n, -d * p.s_y + l * p.lap_s));
                        // phi block
                        trip.push((row, nn + m, p.th - 4.0 * l * p.lap_phi));
                        trip.push((row, nn + m + 1, d * p.th_x + l * p.lap_phi));
                        trip.push((row, nn + m - 1, -d * p.th_x + l * p.lap_phi));
                        trip.push((row, nn + m + n, d * p.th_y + l * p.lap_phi));
                        trip.push((row, nn + m - n, -d * p.th_y + l * p.lap_phi));
                        // bordering columns
                        let dc = p.s * cr.amp[0]
                            + p.s_x * cr.amp[1]
                            + p.s_y * cr.amp[2]
                            + p.lap_s * cr.amp[3]
                            + cq_scale
                                * (p.th * cr.q[0]
                                    + p.th_x * cr.q[1]
                                    + p.th_y * cr.q[2]
                                    + p.lap_phi * cr.q[3]);
                        let dp = p.th * cr.chi[0]
                            + p.th_x * cr.chi[1]
                            + p.th_y * cr.chi[2]
                            + p.lap_phi * cr.chi[3];
                        if dc != 0.0 {
                            trip.push((row, ic, dc));
                        }
                        if dp != 0.0 {
                            trip.push((row, ip, dp));
                        }
                    }
                }
                (res, trip)
            })
            .collect();

        let mut f = vec![0.0; self.dim()];
        let mut triplets = if jac { Some(Vec::new()) } else { None };
        for (res, trip) in rows {
            for (r, v) in res {
                f[r] = v;
            }
            if let Some(t) = triplets.as_mut() {
                t.extend(trip);
            }
        }
        let nb = self.boundary.len() as f64;
        f[ic] = self.boundary.iter().map(|&m| phi[m]).sum::<f64>() / nb;
        f[ip] = phi[grid.origin()];
        if let Some(t) = triplets.as_mut() {
            t.extend(self.boundary.iter().map(|&m| (ic, nn + m, 1.0 / nb)));
            t.push((ip, nn + grid.origin(), 1.0));
        }
        (f, triplets)
    }

    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        self.assemble(z, false).0
    }

    pub fn jacobian(&self, z: &[f64]) -> Csr {
        let (_, t) = self.assemble(z, true);
        Csr::from_triplets(self.dim(), t.expect("requested"))
    }

    pub fn residual_and_jacobian(&self, z: &[f64]) -> (Vec<f64>, Csr) {
        let (f, t) = self.assemble(z, true);
        (f, Csr::from_triplets(self.dim(), t.expect("requested")))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn solve_stationary(
    params: &GLParams,
    g: &Inhomogeneity,
    grid: &Grid2D,
    init: &StateAP,
    cfg: &NewtonConfig,
) -> Result<(StateAP, SolveReport)> {
    let model = ApModel::with_cutoff(*params, g, *grid, init.cutoff.clone())?;
    solve_with_model(&model, init, cfg)
}

/// Newton solve for a prepared model; `init` must carry the model's cutoff.
pub fn solve_with_model(
    model: &ApModel,
    init: &StateAP,
    cfg: &NewtonConfig,
) -> Result<(StateAP, SolveReport)> {
    cfg.validate()?;
    model.check_state(init)?;
    model.check_amplitude(init)?;
    let start = Instant::now();
    let sys = BorderedSystem::new(model);
    let threshold = 0.1 * model.params.tau;
    let mut z = sys.pack(init);
    let mut f = sys.residual(&z);
    let mut r = max_abs(&f);
    let mut history = vec![r];
    let mut steps = Vec::new();
    let mut failure = None;
    let mut frozen: Option<SparseLu> = None;
    let mut iterations = 0;

    while r > cfg.tol {
        if iterations >= cfg.max_iter {
            failure = Some(format!("no convergence in {} iterations", cfg.max_iter));
            break;
        }
        iterations += 1;
        let jac = sys.jacobian(&z);
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = match cfg.linear {
            LinearSolver::SparseDirect => SparseLu::factor(&jac)?.solve(&rhs),
            LinearSolver::Gmres { tol, restart, max_iter } => {
                if frozen.is_none() {
                    frozen = Some(SparseLu::factor(&jac)?);
                }
                gmres(&jac, frozen.as_ref().unwrap(), &rhs, tol, restart, max_iter).0
            }
        };
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(GlError::SingularJacobian {
                condition: f64::INFINITY,
            });
        }
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = z.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            if sys.min_amplitude(&trial) > threshold {
                let ft = sys.residual(&trial);
                let rt = max_abs(&ft);
                if rt < r {
                    break Some((trial, ft, rt));
                }
            }
            lambda *= 0.5;
            if lambda < cfg.min_step {
                break None;
            }
        };
        match accepted {
            Some((zt, ft, rt)) => {
                z = zt;
                f = ft;
                r = rt;
                history.push(r);
                steps.push(lambda);
            }
            None => {
                let collapse = sys.min_amplitude(
                    &z.iter()
                        .zip(&delta)
                        .map(|(a, d)| a + cfg.min_step * d)
                        .collect::<Vec<_>>(),
                ) <= threshold;
                failure = Some(if collapse {
                    "line search failed: amplitude collapse along the Newton direction".into()
                } else {
                    format!("line search failed below step {}", cfg.min_step)
                });
                break;
            }
        }
    }

    let state = sys.unpack(&z);
    let (condition_estimate, jacobian_norm) = if cfg.condition_estimate {
        let jac = sys.jacobian(&z);
        let lu = SparseLu::factor(&jac)?;
        (Some(lu.inverse_norm_inf()), Some(jac.norm_inf()))
    } else {
        (None, None)
    };
    let complex_residual = {
        let a = model.reconstruct(&state);
        let rc = model.residual_complex(&a)?;
        let grid = model.grid;
        Some(
            (0..grid.len())
                .filter(|&m| !grid.is_boundary(m))
                .map(|m| rc.values[m].norm())
                .fold(0.0, f64::max),
        )
    };
    let success = r <= cfg.tol;
    Ok((
        state,
        SolveReport {
            iterations,
            residual_history: history,
            step_lengths: steps,
            final_residual: r,
            condition_estimate,
            jacobian_norm,
            complex_residual,
            success,
            failure: if success { None } else { failure },
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JacobianCheck {
    /// Worst `|J v - FD(v)|_inf / |J v|_inf` over the random directions.
    pub worst_relative: f64,
    /// The same along the `c` unit direction.
    pub c_column_relative: f64,
    pub directions: usize,
}

/// Compare the assembled Jacobian with central differences along seeded
/// random directions and along the `c` column.
pub fn jacobian_check(
    params: &GLParams,
    g: &Inhomogeneity,
    grid: &Grid2D,
    state: &StateAP,
    seed: u64,
) -> Result<JacobianCheck> {
    let model = ApModel::with_cutoff(*params, g, *grid, state.cutoff.clone())?;
    model.check_state(state)?;
    model.check_amplitude(state)?;
    let sys = BorderedSystem::new(&model);
    let z = sys.pack(state);
    let jac = sys.jacobian(&z);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions = 20;
    let scale = 1.0 + max_abs(&z);
    let compare = |v: &[f64]| -> f64 {
        let h = 1e-6 * scale / max_abs(v);
        let plus: Vec<f64> = z.iter().zip(v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = z.iter().zip(v).map(|(a, b)| a - h * b).collect();
        let fp = sys.residual(&plus);
        let fm = sys.residual(&minus);
        let jv = jac.matvec(v);
        let err = fp
            .iter()
            .zip(&fm)
            .zip(&jv)
            .map(|((p, m), j)| ((p - m) / (2.0 * h) - j).abs())
            .fold(0.0, f64::max);
        err / max_abs(&jv).max(f64::MIN_POSITIVE)
    };
    let mut worst = 0.0_f64;
    for _ in 0..directions {
        let v: Vec<f64> = (0..z.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.max(compare(&v));
    }
    let mut ec = vec![0.0; z.len()];
    ec[2 * grid.len()] = 1.0;
    Ok(JacobianCheck {
        worst_relative: worst,
        c_column_relative: compare(&ec),
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: f64, eps: f64, phi0: f64, l: f64, n: usize) -> ApModel {
        ApModel::new(
            GLParams::new(k, eps, phi0).unwrap(),
            &Inhomogeneity::unit_gaussian(),
            Grid2D::new(l, n).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn system_residual_matches_field_residual_in_interior() {
        let m = model(0.3, 0.05, 0.4, 6.0, 41);
        let mut st = StateAP::zero(m.grid);
        st.s = m.grid.sample(|x, y| 0.05 * (-(x * x + y * y) / 3.0).exp());
        st.phi_loc = m.grid.sample(|x, y| 0.1 * x * (-(x * x + y * y) / 4.0).exp());
        st.c = 0.02;
        st.phi_inf = -0.1;
        let sys = BorderedSystem::new(&m);
        let f = sys.residual(&sys.pack(&st));
        let (ra, rp) = m.residual_ap(&st).unwrap();
        let nn = m.grid.len();
        for idx in 0..nn {
            if !m.grid.is_boundary(idx) {
                assert!((f[idx] - ra.values[idx]).abs() < 1e-11);
                assert!((f[nn + idx] - rp.values[idx]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn zero_state_is_solution_at_zero_eps() {
        let m = model(0.3, 0.0, 0.0, 6.0, 41);
        let (st, rep) = solve_with_model(&m, &m.zero_state(), &NewtonConfig::default()).unwrap();
        assert!(rep.success && rep.iterations <= 2);
        assert_eq!(st.c, 0.0);
        assert_eq!(st.phi_inf, 0.0);
        assert!(rep.condition_estimate.unwrap().is_finite());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = GLParams::new(0.3, 0.05, 0.7).unwrap();
        let grid = Grid2D::new(6.0, 41).unwrap();
        let g = Inhomogeneity::unit_gaussian();
        let zero = jacobian_check(&p, &g, &grid, &StateAP::zero(grid), 1).unwrap();
        assert!(zero.worst_relative < 1e-6 && zero.c_column_relative < 1e-6, "{zero:?}");
        let mut st = StateAP::zero(grid);
        st.s = grid.sample(|x, y| 0.03 * (x - y).cos() * (-(x * x + y * y) / 5.0).exp());
        st.phi_loc = grid.sample(|x, y| 0.2 * (0.5 * x * y).sin() * (-(x * x + y * y) / 6.0).exp());
        st.c = 0.05;
        st.phi_inf = 0.2;
        let chk = jacobian_check(&p, &g, &grid, &st, 2).unwrap();
        assert!(chk.worst_relative < 1e-5 && chk.c_column_relative < 1e-5, "{chk:?}");
    }

    #[test]
    fn newton_converges_with_forcing_and_history_is_monotone() {
        let m = model(0.3, 0.02, 1.0, 10.0, 81);
        let (st, rep) = solve_with_model(&m, &m.zero_state(), &NewtonConfig::default()).unwrap();
        assert!(rep.success, "{rep:?}");
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(st.c.abs() > 0.0);
        let gm = NewtonConfig {
            linear: LinearSolver::Gmres {
                tol: 1e-13,
                restart: 40,
                max_iter: 400,
            },
            ..NewtonConfig::default()
        };
        let (st2, rep2) = solve_with_model(&m, &m.zero_state(), &gm).unwrap();
        assert!(rep2.success, "{rep2:?}");
        assert!((st2.c - st.c).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = NewtonConfig {
            max_iter: 0,
            ..NewtonConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
