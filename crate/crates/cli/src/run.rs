use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use glpattern_core::config::{ExperimentConfig, OneOrMany, PhaseSpec};
use glpattern_core::fit::{fit_far_field, selection_scan, unwrap_phase};
use glpattern_core::io::{read_field, Field};
use glpattern_core::model::selection::{c1_of_phi, c_flux_balance, selected_phase};
use glpattern_core::solvers::{
    continuation_in_eps, evolve, solve_stationary, EvolveStatus, SolveReport,
};
use glpattern_core::spectral::{
    bordering_integral_with, cokernel_pairing, eckhaus_report, m_symbol_report, symbol_table,
    ModeGrid, TestFieldSextuple,
};
use glpattern_core::{ComplexField, GLParams, RealField, StateAP};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{unix_now, RunDir};

/// A solver ran but did not deliver; maps to exit code 3.
#[derive(Debug)]
pub struct SolverFailure(pub String);

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver failure: {}", self.0)
    }
}

impl std::error::Error for SolverFailure {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Stationary,
    Evolve,
    Continuation,
    Fit,
    SelectPhase,
    Symbols,
    VerifyLinear,
    Sweep,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Stationary => "stationary",
            Subcommand::Evolve => "evolve",
            Subcommand::Continuation => "continuation",
            Subcommand::Fit => "fit",
            Subcommand::SelectPhase => "select-phase",
            Subcommand::Symbols => "symbols",
            Subcommand::VerifyLinear => "verify-linear",
            Subcommand::Sweep => "sweep",
        }
    }
}

pub struct Options {
    pub out: PathBuf,
    pub plots: bool,
}

/// Runs one subcommand and writes its manifest. Returns the manifest path;
/// solver failures are returned as errors after the partial outputs are recorded.
pub fn run(cmd: Subcommand, cfg: &ExperimentConfig, opts: &Options) -> Result<PathBuf> {
    let started = unix_now();
    let mut dir = RunDir::create(&opts.out)?;
    let outcome = match cmd {
        Subcommand::Stationary => stationary(cfg, opts, &mut dir),
        Subcommand::Evolve => evolve_run(cfg, opts, &mut dir),
        Subcommand::Continuation => continuation(cfg, &mut dir),
        Subcommand::Fit => fit(cfg, opts, &mut dir),
        Subcommand::SelectPhase => select_phase(cfg, &mut dir),
        Subcommand::Symbols => symbols(cfg, &mut dir),
        Subcommand::VerifyLinear => verify_linear(cfg, &mut dir),
        Subcommand::Sweep => sweep(cfg, &mut dir),
    };
    let status = match &outcome {
        Ok(()) => "ok",
        Err(e) if e.downcast_ref::<SolverFailure>().is_some() => "solver-failure",
        Err(_) => "error",
    };
    let manifest = dir.finish(cmd.name(), cfg, started, status)?;
    outcome.map(|_| manifest)
}

fn fields_out(
    dir: &mut RunDir,
    a: &ComplexField,
    params: &GLParams,
    plots: bool,
) -> Result<()> {
    dir.write_field("field_A.bin", &Field::Complex(a.clone()))?;
    if plots {
        dir.write_png("abs_A.png", &a.abs())?;
        let phase = unwrap_phase(a, params)?;
        dir.write_png("phase.png", &phase.phase)?;
    }
    Ok(())
}

fn check_solve(report: &SolveReport) -> Result<()> {
    if report.success {
        Ok(())
    } else {
        Err(SolverFailure(
            report
                .failure
                .clone()
                .unwrap_or_else(|| "not converged".into()),
        )
        .into())
    }
}

#[derive(Serialize)]
struct StationaryOut<'a> {
    k: f64,
    eps: f64,
    phi0: f64,
    c: f64,
    phi_inf: f64,
    /// `eps c1(phi0)` from the quadrature of `g`.
    eps_c1: f64,
    /// Leading-order `c` from the far-field flux balance.
    c_flux_balance: f64,
    fit: Option<glpattern_core::fit::FitResult>,
    report: &'a SolveReport,
}

fn stationary(cfg: &ExperimentConfig, opts: &Options, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let g = cfg.inhomogeneity()?;
    let init = StateAP::zero_with_cutoff(grid, cfg.cutoff.clone());
    let (state, report) = solve_stationary(&params, &g, &grid, &init, &cfg.newton)?;
    let a = glpattern_core::model::residual::reconstruct_a(&state, &params, &grid)?;
    let fit = fit_far_field(&a, &params, &cfg.annulus(&grid)?).ok();
    let out = StationaryOut {
        k: params.k,
        eps: params.eps,
        phi0: params.phi0,
        c: state.c,
        phi_inf: state.phi_inf,
        eps_c1: params.eps * c1_of_phi(&g, &params, &grid, params.phi0)?,
        c_flux_balance: c_flux_balance(&g, &params, &grid)?,
        fit,
        report: &report,
    };
    dir.write_json("stationary.json", &out)?;
    dir.write_field("state_s.bin", &Field::Real(state.s.clone()))?;
    dir.write_field("state_phi_loc.bin", &Field::Real(state.phi_loc.clone()))?;
    fields_out(dir, &a, &params, opts.plots)?;
    check_solve(&report)
}

fn evolve_run(cfg: &ExperimentConfig, opts: &Options, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let g = cfg.inhomogeneity()?;
    let a0 = grid.sample_complex(|x, _| Complex64::from_polar(params.tau, params.k * x + params.phi0));
    let mut ev = cfg.evolve.clone();
    if ev.annulus.is_none() {
        let ann = cfg.annulus(&grid)?;
        ev.annulus = Some([ann.r0, ann.r1]);
    }
    let (a, report) = evolve(&a0, &params, &g, &grid, &ev)?;
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = report
        .snapshots
        .iter()
        .map(|s| {
            let f = s.fit.as_ref();
            vec![
                s.t,
                s.rate,
                s.max_abs,
                f.map_or(nan, |f| f.c_fit),
                f.map_or(nan, |f| f.phi_inf_fit),
                f.map_or(nan, |f| f.s_inf_fit),
                f.map_or(nan, |f| f.residual),
            ]
        })
        .collect();
    dir.write_csv(
        "snapshots.csv",
        &["t", "rate", "max_abs", "c_fit", "phi_inf_fit", "s_inf_fit", "residual"],
        &rows,
    )?;
    dir.write_json(
        "evolve.json",
        &json!({
            "k": params.k, "eps": params.eps, "phi0": params.phi0,
            "status": report.status, "steps": report.steps, "t_final": report.t_final,
            "final_residual": report.final_residual,
            "elapsed_seconds": report.elapsed_seconds,
        }),
    )?;
    fields_out(dir, &a, &params, opts.plots)?;
    if report.status == EvolveStatus::BlowUp {
        let last = report.snapshots.last().map_or(nan, |s| s.max_abs);
        return Err(SolverFailure(format!(
            "blow-up at t = {}: max|A| = {last:.3e}",
            report.t_final
        ))
        .into());
    }
    Ok(())
}

fn continuation(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let g = cfg.inhomogeneity()?;
    let eps = cfg.eps.values();
    let rep = continuation_in_eps(
        &params,
        &g,
        &grid,
        &eps,
        &cfg.cutoff,
        &cfg.annulus(&grid)?,
        &cfg.newton,
    )?;
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.eps,
                r.c,
                r.phi_inf,
                r.c_fit.unwrap_or(nan),
                r.phi_inf_fit.unwrap_or(nan),
                r.report.iterations as f64,
                r.report.final_residual,
            ]
        })
        .collect();
    dir.write_csv(
        "continuation.csv",
        &["eps", "c", "phi_inf", "c_fit", "phi_inf_fit", "iterations", "final_residual"],
        &rows,
    )?;
    let c1 = c1_of_phi(&g, &params, &grid, params.phi0)?;
    let flux = c_flux_balance(&g, &params.with_eps(1.0), &grid)?;
    dir.write_json(
        "continuation.json",
        &json!({
            "k": params.k, "phi0": params.phi0,
            "slope": rep.slope, "slope_fit": rep.slope_fit, "quadratic_k": rep.quadratic_k,
            "c1": c1, "flux_balance_slope": flux,
            "failed_at": rep.failed_at, "failure": rep.failure,
        }),
    )?;
    if let Some(e) = rep.failed_at {
        return Err(SolverFailure(format!(
            "continuation stopped at eps = {e}: {}",
            rep.failure.unwrap_or_default()
        ))
        .into());
    }
    Ok(())
}

/// Fits `fit_field` from the config, or the `field_A.bin` of an earlier run in
/// the output directory.
fn fit(cfg: &ExperimentConfig, _opts: &Options, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let params = cfg.params()?;
    let path = cfg
        .fit
        .field
        .clone()
        .unwrap_or_else(|| dir.root().join("field_A.bin"));
    let a = read_field(&path)
        .with_context(|| format!("reading field {}", path.display()))?
        .into_complex();
    if a.grid != grid {
        bail!(glpattern_core::GlError::ShapeMismatch {
            expected: grid.len(),
            got: a.grid.len(),
        });
    }
    let res = fit_far_field(&a, &params, &cfg.annulus(&grid)?)?;
    dir.write_json("fit.json", &res)
}

fn scan_phases(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    Ok(match &cfg.phi0 {
        PhaseSpec::Value(OneOrMany::Many(v)) => v.clone(),
        _ => {
            let n = cfg.scan.count;
            (0..n)
                .map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / n as f64)
                .collect()
        }
    })
}

fn select_phase(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let params = GLParams::new(cfg.k, cfg.eps.first().unwrap_or(0.0), 0.0)?;
    let g = cfg.inhomogeneity()?;
    let phis = scan_phases(cfg)?;
    let scan = selection_scan(
        &g,
        &params,
        &grid,
        &phis,
        &cfg.cutoff,
        &cfg.annulus(&grid)?,
        &cfg.newton,
    )?;
    let rows: Vec<Vec<f64>> = scan
        .rows
        .iter()
        .map(|r| vec![r.phi, r.c_fit, r.phi_inf_fit, r.s_inf_fit, r.residual])
        .collect();
    dir.write_csv(
        "scan.csv",
        &["phi", "c_fit", "phi_inf_fit", "s_inf_fit", "residual"],
        &rows,
    )?;
    let sel = selected_phase(&g, &params, &grid)?;
    let failures: Vec<_> = scan
        .rows
        .iter()
        .filter_map(|r| Some(json!({"phi": r.phi, "failure": r.failure.as_ref()?})))
        .collect();
    dir.write_json(
        "select_phase.json",
        &json!({
            "roots": scan.roots, "sinusoid": scan.sinusoid,
            "selected": sel, "failures": failures,
        }),
    )?;
    if !failures.is_empty() {
        return Err(SolverFailure(format!("{} of {} phases failed", failures.len(), phis.len())).into());
    }
    Ok(())
}

fn symbols(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let params = GLParams::new(cfg.k, 0.0, 0.0)?;
    let modes = ModeGrid::standard();
    let table = symbol_table(&params, &modes);
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = table
        .iter()
        .map(|s| {
            vec![
                s.xi,
                s.eta,
                s.eigs[0].re,
                s.eigs[0].im,
                s.eigs[1].re,
                s.eigs[1].im,
                s.m_hat.unwrap_or(nan),
                s.m_hat_inv.unwrap_or(nan),
            ]
        })
        .collect();
    dir.write_csv(
        "symbols.csv",
        &["xi", "eta", "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im", "m_hat", "m_hat_inv"],
        &rows,
    )?;
    let eck = eckhaus_report(&params, &modes)?;
    let mult = m_symbol_report(&params, &modes)?;
    dir.write_json(
        "symbols.json",
        &json!({
            "k": params.k,
            "eckhaus_stable": eck.max_real_part <= 0.0,
            "eckhaus": eck,
            "multiplier": mult,
        }),
    )
}

fn verify_linear(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let params = GLParams::new(cfg.k, 0.0, 0.0)?;
    let area = (2.0 * grid.half_width()).powi(2);
    let seeds: Vec<u64> = (0..cfg.verify.pairs as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let pairings: Vec<(u64, [f64; 6], f64)> = seeds
        .par_iter()
        .map(|&s| {
            let t = TestFieldSextuple::random(s, &grid, &params)?;
            let p = cokernel_pairing(&t, &params)?;
            Ok((s, p, t.scale()))
        })
        .collect::<glpattern_core::Result<_>>()?;
    let worst = pairings
        .iter()
        .map(|(_, p, sc)| p.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (sc * area))
        .fold(0.0, f64::max);
    // negative control
    let control = {
        // raw Gaussian in the second slot, all others zero
        let w = grid.half_width() / 8.0;
        let mut t = TestFieldSextuple { f: std::array::from_fn(|_| RealField::zeros(grid)) };
        t.f[1] = grid.sample(|x, y| (-(x * x + y * y) / (2.0 * w * w)).exp());
        let p = cokernel_pairing(&t, &params)?;
        p.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (t.scale() * area)
    };
    let bi = bordering_integral_with(&params, &grid, &cfg.cutoff)?;
    let sqrt_alpha_pi = params.alpha.sqrt() * PI;
    let divergence_value = -2.0 * PI / params.alpha.sqrt();
    let rel = |v: f64, r: f64| ((v - r) / r).abs();
    dir.write_json(
        "verify_linear.json",
        &json!({
            "k": params.k,
            "pairings": pairings.iter().map(|(s, p, sc)| json!({"seed": s, "values": p, "scale": sc})).collect::<Vec<_>>(),
            "worst_relative_pairing": worst,
            "tolerance": cfg.verify.tolerance,
            "pairings_pass": worst <= cfg.verify.tolerance,
            "negative_control_relative": control,
            "bordering": {
                "along_x": bi.along_x,
                "along_y": bi.along_y,
                "sqrt_alpha_pi": sqrt_alpha_pi,
                "relative_error_vs_sqrt_alpha_pi": [rel(bi.along_x, sqrt_alpha_pi), rel(bi.along_y, sqrt_alpha_pi)],
                "minus_two_pi_over_sqrt_alpha": divergence_value,
                "relative_error_vs_divergence_value": [rel(bi.along_x, divergence_value), rel(bi.along_y, divergence_value)],
            },
        }),
    )
}

fn sweep(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<()> {
    let grid = cfg.grid()?;
    let base = cfg.params()?;
    let g = cfg.inhomogeneity()?;
    let annulus = cfg.annulus(&grid)?;
    let results: Vec<(f64, Result<(StateAP, SolveReport), String>)> = cfg
        .sweep
        .k
        .par_iter()
        .map(|&k| {
            let r = GLParams::new(k, base.eps, base.phi0)
                .and_then(|p| {
                    let init = StateAP::zero_with_cutoff(grid, cfg.cutoff.clone());
                    solve_stationary(&p, &g, &grid, &init, &cfg.newton)
                })
                .map_err(|e| e.to_string());
            (k, r)
        })
        .collect();
    let nan = f64::NAN;
    let mut failures = Vec::new();
    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|(k, r)| match r {
            Ok((state, rep)) => {
                let p = GLParams::unchecked(*k, base.eps, base.phi0);
                let c_fit = glpattern_core::model::residual::reconstruct_a(state, &p, &grid)
                    .ok()
                    .and_then(|a| fit_far_field(&a, &p, &annulus).ok())
                    .map_or(nan, |f| f.c_fit);
                if !rep.success {
                    failures.push(json!({"k": k, "failure": rep.failure}));
                }
                vec![
                    *k,
                    state.c,
                    state.phi_inf,
                    c_fit,
                    rep.iterations as f64,
                    rep.final_residual,
                    rep.condition_estimate.unwrap_or(nan),
                    if rep.success { 1.0 } else { 0.0 },
                ]
            }
            Err(e) => {
                failures.push(json!({"k": k, "failure": e}));
                vec![*k, nan, nan, nan, nan, nan, nan, 0.0]
            }
        })
        .collect();
    dir.write_csv(
        "sweep.csv",
        &["k", "c", "phi_inf", "c_fit", "iterations", "final_residual", "condition_estimate", "success"],
        &rows,
    )?;
    dir.write_json("sweep.json", &json!({"eps": base.eps, "phi0": base.phi0, "failures": failures}))?;
    if !failures.is_empty() {
        return Err(SolverFailure(format!("{} of {} sweep points failed", failures.len(), rows.len())).into());
    }
    Ok(())
}
