//! Natural-parameter continuation in `eps`, each solve seeded by the previous one.

use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::fit::fit_far_field;
use crate::grid::Grid2D;
use crate::model::farfield::Cutoff;
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::params::GLParams;
use crate::model::residual::{ApModel, StateAP};
use crate::quadrature::AnnulusMask;
use crate::solvers::newton::{solve_with_model, NewtonConfig, SolveReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRow {
    pub eps: f64,
    pub c: f64,
    pub phi_inf: f64,
    /// Far-field fit of the reconstructed field; `None` if the fit failed.
    pub c_fit: Option<f64>,
    pub phi_inf_fit: Option<f64>,
    pub report: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub rows: Vec<ContinuationRow>,
    /// Least-squares slope through the origin of `c` over the three smallest
    /// positive `eps`.
    pub slope: Option<f64>,
    pub slope_fit: Option<f64>,
    /// `max |c - eps slope| / eps^2` over the positive rows.
    pub quadratic_k: Option<f64>,
    /// Set when the table was truncated.
    pub failed_at: Option<f64>,
    pub failure: Option<String>,
}

fn slope_through_origin(pts: &[(f64, f64)]) -> Option<f64> {
    let mut pos: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 > 0.0).collect();
    pos.sort_by(|a, b| a.0.total_cmp(&b.0));
    pos.truncate(3);
    if pos.is_empty() {
        return None;
    }
    let sxx: f64 = pos.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pos.iter().map(|p| p.0 * p.1).sum();
    Some(sxy / sxx)
}

/// `eps_list` must be nondecreasing and start at or above zero.
pub fn continuation_in_eps(
    params: &GLParams,
    g: &Inhomogeneity,
    grid: &Grid2D,
    eps_list: &[f64],
    cutoff: &Cutoff,
    annulus: &AnnulusMask,
    cfg: &NewtonConfig,
) -> Result<ContinuationReport> {
    if eps_list.is_empty() {
        return Err(GlError::param("eps", "continuation needs at least one value"));
    }
    if eps_list[0] < 0.0 || eps_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(GlError::param(
            "eps",
            "continuation values must be nondecreasing from >= 0",
        ));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut seed = StateAP::zero_with_cutoff(*grid, cutoff.clone());
    let mut failed_at = None;
    let mut failure = None;
    for &eps in eps_list {
        let p = params.with_eps(eps);
        let model = ApModel::with_cutoff(p, g, *grid, cutoff.clone())?;
        let outcome = solve_with_model(&model, &seed, cfg);
        let (state, report) = match outcome {
            Ok(v) => v,
            Err(e) => {
                failed_at = Some(eps);
                failure = Some(e.to_string());
                break;
            }
        };
        if !report.success {
            failed_at = Some(eps);
            failure = report.failure.clone();
            break;
        }
        let fit = fit_far_field(&model.reconstruct(&state), &p, annulus).ok();
        rows.push(ContinuationRow {
            eps,
            c: state.c,
            phi_inf: state.phi_inf,
            c_fit: fit.as_ref().map(|f| f.c_fit),
            phi_inf_fit: fit.as_ref().map(|f| f.phi_inf_fit),
            report,
        });
        seed = state;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.c)).collect();
    let slope = slope_through_origin(&pts);
    let fit_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.eps, r.c_fit?)))
        .collect();
    let slope_fit = slope_through_origin(&fit_pts);
    let quadratic_k = slope.and_then(|s| {
        pts.iter()
            .filter(|p| p.0 > 0.0)
            .map(|p| (p.1 - p.0 * s).abs() / (p.0 * p.0))
            .reduce(f64::max)
    });
    Ok(ContinuationReport {
        rows,
        slope,
        slope_fit,
        quadratic_k,
        failed_at,
        failure,
    })
}
