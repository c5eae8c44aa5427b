//! Experiment configuration: a single JSON document.
//!
//! Only `k` is required. Everything else has a default, and
//! [`ExperimentConfig`] always carries the resolved values, so serializing a
//! loaded config and loading it again gives the same config.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::Grid2D;
use crate::model::farfield::Cutoff;
use crate::model::inhomogeneity::Inhomogeneity;
use crate::model::params::GLParams;
use crate::model::selection::selected_phase;
use crate::quadrature::AnnulusMask;
use crate::solvers::evolve::EvolveConfig;
use crate::solvers::newton::NewtonConfig;

/// A scalar or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn first(&self) -> Option<f64> {
        self.values().first().copied()
    }
}

/// `phi0` as radians, a list, or an offset from the selected phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    Value(OneOrMany),
    Selected { selected_plus: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InhomogeneitySpec {
    Gaussian {
        #[serde(default = "unit_amplitude")]
        amplitude: [f64; 2],
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "unit_width")]
        width: f64,
    },
    /// Field file, relative paths resolved against the config's directory.
    File { path: PathBuf },
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

fn unit_width() -> f64 {
    1.0
}

impl Default for InhomogeneitySpec {
    fn default() -> Self {
        InhomogeneitySpec::Gaussian {
            amplitude: unit_amplitude(),
            center: [0.0, 0.0],
            width: unit_width(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 50.0,
            n: 501,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSpec {
    /// Annulus radii as fractions of `L`.
    pub annulus: [f64; 2],
    /// Field for the `fit` subcommand; defaults to the output directory's `field_A.bin`.
    pub field: Option<PathBuf>,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            annulus: [0.55, 0.8],
            field: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    /// Evenly spaced phases in `(-pi, pi]` when `phi0` is not a list.
    pub count: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self { count: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Wavenumbers for independent stationary solves.
    pub k: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            k: vec![0.1, 0.2, 0.3, 0.45],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Random test sextuples for the cokernel pairings.
    pub pairs: usize,
    /// Pairing tolerance relative to field scale times domain area.
    pub tolerance: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            pairs: 20,
            tolerance: 1e-6,
        }
    }
}

/// A resolved, validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub k: f64,
    pub eps: OneOrMany,
    pub phi0: PhaseSpec,
    pub gamma: f64,
    pub beta: f64,
    pub inhomogeneity: InhomogeneitySpec,
    pub cutoff: Cutoff,
    pub newton: NewtonConfig,
    pub evolve: EvolveConfig,
    pub fit: FitSpec,
    pub scan: ScanSpec,
    pub sweep: SweepSpec,
    pub verify: VerifySpec,
    pub output: PathBuf,
    pub seed: u64,
}

/// As written by the user.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<GridSpec>,
    k: Option<f64>,
    eps: Option<OneOrMany>,
    phi0: Option<PhaseSpec>,
    gamma: Option<f64>,
    beta: Option<f64>,
    inhomogeneity: Option<InhomogeneitySpec>,
    cutoff: Option<Cutoff>,
    newton: Option<NewtonConfig>,
    evolve: Option<EvolveConfig>,
    fit: Option<FitSpec>,
    scan: Option<ScanSpec>,
    sweep: Option<SweepSpec>,
    verify: Option<VerifySpec>,
    output: Option<PathBuf>,
    seed: Option<u64>,
}

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 3.0;

fn invalid(key: &str, reason: impl Into<String>) -> GlError {
    GlError::param(key, reason)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text)
        .map_err(|e| GlError::Format(format!("config: {e}")))?;
    let cfg = ExperimentConfig {
        grid: raw.grid.unwrap_or_default(),
        k: raw.k.ok_or_else(|| invalid("k", "missing (required)"))?,
        eps: raw.eps.unwrap_or(OneOrMany::One(0.0)),
        phi0: raw.phi0.unwrap_or(PhaseSpec::Value(OneOrMany::One(0.0))),
        gamma: raw.gamma.unwrap_or(DEFAULT_GAMMA),
        beta: raw.beta.unwrap_or(DEFAULT_BETA),
        inhomogeneity: raw.inhomogeneity.unwrap_or_default(),
        cutoff: raw.cutoff.unwrap_or_else(Cutoff::wide),
        newton: raw.newton.unwrap_or_default(),
        evolve: raw.evolve.unwrap_or_default(),
        fit: raw.fit.unwrap_or_default(),
        scan: raw.scan.unwrap_or_default(),
        sweep: raw.sweep.unwrap_or_default(),
        verify: raw.verify.unwrap_or_default(),
        output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
        seed: raw.seed.unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, resolves defaults and validates. Relative field paths are taken
/// relative to the config's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let anchor = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    };
    if let InhomogeneitySpec::File { path: p } = &mut cfg.inhomogeneity {
        anchor(p);
    }
    if let Some(p) = &mut cfg.fit.field {
        anchor(p);
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        // phi0 is checked separately; GLParams only needs it finite
        GLParams::new(self.k, 0.0, 0.0)?;
        let eps = self.eps.values();
        if eps.is_empty() {
            return Err(invalid("eps", "list is empty"));
        }
        if let Some(e) = eps.iter().find(|e| !e.is_finite()) {
            return Err(invalid("eps", format!("must be finite, got {e}")));
        }
        match &self.phi0 {
            PhaseSpec::Value(v) => {
                let v = v.values();
                if v.is_empty() || v.iter().any(|p| !p.is_finite()) {
                    return Err(invalid("phi0", "need finite values"));
                }
            }
            PhaseSpec::Selected { selected_plus } => {
                if !selected_plus.is_finite() {
                    return Err(invalid("phi0.selected_plus", "must be finite"));
                }
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(
                "gamma",
                format!("weight exponent must lie in (0, 1), got {}", self.gamma),
            ));
        }
        if !(self.beta > self.gamma + 2.0) {
            return Err(invalid(
                "beta",
                format!(
                    "need beta > gamma + 2 = {}, got {}",
                    self.gamma + 2.0,
                    self.beta
                ),
            ));
        }
        if self.cutoff.r_out >= self.grid.half_width {
            return Err(invalid(
                "cutoff.r_out",
                format!("{} must be below L = {}", self.cutoff.r_out, self.grid.half_width),
            ));
        }
        if let InhomogeneitySpec::Gaussian {
            amplitude,
            center,
            width,
        } = &self.inhomogeneity
        {
            Inhomogeneity::gaussian(
                Complex64::new(amplitude[0], amplitude[1]),
                (center[0], center[1]),
                *width,
            )?;
        }
        self.newton.validate()?;
        self.evolve.validate()?;
        let [f0, f1] = self.fit.annulus;
        if !(f0 > 0.0 && f0 < f1 && f1 <= 1.0) {
            return Err(invalid(
                "fit.annulus",
                format!("need 0 < inner < outer <= 1 (fractions of L), got [{f0}, {f1}]"),
            ));
        }
        if f0 * self.grid.half_width < 1.0 {
            return Err(invalid("fit.annulus", "inner radius must be at least 1"));
        }
        if self.scan.count < 4 {
            return Err(invalid("scan.count", "need at least 4 phases"));
        }
        for k in &self.sweep.k {
            GLParams::new(*k, 0.0, 0.0).map_err(|e| invalid("sweep.k", e.to_string()))?;
        }
        if self.verify.pairs == 0 || !(self.verify.tolerance > 0.0) {
            return Err(invalid("verify", "need pairs >= 1 and tolerance > 0"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.half_width, self.grid.n).map_err(|e| match e {
            GlError::InvalidGrid(msg) => invalid("grid", msg),
            other => other,
        })
    }

    pub fn inhomogeneity(&self) -> Result<Inhomogeneity> {
        match &self.inhomogeneity {
            InhomogeneitySpec::Gaussian {
                amplitude,
                center,
                width,
            } => Inhomogeneity::gaussian(
                Complex64::new(amplitude[0], amplitude[1]),
                (center[0], center[1]),
                *width,
            ),
            InhomogeneitySpec::File { path } => {
                let f = crate::io::read_field(path)?.into_complex();
                if f.grid != self.grid()? {
                    return Err(invalid(
                        "inhomogeneity.path",
                        "field grid differs from the configured grid",
                    ));
                }
                Inhomogeneity::tabulated(f)
            }
        }
    }

    /// Phase offsets; `selected_plus` is resolved against the leading-order selected phase.
    pub fn phases(&self) -> Result<Vec<f64>> {
        match &self.phi0 {
            PhaseSpec::Value(v) => Ok(v.values()),
            PhaseSpec::Selected { selected_plus } => {
                let p = GLParams::new(self.k, 0.0, 0.0)?;
                let sel = selected_phase(&self.inhomogeneity()?, &p, &self.grid()?)?;
                Ok(vec![sel.phi1 + selected_plus])
            }
        }
    }

    /// Parameters at the first `eps` and first phase.
    pub fn params(&self) -> Result<GLParams> {
        let phi = self.phases()?[0];
        GLParams::new(self.k, self.eps.first().unwrap_or(0.0), phi)
    }

    pub fn annulus(&self, grid: &Grid2D) -> Result<AnnulusMask> {
        AnnulusMask::relative(grid, self.fit.annulus[0], self.fit.annulus[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(r#"{"k": 0.3, "eps": 0.02}"#).unwrap();
        assert_eq!(c.grid.half_width, 50.0);
        assert_eq!(c.grid.n, 501);
        assert_eq!(c.gamma, 0.5);
        assert_eq!(c.beta, 3.0);
        assert_eq!(c.inhomogeneity, InhomogeneitySpec::default());
        assert_eq!(c.eps, OneOrMany::One(0.02));
        assert_eq!(c.cutoff, Cutoff::wide());
    }

    #[test]
    fn eckhaus_side_rejected_by_name() {
        let e = parse_config(r#"{"k": 0.6}"#).unwrap_err().to_string();
        assert!(e.contains("Eckhaus bound") && e.contains("`k`"), "{e}");
    }

    #[test]
    fn weight_bounds() {
        let e = parse_config(r#"{"k": 0.3, "gamma": 1.5}"#).unwrap_err().to_string();
        assert!(e.contains("gamma"), "{e}");
        let e = parse_config(r#"{"k": 0.3, "gamma": 0.5, "beta": 2.4}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("beta"), "{e}");
    }

    #[test]
    fn missing_k_and_unknown_keys() {
        assert!(parse_config(r#"{"eps": 0.1}"#).unwrap_err().to_string().contains("`k`"));
        assert!(parse_config(r#"{"k": 0.3, "kk": 1}"#).is_err());
        assert!(parse_config(r#"{"k": 0.3, "newton": {"tol": 1e-8, "bogus": 1}}"#).is_err());
    }

    #[test]
    fn lists_and_selected_phase() {
        let c = parse_config(
            r#"{"k": 0.3, "eps": [0, 0.01], "phi0": {"selected_plus": 1.0},
                "grid": {"L": 10, "n": 101}}"#,
        )
        .unwrap();
        assert_eq!(c.eps.values(), vec![0.0, 0.01]);
        let ph = c.phases().unwrap();
        assert!((ph[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip() {
        let c = parse_config(
            r#"{"k": 0.25, "eps": [0.005, 0.01], "phi0": [0.1, 0.2],
                "grid": {"L": 12, "n": 61}, "evolve": {"bc": "dirichlet-roll"},
                "newton": {"linear": {"kind": "gmres", "tol": 1e-12, "restart": 40, "max_iter": 400}},
                "cutoff": {"r_in": 1, "r_out": 2}}"#,
        )
        .unwrap();
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn cutoff_must_fit_in_domain() {
        let e = parse_config(r#"{"k": 0.3, "grid": {"L": 3, "n": 31}}"#).unwrap_err();
        assert!(e.to_string().contains("cutoff"), "{e}");
    }
}
