use num_complex::Complex64;

use crate::error::{GlError, Result};
use crate::grid::{ComplexField, Grid2D};

/// The localized forcing `g(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Inhomogeneity {
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`
    Gaussian {
        amplitude: Complex64,
        center: (f64, f64),
        width: f64,
    },
    /// Samples on a fixed grid.
    Tabulated(ComplexField),
}

impl Default for Inhomogeneity {
    fn default() -> Self {
        Self::unit_gaussian()
    }
}

impl Inhomogeneity {
    pub fn gaussian(amplitude: Complex64, center: (f64, f64), width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(GlError::param("inhomogeneity.width", "must be positive"));
        }
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(GlError::param("inhomogeneity.amplitude", "must be finite"));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(GlError::param("inhomogeneity.center", "must be finite"));
        }
        Ok(Self::Gaussian {
            amplitude,
            center,
            width,
        })
    }

    /// Centered unit Gaussian of width 1.
    pub fn unit_gaussian() -> Self {
        Self::Gaussian {
            amplitude: Complex64::new(1.0, 0.0),
            center: (0.0, 0.0),
            width: 1.0,
        }
    }

    pub fn shifted_gaussian(x0: f64) -> Self {
        Self::Gaussian {
            amplitude: Complex64::new(1.0, 0.0),
            center: (x0, 0.0),
            width: 1.0,
        }
    }

    pub fn tabulated(field: ComplexField) -> Result<Self> {
        field.ensure_finite("tabulated inhomogeneity")?;
        Ok(Self::Tabulated(field))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        match self {
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => Self::Gaussian {
                amplitude: amplitude * s,
                center: *center,
                width: *width,
            },
            Self::Tabulated(f) => Self::Tabulated(f.scaled(s)),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Option<Complex64> {
        match self {
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let dx = x - center.0;
                let dy = y - center.1;
                Some(amplitude * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp())
            }
            Self::Tabulated(_) => None,
        }
    }

    pub fn sample(&self, grid: &Grid2D) -> Result<ComplexField> {
        match self {
            Self::Gaussian { .. } => Ok(grid.sample_complex(|x, y| self.eval(x, y).unwrap())),
            Self::Tabulated(f) => {
                if f.grid != *grid {
                    return Err(GlError::ShapeMismatch {
                        expected: grid.len(),
                        got: f.grid.len(),
                    });
                }
                Ok(f.clone())
            }
        }
    }

    /// `iint g(x, y) e^{-ikx} dx dy` over the whole plane, when known in closed form.
    pub fn closed_form_transform(&self, k: f64) -> Option<Complex64> {
        match self {
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let s2 = width * width;
                let mag = 2.0 * std::f64::consts::PI * s2 * (-k * k * s2 / 2.0).exp();
                Some(amplitude * mag * Complex64::from_polar(1.0, -k * center.0))
            }
            Self::Tabulated(_) => None,
        }
    }
}
