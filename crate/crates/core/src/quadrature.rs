//! Trapezoidal quadrature, weighted Sobolev / Kondratiev norms and the
//! annulus-based decay diagnostic.
//!
//! All reductions run in a fixed node order with Neumaier compensation so that
//! repeated evaluations agree bitwise.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::{japanese_bracket, ComplexField, Grid2D, RealField};
use crate::stencil;

/// Compensated (Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Trapezoid weight of node `m` (including the `h^2` cell area).
#[inline]
pub fn trapezoid_weight(grid: &Grid2D, m: usize) -> f64 {
    let (i, j) = grid.ij(m);
    let last = grid.n() - 1;
    let wi = if i == 0 || i == last { 0.5 } else { 1.0 };
    let wj = if j == 0 || j == last { 0.5 } else { 1.0 };
    let h = grid.h();
    wi * wj * h * h
}

pub(crate) fn integrate_values(grid: &Grid2D, values: impl Fn(usize) -> f64) -> f64 {
    (0..grid.len())
        .map(|m| trapezoid_weight(grid, m) * values(m))
        .collect::<CompensatedSum>()
        .value()
}

pub fn integrate(f: &RealField) -> Result<f64> {
    f.ensure_finite("integrand")?;
    Ok(integrate_values(&f.grid, |m| f.values[m]))
}

pub fn integrate_complex(f: &ComplexField) -> Result<Complex64> {
    f.ensure_finite("integrand")?;
    let re = integrate_values(&f.grid, |m| f.values[m].re);
    let im = integrate_values(&f.grid, |m| f.values[m].im);
    Ok(Complex64::new(re, im))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Sobolev,
    Kondratiev,
}

/// Weighted `L^2`-based norm specification; only `p = 2` is supported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub gamma: f64,
    pub order: u32,
    pub kind: NormKind,
}

impl WeightSpec {
    pub fn sobolev(gamma: f64, order: u32) -> Self {
        Self {
            gamma,
            order,
            kind: NormKind::Sobolev,
        }
    }

    pub fn kondratiev(gamma: f64, order: u32) -> Self {
        Self {
            gamma,
            order,
            kind: NormKind::Kondratiev,
        }
    }
}

/// `sum_{|a| <= s} || <x>^{w(a)} D^a f ||_2`, with `w(a) = gamma` (Sobolev)
/// or `gamma + |a|` (Kondratiev).
pub fn weighted_norm(f: &RealField, w: &WeightSpec) -> Result<f64> {
    if w.order > 2 {
        return Err(GlError::param(
            "order",
            format!("derivative order must be at most 2, got {}", w.order),
        ));
    }
    if !w.gamma.is_finite() {
        return Err(GlError::param("gamma", "weight exponent must be finite"));
    }
    f.ensure_finite("norm input")?;
    let grid = f.grid;

    let mut terms: Vec<(u32, RealField)> = vec![(0, f.clone())];
    if w.order >= 1 {
        terms.push((1, stencil::dx(f)));
        terms.push((1, stencil::dy(f)));
    }
    if w.order >= 2 {
        let fy = stencil::dy(f);
        terms.push((2, stencil::dxx(f)));
        terms.push((2, stencil::dx(&fy)));
        terms.push((2, stencil::dyy(f)));
    }

    let mut total = 0.0;
    for (order, d) in &terms {
        let exponent = match w.kind {
            NormKind::Sobolev => w.gamma,
            NormKind::Kondratiev => w.gamma + *order as f64,
        };
        let sq = integrate_values(&grid, |m| {
            let (x, y) = grid.xy(m);
            let v = japanese_bracket(x, y).powf(exponent) * d.values[m];
            v * v
        });
        total += sq.sqrt();
    }
    Ok(total)
}

/// Set of grid nodes with Euclidean radius in `[r0, r1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusMask {
    pub r0: f64,
    pub r1: f64,
    pub nodes: Vec<usize>,
}

impl AnnulusMask {
    pub fn new(grid: &Grid2D, r0: f64, r1: f64) -> Result<Self> {
        let bad = |reason: &str| GlError::InvalidAnnulus {
            r0,
            r1,
            reason: reason.to_string(),
        };
        if !(r0 > 0.0 && r0 < r1) {
            return Err(bad("need 0 < r0 < r1"));
        }
        if r1 > grid.half_width() * (1.0 + 1e-12) {
            return Err(bad("outer radius exceeds the grid half width"));
        }
        let nodes: Vec<usize> = (0..grid.len())
            .filter(|&m| {
                let (x, y) = grid.xy(m);
                let r = x.hypot(y);
                r >= r0 && r <= r1
            })
            .collect();
        if nodes.is_empty() {
            return Err(bad("no grid nodes inside"));
        }
        Ok(Self { r0, r1, nodes })
    }

    /// Annulus given as fractions of the half width.
    pub fn relative(grid: &Grid2D, f0: f64, f1: f64) -> Result<Self> {
        Self::new(grid, f0 * grid.half_width(), f1 * grid.half_width())
    }
}

/// `sup_{annulus} |f| <x>^{gamma+1} / ||f||_{M^{2,2}_gamma}`; zero when the norm vanishes.
pub fn decay_ratio(f: &RealField, gamma: f64, annulus: &AnnulusMask) -> Result<f64> {
    let norm = weighted_norm(f, &WeightSpec::kondratiev(gamma, 2))?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let grid = f.grid;
    let sup = annulus
        .nodes
        .iter()
        .map(|&m| {
            let (x, y) = grid.xy(m);
            f.values[m].abs() * japanese_bracket(x, y).powf(gamma + 1.0)
        })
        .fold(0.0, f64::max);
    Ok(sup / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_integrates_to_zero() {
        let g = Grid2D::new(4.0, 41).unwrap();
        assert_eq!(integrate(&RealField::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_integral() {
        let g = Grid2D::with_spacing(20.0, 0.2).unwrap();
        let f = g.sample(|x, y| (-(x * x + y * y) / 2.0).exp());
        let v = integrate(&f).unwrap();
        assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-6, "{v}");
    }

    #[test]
    fn odd_field_integrates_to_zero() {
        let g = Grid2D::new(10.0, 101).unwrap();
        let f = g.sample(|x, y| x * (1.0 + y * y).ln() + x.powi(3));
        let bound = 1e-12 * f.max_abs() * (2.0 * g.half_width()).powi(2);
        assert!(integrate(&f).unwrap().abs() <= bound);
    }

    #[test]
    fn integrate_is_linear() {
        let g = Grid2D::new(3.0, 31).unwrap();
        let a = g.sample(|x, y| (x - y).sin());
        let b = g.sample(|x, y| (x * y).cos());
        let lhs = integrate(&a.zip_with(&b, |u, v| 2.0 * u - 3.0 * v)).unwrap();
        let rhs = 2.0 * integrate(&a).unwrap() - 3.0 * integrate(&b).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn norm_order_above_two_is_rejected() {
        let g = Grid2D::new(3.0, 31).unwrap();
        let f = RealField::zeros(g);
        assert!(weighted_norm(&f, &WeightSpec::sobolev(0.5, 3)).is_err());
        assert_eq!(weighted_norm(&f, &WeightSpec::sobolev(0.5, 2)).unwrap(), 0.0);
    }

    #[test]
    fn kondratiev_dominates_sobolev() {
        let g = Grid2D::new(10.0, 101).unwrap();
        let f = g.sample(|x, y| (-(x * x + 2.0 * y * y) / 4.0).exp() * (1.0 + x));
        for s in 0..=2 {
            let ws = weighted_norm(&f, &WeightSpec::sobolev(0.5, s)).unwrap();
            let wk = weighted_norm(&f, &WeightSpec::kondratiev(0.5, s)).unwrap();
            assert!(wk >= ws);
        }
    }

    #[test]
    fn power_law_norm_matches_radial_oracle() {
        // || <x>^{0.5} <x>^{-2} ||_2 over the square [-L, L]^2: the radial
        // integral of (1 + r^2)^{-3/2} r dr is 1 - (1 + R^2)^{-1/2}, with R(theta)
        // the distance to the square's edge; the angular integral is done by a
        // fine midpoint rule.
        let l = 40.0;
        let g = Grid2D::with_spacing(l, 0.2).unwrap();
        let f = g.sample(|x, y| japanese_bracket(x, y).powi(-2));
        let v = weighted_norm(&f, &WeightSpec::sobolev(0.5, 0)).unwrap();
        let m = 200_000;
        let dtheta = 2.0 * std::f64::consts::PI / m as f64;
        let sq: f64 = (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) * dtheta;
                let r = l / t.cos().abs().max(t.sin().abs());
                (1.0 - 1.0 / (1.0 + r * r).sqrt()) * dtheta
            })
            .sum();
        let oracle = sq.sqrt();
        assert!((v / oracle - 1.0).abs() < 0.01, "{v} vs {oracle}");
    }

    #[test]
    fn annulus_validation() {
        let g = Grid2D::new(10.0, 101).unwrap();
        assert!(AnnulusMask::new(&g, 0.0, 5.0).is_err());
        assert!(AnnulusMask::new(&g, 5.0, 4.0).is_err());
        assert!(AnnulusMask::new(&g, 5.0, 11.0).is_err());
        let a = AnnulusMask::new(&g, 5.0, 6.0).unwrap();
        assert!(!a.nodes.is_empty());
    }

    #[test]
    fn decay_ratio_of_zero_is_zero() {
        let g = Grid2D::new(10.0, 101).unwrap();
        let a = AnnulusMask::new(&g, 5.0, 6.0).unwrap();
        assert_eq!(decay_ratio(&RealField::zeros(g), 0.5, &a).unwrap(), 0.0);
    }
}
