//! Cutoff `chi` and the logarithmic far-field correctors.
//!
//! With `Q = chi * ln(alpha x^2 + y^2)`:
//!
//! * `P1 = (1 - alpha) / (2 b alpha) * dQ/dx`  (equal to `-dQ/dx / (4 tau^2)`)
//! * `P2 = dQ/dx / 2`
//! * `P3 = dQ/dy / 2`
//!
//! `chi` is a polynomial smoothstep in `rho = sqrt(alpha x^2 + y^2)`, zero for
//! `rho <= r_in`, one for `rho >= r_out`. All derivatives are evaluated in
//! closed form through [`Jet2`].

use serde::{Deserialize, Serialize};

use crate::error::{GlError, Result};
use crate::grid::{Grid2D, RealField};
use crate::jet::Jet2;
use crate::model::params::GLParams;

/// Smoothstep cutoff of class `C^smoothness` (polynomial degree `2 smoothness + 1`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CutoffSpec", into = "CutoffSpec")]
pub struct Cutoff {
    pub r_in: f64,
    pub r_out: f64,
    pub smoothness: u32,
    coeffs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CutoffSpec {
    r_in: f64,
    r_out: f64,
    #[serde(default = "default_smoothness")]
    smoothness: u32,
}

fn default_smoothness() -> u32 {
    4
}

impl TryFrom<CutoffSpec> for Cutoff {
    type Error = GlError;
    fn try_from(s: CutoffSpec) -> Result<Self> {
        Cutoff::new(s.r_in, s.r_out, s.smoothness)
    }
}

impl From<Cutoff> for CutoffSpec {
    fn from(c: Cutoff) -> Self {
        Self {
            r_in: c.r_in,
            r_out: c.r_out,
            smoothness: c.smoothness,
        }
    }
}

impl PartialEq for Cutoff {
    fn eq(&self, other: &Self) -> bool {
        self.r_in == other.r_in && self.r_out == other.r_out && self.smoothness == other.smoothness
    }
}

impl Default for Cutoff {
    /// Transition on `1/2 <= rho <= 1`.
    fn default() -> Self {
        Self::new(0.5, 1.0, 4).expect("default cutoff is valid")
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Cutoff {
    pub fn new(r_in: f64, r_out: f64, smoothness: u32) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(GlError::param("cutoff", "need 0 < r_in < r_out"));
        }
        if smoothness < 4 {
            return Err(GlError::param(
                "cutoff.smoothness",
                "correctors need four classical derivatives of chi",
            ));
        }
        // S(t) = t^{N+1} sum_j C(N+j, j) C(2N+1, N-j) (-t)^j
        let n = smoothness as u64;
        let mut coeffs = vec![0.0; (2 * n + 2) as usize];
        for j in 0..=n {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[(n + 1 + j) as usize] = sign * binomial(n + j, j) * binomial(2 * n + 1, n - j);
        }
        Ok(Self {
            r_in,
            r_out,
            smoothness,
            coeffs,
        })
    }

    /// Transition on `2 <= rho <= 4`. Wide enough that grid sums over the
    /// transition band are accurate at `h = 0.2`; used by the experiments.
    pub fn wide() -> Self {
        Self::new(2.0, 4.0, 4).expect("wide cutoff is valid")
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Smoothstep value and first four derivatives at `t` in `[0, 1]`.
    fn step_derivs(coeffs: &[f64], t: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (d, slot) in out.iter_mut().enumerate() {
            // d-th derivative via Horner on the differentiated coefficients
            let mut acc = 0.0;
            for p in (d..coeffs.len()).rev() {
                let falling: f64 = (0..d).map(|i| (p - i) as f64).product();
                acc = acc * t + coeffs[p] * falling;
            }
            *slot = acc;
        }
        out
    }

    /// Smoothstep profile `S(t)`; used by tests.
    pub fn profile(&self, t: f64) -> [f64; 5] {
        Self::step_derivs(&self.coeffs, t.clamp(0.0, 1.0))
    }

    /// Jets of `chi` and `Q = chi ln(alpha x^2 + y^2)` at `(x, y)`.
    pub fn jets(&self, x: f64, y: f64, alpha: f64) -> (Jet2, Jet2) {
        let rho2 = alpha * x * x + y * y;
        let rin2 = self.r_in * self.r_in;
        if rho2 <= rin2 {
            return (Jet2::zero(), Jet2::zero());
        }
        let xj = Jet2::var_x(x);
        let yj = Jet2::var_y(y);
        let u = xj * xj * alpha + yj * yj;
        let log = u.ln();
        if rho2 >= self.r_out * self.r_out {
            return (Jet2::constant(1.0), log);
        }
        let width = self.r_out - self.r_in;
        let t = (u.sqrt() - Jet2::constant(self.r_in)).scale(1.0 / width);
        let chi = t.compose(Self::step_derivs(&self.coeffs, t.value()));
        (chi, chi * log)
    }
}

/// A field together with its first and second partial derivatives.
#[derive(Clone, Debug)]
pub struct DerivSet {
    pub val: RealField,
    pub dx: RealField,
    pub dy: RealField,
    pub dxx: RealField,
    pub dxy: RealField,
    pub dyy: RealField,
}

impl DerivSet {
    pub fn lap(&self) -> RealField {
        self.dxx.zip_with(&self.dyy, |a, b| a + b)
    }

    fn from_jets(grid: &Grid2D, jets: &[Jet2], scale: f64, shift: (usize, usize)) -> Self {
        let (sa, sb) = shift;
        let field = |a: usize, b: usize| RealField {
            grid: *grid,
            values: jets.iter().map(|j| scale * j.d(a + sa, b + sb)).collect(),
        };
        Self {
            val: field(0, 0),
            dx: field(1, 0),
            dy: field(0, 1),
            dxx: field(2, 0),
            dxy: field(1, 1),
            dyy: field(0, 2),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FarFieldSample {
    pub p1: DerivSet,
    pub p2: DerivSet,
    pub p3: DerivSet,
}

/// `(1 - alpha) / (2 b alpha)`, written in the form that stays finite as `k -> 0`.
pub fn p1_coefficient(params: &GLParams) -> f64 {
    -1.0 / (4.0 * params.tau * params.tau)
}

/// Correctors `P1`, `P2`, `P3` and their derivatives up to order 2 on the grid.
pub fn eval_farfield(cutoff: &Cutoff, params: &GLParams, grid: &Grid2D) -> FarFieldSample {
    let jets: Vec<Jet2> = (0..grid.len())
        .map(|m| {
            let (x, y) = grid.xy(m);
            cutoff.jets(x, y, params.alpha).1
        })
        .collect();
    FarFieldSample {
        p1: DerivSet::from_jets(grid, &jets, p1_coefficient(params), (1, 0)),
        p2: DerivSet::from_jets(grid, &jets, 0.5, (1, 0)),
        p3: DerivSet::from_jets(grid, &jets, 0.5, (0, 1)),
    }
}

/// Per-node values the amplitude-phase residual needs: value, x, y and
/// Laplacian of `chi`, of `Q`, and of the slaved amplitude corrector
/// `-dQ/dx / (2 tau^2)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NodeCorrectors {
    pub chi: [f64; 4],
    pub q: [f64; 4],
    pub amp: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct CorrectorFields {
    pub nodes: Vec<NodeCorrectors>,
}

impl CorrectorFields {
    pub fn new(cutoff: &Cutoff, params: &GLParams, grid: &Grid2D) -> Self {
        let amp_scale = -1.0 / (2.0 * params.tau * params.tau);
        let nodes = (0..grid.len())
            .map(|m| {
                let (x, y) = grid.xy(m);
                let (chi, q) = cutoff.jets(x, y, params.alpha);
                NodeCorrectors {
                    chi: [chi.value(), chi.d(1, 0), chi.d(0, 1), chi.d(2, 0) + chi.d(0, 2)],
                    q: [q.value(), q.d(1, 0), q.d(0, 1), q.d(2, 0) + q.d(0, 2)],
                    amp: [
                        amp_scale * q.d(1, 0),
                        amp_scale * q.d(2, 0),
                        amp_scale * q.d(1, 1),
                        amp_scale * (q.d(3, 0) + q.d(1, 2)),
                    ],
                }
            })
            .collect();
        Self { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        for (n, deg) in [(4u32, 9usize), (6, 13)] {
            let c = Cutoff::new(0.5, 1.0, n).unwrap();
            assert_eq!(c.degree(), deg);
            let s0 = c.profile(0.0);
            let s1 = c.profile(1.0);
            assert!((s0[0]).abs() < 1e-14 && (s1[0] - 1.0).abs() < 1e-12);
            for d in 1..5 {
                assert!(s0[d].abs() < 1e-10, "S^({d})(0) = {}", s0[d]);
                assert!(s1[d].abs() < 1e-9, "S^({d})(1) = {}", s1[d]);
            }
            assert!((c.profile(0.5)[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn p1_coefficient_matches_definition() {
        let p = GLParams::new(0.3, 0.0, 0.0).unwrap();
        let direct = (1.0 - p.alpha) / (2.0 * p.b * p.alpha);
        assert!((p1_coefficient(&p) - direct).abs() < 1e-13);
    }

    #[test]
    fn p2_far_out_is_one_over_x() {
        let p = GLParams::new(0.3, 0.0, 0.0).unwrap();
        let (_, q) = Cutoff::default().jets(10.0, 0.0, p.alpha);
        assert!((0.5 * q.d(1, 0) - 0.1).abs() < 1e-14);
    }

    #[test]
    fn correctors_vanish_inside_cutoff_and_are_finite() {
        let p = GLParams::new(0.3, 0.0, 0.0).unwrap();
        let grid = Grid2D::new(3.0, 61).unwrap();
        let ff = eval_farfield(&Cutoff::default(), &p, &grid);
        for set in [&ff.p1, &ff.p2, &ff.p3] {
            for f in [&set.val, &set.dx, &set.dy, &set.dxx, &set.dxy, &set.dyy] {
                f.ensure_finite("corrector").unwrap();
                for m in 0..grid.len() {
                    let (x, y) = grid.xy(m);
                    if (p.alpha * x * x + y * y).sqrt() <= 0.5 {
                        assert_eq!(f.values[m], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn cutoff_is_exactly_one_outside() {
        let p = GLParams::new(0.45, 0.0, 0.0).unwrap();
        let c = Cutoff::default();
        let (chi, q) = c.jets(2.0, -3.0, p.alpha);
        assert_eq!(chi.value(), 1.0);
        assert_eq!(q.value(), (p.alpha * 4.0 + 9.0f64).ln());
    }

    #[test]
    fn serde_round_trip_rebuilds_coefficients() {
        let c = Cutoff::new(0.4, 1.2, 6).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: Cutoff = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.profile(0.3), c.profile(0.3));
        assert!(serde_json::from_str::<Cutoff>(r#"{"r_in": 1.0, "r_out": 0.5}"#).is_err());
    }

    #[test]
    fn p1_decays_like_one_over_r() {
        let p = GLParams::new(0.3, 0.0, 0.0).unwrap();
        let c = Cutoff::default();
        let mut worst = 0.0_f64;
        for i in 0..400 {
            let t = i as f64 * std::f64::consts::TAU / 400.0;
            for r in [20.0, 25.0, 30.0] {
                let (x, y) = (r * t.cos(), r * t.sin());
                let (_, q) = c.jets(x, y, p.alpha);
                worst = worst.max((p1_coefficient(&p) * q.d(1, 0)).abs() * r);
            }
        }
        // For 1 <= alpha <= 2, |dQ/dx| r <= 2 on chi = 1, so |P1| r <= 1 / (2 tau^2).
        assert!(worst <= 1.0 / (2.0 * p.tau * p.tau) + 1e-12);
    }
}
