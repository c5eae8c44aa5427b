//! Truncated bivariate Taylor polynomials ("jets") of total order 4.
//!
//! Used to evaluate the cutoff and the far-field correctors together with all
//! their partial derivatives in closed form, without finite differencing.

use std::ops::{Add, Mul, Sub};

pub const ORDER: usize = 4;
const LEN: usize = (ORDER + 1) * (ORDER + 2) / 2;

#[inline]
const fn slot(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

const FACT: [f64; ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// Taylor coefficients `c[a][b]` of `f(x0 + dx, y0 + dy)` for `a + b <= 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    c: [f64; LEN],
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Self { c }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn var_x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.c[slot(1, 0)] = 1.0;
        j
    }

    pub fn var_y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.c[slot(0, 1)] = 1.0;
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d^a/dx^a d^b/dy^b` at the expansion point.
    pub fn d(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a + b <= ORDER);
        self.c[slot(a, b)] * FACT[a] * FACT[b]
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in &mut self.c {
            *v *= s;
        }
        self
    }

    /// `f(self)` given `f` and its first four derivatives at `self.value()`.
    pub fn compose(&self, derivs: [f64; ORDER + 1]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Self::constant(derivs[0]);
        let mut power = Self::constant(1.0);
        for (m, dm) in derivs.iter().enumerate().skip(1) {
            power = power * delta;
            out = out + power.scale(dm / FACT[m]);
        }
        out
    }

    pub fn ln(&self) -> Self {
        let u = self.value();
        let i = 1.0 / u;
        self.compose([
            u.ln(),
            i,
            -i * i,
            2.0 * i * i * i,
            -6.0 * i * i * i * i,
        ])
    }

    pub fn sqrt(&self) -> Self {
        let u = self.value();
        let s = u.sqrt();
        self.compose([
            s,
            0.5 / s,
            -0.25 / (s * u),
            0.375 / (s * u * u),
            -0.9375 / (s * u * u * u),
        ])
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: Jet2) -> Jet2 {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(mut self, rhs: Jet2) -> Jet2 {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let mut out = [0.0; LEN];
        for a1 in 0..=ORDER {
            for b1 in 0..=ORDER - a1 {
                let l = self.c[slot(a1, b1)];
                if l == 0.0 {
                    continue;
                }
                for a2 in 0..=ORDER - a1 - b1 {
                    for b2 in 0..=ORDER - a1 - b1 - a2 {
                        out[slot(a1 + a2, b1 + b2)] += l * rhs.c[slot(a2, b2)];
                    }
                }
            }
        }
        Jet2 { c: out }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let x = Jet2::var_x(1.5);
        let y = Jet2::var_y(-0.5);
        // f = x^3 y + y^2
        let f = x * x * x * y + y * y;
        assert!((f.value() - (1.5f64.powi(3) * -0.5 + 0.25)).abs() < 1e-14);
        assert!((f.d(1, 0) - 3.0 * 2.25 * -0.5).abs() < 1e-14);
        assert!((f.d(3, 1) - 6.0).abs() < 1e-14);
        assert!((f.d(2, 1) - 6.0 * 1.5).abs() < 1e-14);
        assert!((f.d(0, 2) - 2.0).abs() < 1e-14);
        assert_eq!(f.d(4, 0), 0.0);
    }

    #[test]
    fn log_of_radius_is_harmonic() {
        let x = Jet2::var_x(0.7);
        let y = Jet2::var_y(1.3);
        let f = (x * x + y * y).ln();
        assert!((f.d(2, 0) + f.d(0, 2)).abs() < 1e-13);
        assert!((f.d(3, 0) + f.d(1, 2)).abs() < 1e-12);
        assert!((f.d(4, 0) + 2.0 * f.d(2, 2) + f.d(0, 4)).abs() < 1e-11);
    }

    #[test]
    fn sqrt_matches_finite_differences() {
        let f = |x: f64, y: f64| (2.0 * x * x + y * y).sqrt();
        let (x0, y0) = (0.4, 0.9);
        let j = (Jet2::var_x(x0) * Jet2::var_x(x0) * 2.0 + Jet2::var_y(y0) * Jet2::var_y(y0)).sqrt();
        let h = 1e-3;
        let fxx = (f(x0 + h, y0) - 2.0 * f(x0, y0) + f(x0 - h, y0)) / (h * h);
        let fxy = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h) + f(x0 - h, y0 - h))
            / (4.0 * h * h);
        assert!((j.d(2, 0) - fxx).abs() < 1e-5);
        assert!((j.d(1, 1) - fxy).abs() < 1e-5);
    }
}
