//! Points of ℂ² and 2×2 complex matrices.

use crate::C64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub z: C64,
    pub w: C64,
}

impl Point2 {
    pub const fn new(z: C64, w: C64) -> Self {
        Self { z, w }
    }

    pub fn real(z: f64, w: f64) -> Self {
        Self::new(C64::new(z, 0.0), C64::new(w, 0.0))
    }

    pub fn zero() -> Self {
        Self::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn norm(&self) -> f64 {
        (self.z.norm_sqr() + self.w.norm_sqr()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.z.norm().max(self.w.norm())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.z * s, self.w * s)
    }

    pub fn dot(&self, other: &Point2) -> C64 {
        self.z * other.z + self.w * other.w
    }

    pub fn is_finite(&self) -> bool {
        self.z.re.is_finite() && self.z.im.is_finite() && self.w.re.is_finite() && self.w.im.is_finite()
    }

    pub fn to_pairs(&self) -> [[f64; 2]; 2] {
        [[self.z.re, self.z.im], [self.w.re, self.w.im]]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.z + o.z, self.w + o.w)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.z - o.z, self.w - o.w)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.z, -self.w)
    }
}

/// Row-major 2×2 complex matrix [[a, b], [c, d]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn from_columns(c0: Point2, c1: Point2) -> Self {
        Self::new(c0.z, c1.z, c0.w, c1.w)
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn norm(&self) -> f64 {
        (self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()).sqrt()
    }

    pub fn apply(&self, v: Point2) -> Point2 {
        Point2::new(self.a * v.z + self.b * v.w, self.c * v.z + self.d * v.w)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn sub_scalar(&self, s: C64) -> Self {
        Self::new(self.a - s, self.b, self.c, self.d - s)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == 0.0 || !det.re.is_finite() || !det.im.is_finite() {
            return None;
        }
        let inv = det.inv();
        Some(Self::new(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv))
    }

    /// Solves self·x = rhs by Cramer's rule.
    pub fn solve(&self, rhs: Point2) -> Option<Point2> {
        self.inverse().map(|m| m.apply(rhs))
    }

    /// Eigenvalues ordered by modulus descending; near-ties ordered by argument ascending.
    pub fn eigenvalues(&self) -> (C64, C64) {
        let half_tr = self.trace() * 0.5;
        let det = self.det();
        let disc = (half_tr * half_tr - det).sqrt();
        let (p, m) = (half_tr + disc, half_tr - disc);
        let big = if p.norm() >= m.norm() { p } else { m };
        let small = if big.norm() > 0.0 { det / big } else { C64::new(0.0, 0.0) };
        order_pair(big, small)
    }

    /// Unit eigenvector for a given eigenvalue.
    pub fn eigenvector(&self, mu: C64) -> Point2 {
        let r0 = Point2::new(self.b, mu - self.a);
        let r1 = Point2::new(mu - self.d, self.c);
        let v = if r0.norm() >= r1.norm() { r0 } else { r1 };
        let n = v.norm();
        if n == 0.0 {
            return Point2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        }
        normalize_phase(v.scale(C64::new(1.0 / n, 0.0)))
    }
}

/// Orders a pair by modulus descending, breaking near-ties by argument.
pub fn order_pair(x: C64, y: C64) -> (C64, C64) {
    let (nx, ny) = (x.norm(), y.norm());
    let scale = nx.max(ny).max(1e-300);
    if (nx - ny).abs() <= 1e-12 * scale {
        if x.arg() <= y.arg() {
            (x, y)
        } else {
            (y, x)
        }
    } else if nx > ny {
        (x, y)
    } else {
        (y, x)
    }
}

/// Fixes the phase so the largest component is real positive.
pub fn normalize_phase(v: Point2) -> Point2 {
    let pivot = if v.z.norm() >= v.w.norm() { v.z } else { v.w };
    if pivot.norm() == 0.0 {
        return v;
    }
    v.scale(pivot.conj() / pivot.norm())
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenpairs_of_saddle_differential() {
        let m = Mat2::new(C64::new(3.0, 0.0), C64::new(-0.5, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let (k1, k2) = m.eigenvalues();
        let s7 = 7f64.sqrt();
        assert!((k1 - C64::new((3.0 + s7) / 2.0, 0.0)).norm() < 1e-14);
        assert!((k2 - C64::new((3.0 - s7) / 2.0, 0.0)).norm() < 1e-14);
        for k in [k1, k2] {
            let v = m.eigenvector(k);
            assert!((m.apply(v) - v.scale(k)).norm() < 1e-14);
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_moduli_ordered_by_argument() {
        let m = Mat2::new(C64::new(0.0, 0.0), C64::new(-0.5, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let (k1, k2) = m.eigenvalues();
        assert!(k1.arg() < k2.arg());
        assert!((k1.norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inverse_and_solve() {
        let m = Mat2::new(C64::new(1.0, 1.0), C64::new(2.0, 0.0), C64::new(0.0, -1.0), C64::new(3.0, 0.5));
        let inv = m.inverse().unwrap();
        assert!(((m * inv) - Mat2::identity()).norm() < 1e-15);
        let rhs = Point2::new(C64::new(1.0, 0.0), C64::new(0.0, 2.0));
        let x = m.solve(rhs).unwrap();
        assert!((m.apply(x) - rhs).norm() < 1e-14);
    }
}
