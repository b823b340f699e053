//! Truncated power series in up to three variables.
//!
//! A monomial xⁱyʲλᵏ is kept when i ≤ degs[0], j ≤ degs[1], k ≤ degs[2],
//! i + j + k ≤ total and i + j ≤ xy_total.

use crate::C64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub degs: [usize; 3],
    pub total: usize,
    pub xy_total: usize,
}

impl Shape {
    pub fn new(degs: [usize; 3], total: usize) -> Self {
        Shape { degs, total, xy_total: total }
    }

    /// Series in one variable up to the given order.
    pub fn univariate(order: usize) -> Self {
        Shape::new([order, 0, 0], order)
    }

    /// Series in two variables truncated at a total degree.
    pub fn bivariate(order: usize) -> Self {
        Shape::new([order, order, 0], order)
    }

    /// Series in (x, y, λ) with total (x, y)-degree ≤ order and λ-degree ≤ lambda_order.
    /// Substituting series that vanish at x = y = 0 is exact on the kept coefficients.
    pub fn graded(order: usize, lambda_order: usize) -> Self {
        Shape { degs: [order, order, lambda_order], total: order + lambda_order, xy_total: order }
    }

    pub fn len(&self) -> usize {
        (self.degs[0] + 1) * (self.degs[1] + 1) * (self.degs[2] + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.degs[0] + 1) * (j + (self.degs[1] + 1) * k)
    }

    pub fn keeps(&self, i: usize, j: usize, k: usize) -> bool {
        i <= self.degs[0] && j <= self.degs[1] && k <= self.degs[2] && i + j + k <= self.total && i + j <= self.xy_total
    }

    pub fn exponents(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % (self.degs[0] + 1);
        let rest = idx / (self.degs[0] + 1);
        (i, rest % (self.degs[1] + 1), rest / (self.degs[1] + 1))
    }

    /// All kept monomials in index order.
    pub fn monomials(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.len()).map(|idx| self.exponents(idx)).filter(|&(i, j, k)| self.keeps(i, j, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub shape: Shape,
    pub c: Vec<C64>,
}

impl Jet {
    pub fn zero(shape: Shape) -> Self {
        Jet { shape, c: vec![C64::new(0.0, 0.0); shape.len()] }
    }

    pub fn constant(shape: Shape, value: C64) -> Self {
        let mut j = Jet::zero(shape);
        j.c[0] = value;
        j
    }

    /// The series value + v, where v is variable 0, 1 or 2.
    pub fn variable(shape: Shape, var: usize, value: C64) -> Self {
        let mut j = Jet::constant(shape, value);
        let e = match var {
            0 => (1, 0, 0),
            1 => (0, 1, 0),
            _ => (0, 0, 1),
        };
        if shape.keeps(e.0, e.1, e.2) {
            let idx = shape.index(e.0, e.1, e.2);
            j.c[idx] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn coeff(&self, i: usize, j: usize, k: usize) -> C64 {
        if self.shape.keeps(i, j, k) {
            self.c[self.shape.index(i, j, k)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        if self.shape.keeps(i, j, k) {
            let idx = self.shape.index(i, j, k);
            self.c[idx] = v;
        }
    }

    pub fn constant_term(&self) -> C64 {
        self.c[0]
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet { shape: self.shape, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add_const(&self, s: C64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Re-truncates into another shape.
    pub fn reshape(&self, shape: Shape) -> Jet {
        let mut out = Jet::zero(shape);
        for (i, j, k) in self.shape.monomials() {
            if shape.keeps(i, j, k) {
                out.set(i, j, k, self.coeff(i, j, k));
            }
        }
        out
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let shape = self.shape;
        let mut out = Jet::zero(shape);
        let terms_a: Vec<(usize, usize, usize, C64)> = shape
            .monomials()
            .filter_map(|(i, j, k)| {
                let v = self.c[shape.index(i, j, k)];
                (v.norm() != 0.0).then_some((i, j, k, v))
            })
            .collect();
        let terms_b: Vec<(usize, usize, usize, C64)> = other
            .shape
            .monomials()
            .filter_map(|(i, j, k)| {
                let v = other.c[other.shape.index(i, j, k)];
                (v.norm() != 0.0).then_some((i, j, k, v))
            })
            .collect();
        for &(i1, j1, k1, a) in &terms_a {
            for &(i2, j2, k2, b) in &terms_b {
                let (i, j, k) = (i1 + i2, j1 + j2, k1 + k2);
                if shape.keeps(i, j, k) {
                    let idx = shape.index(i, j, k);
                    out.c[idx] += a * b;
                }
            }
        }
        out
    }

    pub fn powu(&self, n: u32) -> Jet {
        let mut out = Jet::constant(self.shape, C64::new(1.0, 0.0));
        for _ in 0..n {
            out = out.mul_jet(self);
        }
        out
    }

    /// 1/self, defined when the constant term is nonzero.
    pub fn recip(&self) -> Option<Jet> {
        let a0 = self.c[0];
        if a0.norm() == 0.0 {
            return None;
        }
        let inv0 = a0.inv();
        let h = self.add_const(-a0).scale(-inv0);
        let mut term = Jet::constant(self.shape, C64::new(1.0, 0.0));
        let mut sum = term.clone();
        for _ in 0..self.shape.total.max(1) {
            term = term.mul_jet(&h);
            if term.max_abs() == 0.0 {
                break;
            }
            sum = &sum + &term;
        }
        Some(sum.scale(inv0))
    }

    /// Evaluates Σ polynomial coefficients (lowest first) at self.
    pub fn poly(&self, coeffs: &[C64]) -> Jet {
        let mut out = Jet::zero(self.shape);
        for cf in coeffs.iter().rev() {
            out = out.mul_jet(self).add_const(*cf);
        }
        out
    }

    pub fn eval(&self, x: C64, y: C64, l: C64) -> C64 {
        let mut sum = C64::new(0.0, 0.0);
        for (i, j, k) in self.shape.monomials() {
            let v = self.c[self.shape.index(i, j, k)];
            if v.norm() != 0.0 {
                sum += v * x.powu(i as u32) * y.powu(j as u32) * l.powu(k as u32);
            }
        }
        sum
    }

    /// Partial derivative with respect to variable 0, 1 or 2 (top order dropped).
    pub fn derivative(&self, var: usize) -> Jet {
        let mut out = Jet::zero(self.shape);
        for (i, j, k) in self.shape.monomials() {
            let v = self.c[self.shape.index(i, j, k)];
            let (e, (ti, tj, tk)) = match var {
                0 => (i, (i.wrapping_sub(1), j, k)),
                1 => (j, (i, j.wrapping_sub(1), k)),
                _ => (k, (i, j, k.wrapping_sub(1))),
            };
            if e > 0 {
                out.set(ti, tj, tk, v * e as f64);
            }
        }
        out
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet { shape: self.shape, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet { shape: self.shape, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}
