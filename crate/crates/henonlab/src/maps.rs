//! Holomorphic self-maps of (a domain in) ℂ² acting on points and on jets.

use crate::family::{Escaped, HenonMap, OVERFLOW_BOUND};
use crate::jet::Jet;
use crate::linalg::{Mat2, Point2};
use crate::C64;

pub trait PlaneMap: Sync {
    fn eval(&self, x: Point2) -> Result<Point2, Escaped>;
    fn differential(&self, x: Point2) -> Mat2;
    /// Composition with a pair of jets; None where the map is undefined.
    fn eval_jet(&self, z: &Jet, w: &Jet) -> Option<(Jet, Jet)>;
    /// Algebraic degree (1 for linear maps).
    fn degree(&self) -> usize {
        1
    }
}

fn checked(x: Point2, last: Point2, step: usize) -> Result<Point2, Escaped> {
    if x.is_finite() && x.max_abs() <= OVERFLOW_BOUND {
        Ok(x)
    } else {
        Err(Escaped { step, last })
    }
}

/// The iterate fⁿ of a Hénon map, or its inverse f⁻ⁿ.
#[derive(Debug, Clone, Copy)]
pub struct Iterate<'a> {
    pub map: &'a HenonMap,
    pub n: usize,
    pub inverse: bool,
}

impl<'a> Iterate<'a> {
    pub fn forward(map: &'a HenonMap, n: usize) -> Self {
        Iterate { map, n, inverse: false }
    }

    pub fn backward(map: &'a HenonMap, n: usize) -> Self {
        Iterate { map, n, inverse: true }
    }
}

impl PlaneMap for Iterate<'_> {
    fn eval(&self, x: Point2) -> Result<Point2, Escaped> {
        if self.inverse {
            self.map.iterate_inverse(x, self.n)
        } else {
            self.map.iterate(x, self.n)
        }
    }

    fn differential(&self, x: Point2) -> Mat2 {
        let r = if self.inverse {
            self.map.inverse_orbit_with_differential(x, self.n)
        } else {
            self.map.orbit_with_differential(x, self.n)
        };
        r.map(|(_, m)| m).unwrap_or(Mat2::new(
            C64::new(f64::NAN, 0.0),
            C64::new(f64::NAN, 0.0),
            C64::new(f64::NAN, 0.0),
            C64::new(f64::NAN, 0.0),
        ))
    }

    fn eval_jet(&self, z: &Jet, w: &Jet) -> Option<(Jet, Jet)> {
        let (mut z, mut w) = (z.clone(), w.clone());
        for _ in 0..self.n {
            if self.inverse {
                for f in self.map.factors().iter().rev() {
                    let nz = w.clone();
                    let nw = (&w.poly(&f.p.0) - &z).scale(f.b.inv());
                    z = nz;
                    w = nw;
                }
            } else {
                for f in self.map.factors() {
                    let nz = &z.poly(&f.p.0) - &w.scale(f.b);
                    w = z;
                    z = nz;
                }
            }
            if !z.is_finite() || !w.is_finite() {
                return None;
            }
        }
        Some((z, w))
    }

    fn degree(&self) -> usize {
        self.map.degree().pow(self.n as u32)
    }
}

/// x ↦ A·x, a harness case for series solvers.
#[derive(Debug, Clone, Copy)]
pub struct LinearMap(pub Mat2);

impl PlaneMap for LinearMap {
    fn eval(&self, x: Point2) -> Result<Point2, Escaped> {
        checked(self.0.apply(x), x, 0)
    }

    fn differential(&self, _x: Point2) -> Mat2 {
        self.0
    }

    fn eval_jet(&self, z: &Jet, w: &Jet) -> Option<(Jet, Jet)> {
        let m = self.0;
        Some((&z.scale(m.a) + &w.scale(m.b), &z.scale(m.c) + &w.scale(m.d)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Shape;

    #[test]
    fn jet_evaluation_matches_points() {
        let map = HenonMap::quadratic(C64::new(-0.3, 0.1), C64::new(0.4, 0.0)).unwrap();
        for inverse in [false, true] {
            let it = Iterate { map: &map, n: 2, inverse };
            let x = Point2::new(C64::new(0.3, -0.2), C64::new(0.1, 0.5));
            let shape = Shape::bivariate(2);
            let z = Jet::variable(shape, 0, x.z);
            let w = Jet::variable(shape, 1, x.w);
            let (jz, jw) = it.eval_jet(&z, &w).unwrap();
            let y = it.eval(x).unwrap();
            assert!((jz.constant_term() - y.z).norm() < 1e-13);
            assert!((jw.constant_term() - y.w).norm() < 1e-13);
            let d = it.differential(x);
            assert!((jz.coeff(1, 0, 0) - d.a).norm() < 1e-12);
            assert!((jz.coeff(0, 1, 0) - d.b).norm() < 1e-12);
            assert!((jw.coeff(1, 0, 0) - d.c).norm() < 1e-12);
            assert!((jw.coeff(0, 1, 0) - d.d).norm() < 1e-12);
        }
    }
}
