//! Hénon factors, their compositions and one-parameter families.

use crate::linalg::{Mat2, Point2};
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coordinates above this modulus are treated as escaped.
pub const OVERFLOW_BOUND: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("orbit escaped after {step} finite iterates")]
pub struct Escaped {
    /// Number of completed iterates that stayed finite.
    pub step: usize,
    /// Last finite point.
    pub last: Point2,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    #[error("factor polynomial has degree {0}, need at least 2")]
    LowDegree(usize),
    #[error("Jacobian factor b vanishes")]
    ZeroJacobian,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("map needs at least one factor")]
    Empty,
    #[error("parameter {lambda} outside domain (center {center}, radius {radius})")]
    Domain { lambda: C64, center: C64, radius: f64 },
    #[error("degree changes across the family at lambda = {0}")]
    DegreeDrop(C64),
    #[error("invalid family description: {0}")]
    Spec(String),
}

/// Polynomial with complex coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<C64>);

impl Poly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        let mut c = coeffs;
        while c.len() > 1 && c.last().map_or(false, |v| *v == C64::new(0.0, 0.0)) {
            c.pop();
        }
        Poly(c)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn leading(&self) -> C64 {
        *self.0.last().unwrap_or(&C64::new(0.0, 0.0))
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.0.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Value and first derivative.
    pub fn eval_d(&self, z: C64) -> (C64, C64) {
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for c in self.0.iter().rev() {
            d = d * z + v;
            v = v * z + c;
        }
        (v, d)
    }

    pub fn sum_abs(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).sum()
    }
}

/// One generalized Hénon factor (z, w) ↦ (p(z) − b·w, z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenonFactor {
    pub p: Poly,
    pub b: C64,
}

impl HenonFactor {
    pub fn new(p: Poly, b: C64) -> Result<Self, FamilyError> {
        if p.0.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) || !b.re.is_finite() || !b.im.is_finite() {
            return Err(FamilyError::NonFinite);
        }
        let p = Poly::new(p.0);
        if p.degree() < 2 {
            return Err(FamilyError::LowDegree(p.degree()));
        }
        if b == C64::new(0.0, 0.0) {
            return Err(FamilyError::ZeroJacobian);
        }
        Ok(Self { p, b })
    }

    pub fn apply(&self, x: Point2) -> Point2 {
        Point2::new(self.p.eval(x.z) - self.b * x.w, x.z)
    }

    pub fn apply_inverse(&self, x: Point2) -> Point2 {
        Point2::new(x.w, (self.p.eval(x.w) - x.z) / self.b)
    }

    pub fn differential(&self, x: Point2) -> Mat2 {
        let (_, dp) = self.p.eval_d(x.z);
        Mat2::new(dp, -self.b, C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn differential_inverse(&self, x: Point2) -> Mat2 {
        let (_, dp) = self.p.eval_d(x.w);
        Mat2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), -self.b.inv(), dp / self.b)
    }
}

fn finite_point(x: Point2) -> bool {
    x.z.re.is_finite()
        && x.z.im.is_finite()
        && x.w.re.is_finite()
        && x.w.im.is_finite()
        && x.max_abs() <= OVERFLOW_BOUND
}

/// Composition of Hénon factors, applied first to last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenonMap {
    factors: Vec<HenonFactor>,
}

impl HenonMap {
    pub fn new(factors: Vec<HenonFactor>) -> Result<Self, FamilyError> {
        if factors.is_empty() {
            return Err(FamilyError::Empty);
        }
        Ok(Self { factors })
    }

    /// Single quadratic factor (z² + c − b·w, z).
    pub fn quadratic(c: C64, b: C64) -> Result<Self, FamilyError> {
        let p = Poly::new(vec![c, C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        Self::new(vec![HenonFactor::new(p, b)?])
    }

    pub fn factors(&self) -> &[HenonFactor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.iter().map(|f| f.p.degree()).product()
    }

    pub fn jacobian(&self) -> C64 {
        self.factors.iter().fold(C64::new(1.0, 0.0), |acc, f| acc * f.b)
    }

    pub fn is_moderately_dissipative(&self) -> bool {
        let d = self.degree() as f64;
        self.jacobian().norm() < 1.0 / (d * d)
    }

    /// Filtration radius 2·(1 + Σ|coefficients|), maximized over factors.
    pub fn default_escape_radius(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| 2.0 * (1.0 + f.p.sum_abs() + f.b.norm()))
            .fold(0.0, f64::max)
    }

    /// Leading coefficient of z ↦ first coordinate of the composition, as a function of z alone.
    pub fn forward_leading(&self) -> C64 {
        self.factors.iter().fold(C64::new(1.0, 0.0), |acc, f| {
            f.p.leading() * acc.powu(f.p.degree() as u32)
        })
    }

    /// Leading coefficient of w ↦ second coordinate of the inverse composition.
    pub fn backward_leading(&self) -> C64 {
        self.factors.iter().rev().fold(C64::new(1.0, 0.0), |acc, f| {
            f.p.leading() * acc.powu(f.p.degree() as u32) / f.b
        })
    }

    pub fn apply_raw(&self, x: Point2) -> Point2 {
        self.factors.iter().fold(x, |p, f| f.apply(p))
    }

    pub fn apply_inverse_raw(&self, x: Point2) -> Point2 {
        self.factors.iter().rev().fold(x, |p, f| f.apply_inverse(p))
    }

    pub fn eval(&self, x: Point2) -> Result<Point2, Escaped> {
        let y = self.apply_raw(x);
        if finite_point(y) {
            Ok(y)
        } else {
            Err(Escaped { step: 0, last: x })
        }
    }

    pub fn eval_inverse(&self, x: Point2) -> Result<Point2, Escaped> {
        let y = self.apply_inverse_raw(x);
        if finite_point(y) {
            Ok(y)
        } else {
            Err(Escaped { step: 0, last: x })
        }
    }

    pub fn iterate(&self, x: Point2, n: usize) -> Result<Point2, Escaped> {
        let mut p = x;
        for step in 0..n {
            p = self.eval(p).map_err(|e| Escaped { step, last: e.last })?;
        }
        Ok(p)
    }

    pub fn iterate_inverse(&self, x: Point2, n: usize) -> Result<Point2, Escaped> {
        let mut p = x;
        for step in 0..n {
            p = self.eval_inverse(p).map_err(|e| Escaped { step, last: e.last })?;
        }
        Ok(p)
    }

    pub fn differential(&self, x: Point2) -> Mat2 {
        let mut m = Mat2::identity();
        let mut p = x;
        for f in &self.factors {
            m = f.differential(p) * m;
            p = f.apply(p);
        }
        m
    }

    pub fn differential_inverse(&self, x: Point2) -> Mat2 {
        let mut m = Mat2::identity();
        let mut p = x;
        for f in self.factors.iter().rev() {
            m = f.differential_inverse(p) * m;
            p = f.apply_inverse(p);
        }
        m
    }

    /// Cocycle Df(fⁿ⁻¹x)···Df(x).
    pub fn orbit_differential(&self, x: Point2, n: usize) -> Result<Mat2, Escaped> {
        Ok(self.orbit_with_differential(x, n)?.1)
    }

    /// End point and differential of fⁿ at x.
    pub fn orbit_with_differential(&self, x: Point2, n: usize) -> Result<(Point2, Mat2), Escaped> {
        let mut m = Mat2::identity();
        let mut p = x;
        for step in 0..n {
            m = self.differential(p) * m;
            p = self.eval(p).map_err(|e| Escaped { step, last: e.last })?;
        }
        Ok((p, m))
    }

    /// End point and differential of f⁻ⁿ at x.
    pub fn inverse_orbit_with_differential(&self, x: Point2, n: usize) -> Result<(Point2, Mat2), Escaped> {
        let mut m = Mat2::identity();
        let mut p = x;
        for step in 0..n {
            m = self.differential_inverse(p) * m;
            p = self.eval_inverse(p).map_err(|e| Escaped { step, last: e.last })?;
        }
        Ok((p, m))
    }
}

/// Polynomial in the family parameter λ, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LamPoly(pub Vec<C64>);

impl LamPoly {
    pub fn constant(c: C64) -> Self {
        LamPoly(vec![c])
    }

    pub fn eval(&self, lambda: C64) -> C64 {
        self.0.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * lambda + c)
    }

    pub fn derivative(&self, lambda: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.0.iter().enumerate().skip(1).rev() {
            acc = acc * lambda + c * k as f64;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFactor {
    pub p: Vec<LamPoly>,
    pub b: LamPoly,
}

impl ParamFactor {
    fn nominal_degree(&self) -> usize {
        self.p.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }

    fn at(&self, lambda: C64) -> Result<HenonFactor, FamilyError> {
        let coeffs: Vec<C64> = self.p.iter().map(|c| c.eval(lambda)).collect();
        let deg = self.nominal_degree();
        if coeffs.get(deg).map_or(true, |c| *c == C64::new(0.0, 0.0)) {
            return Err(FamilyError::DegreeDrop(lambda));
        }
        HenonFactor::new(Poly::new(coeffs), self.b.eval(lambda))
    }

    fn apply(&self, lambda: C64, x: Point2) -> Point2 {
        let pz = self.p.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * x.z + c.eval(lambda));
        Point2::new(pz - self.b.eval(lambda) * x.w, x.z)
    }

    /// ∂/∂λ of one factor application at fixed x.
    fn dlambda(&self, lambda: C64, x: Point2) -> Point2 {
        let dz = self.p.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * x.z + c.derivative(lambda));
        Point2::new(dz - self.b.derivative(lambda) * x.w, C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: C64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, lambda: C64) -> bool {
        (lambda - self.center).norm() <= self.radius * (1.0 + 1e-12)
    }
}

/// Hénon composition whose coefficients are polynomials in λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamHenonFamily {
    pub factors: Vec<ParamFactor>,
    pub domain: Disk,
}

impl ParamHenonFamily {
    /// The family (z² + λ·s + c − b·w, z) with λ entering the constant term.
    pub fn quadratic(b: C64, domain: Disk) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        ParamHenonFamily {
            factors: vec![ParamFactor {
                p: vec![LamPoly(vec![zero, one]), LamPoly::constant(zero), LamPoly::constant(one)],
                b: LamPoly::constant(b),
            }],
            domain,
        }
    }

    pub fn family_at(&self, lambda: C64) -> Result<HenonMap, FamilyError> {
        if !self.domain.contains(lambda) {
            return Err(FamilyError::Domain {
                lambda,
                center: self.domain.center,
                radius: self.domain.radius,
            });
        }
        self.map_unchecked(lambda)
    }

    /// Evaluates coefficients without the domain check.
    pub fn map_unchecked(&self, lambda: C64) -> Result<HenonMap, FamilyError> {
        let factors = self
            .factors
            .iter()
            .map(|f| f.at(lambda))
            .collect::<Result<Vec<_>, _>>()?;
        HenonMap::new(factors)
    }

    pub fn degree(&self) -> usize {
        self.factors.iter().map(|f| f.nominal_degree()).product()
    }

    /// One application of f_λ and its λ-derivative at x.
    pub fn apply_with_dlambda(&self, lambda: C64, x: Point2) -> (Point2, Point2, Mat2) {
        let mut p = x;
        let mut v = Point2::zero();
        let mut m = Mat2::identity();
        for f in &self.factors {
            let fac = HenonFactorRef { f, lambda };
            let df = fac.differential(p);
            v = df.apply(v) + f.dlambda(lambda, p);
            m = df * m;
            p = f.apply(lambda, p);
        }
        (p, v, m)
    }

    /// fⁿ_λ(x), its λ-derivative and its x-differential.
    pub fn orbit_with_dlambda(&self, lambda: C64, x: Point2, n: usize) -> Result<(Point2, Point2, Mat2), Escaped> {
        let mut p = x;
        let mut v = Point2::zero();
        let mut m = Mat2::identity();
        for step in 0..n {
            let (q, dv, dm) = self.apply_with_dlambda(lambda, p);
            if !finite_point(q) {
                return Err(Escaped { step, last: p });
            }
            v = dm.apply(v) + dv;
            m = dm * m;
            p = q;
        }
        Ok((p, v, m))
    }
}

struct HenonFactorRef<'a> {
    f: &'a ParamFactor,
    lambda: C64,
}

impl HenonFactorRef<'_> {
    fn differential(&self, x: Point2) -> Mat2 {
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for c in self.f.p.iter().rev() {
            d = d * x.z + v;
            v = v * x.z + c.eval(self.lambda);
        }
        Mat2::new(d, -self.f.b.eval(self.lambda), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }
}

/// Coefficient literal: a number, an "a+bi" string, or λ-polynomial pairs [[a0,b0],[a1,b1],...].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefSpec {
    Number(f64),
    Literal(String),
    Lambda(Vec<[f64; 2]>),
}

impl CoefSpec {
    pub fn to_lampoly(&self) -> Result<LamPoly, FamilyError> {
        match self {
            CoefSpec::Number(x) => Ok(LamPoly::constant(C64::new(*x, 0.0))),
            CoefSpec::Literal(s) => parse_complex(s).map(LamPoly::constant),
            CoefSpec::Lambda(pairs) => Ok(LamPoly(pairs.iter().map(|p| C64::new(p[0], p[1])).collect())),
        }
    }
}

/// Complex value written as a number, an "a+bi" string, or an [re, im] pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Number(f64),
    Literal(String),
    Pair([f64; 2]),
}

impl ComplexSpec {
    pub fn value(&self) -> Result<C64, FamilyError> {
        match self {
            ComplexSpec::Number(x) => Ok(C64::new(*x, 0.0)),
            ComplexSpec::Literal(s) => parse_complex(s),
            ComplexSpec::Pair(p) => Ok(C64::new(p[0], p[1])),
        }
    }
}

pub fn parse_complex(s: &str) -> Result<C64, FamilyError> {
    let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    cleaned
        .parse::<C64>()
        .map_err(|_| FamilyError::Spec(format!("cannot parse complex literal '{s}'")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub p: Vec<CoefSpec>,
    pub b: CoefSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub center: ComplexSpec,
    pub radius: f64,
}

/// Structured-text family description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub factors: Vec<FactorSpec>,
    pub domain: DomainSpec,
}

impl FamilySpec {
    pub fn build(&self) -> Result<ParamHenonFamily, FamilyError> {
        if self.factors.is_empty() {
            return Err(FamilyError::Empty);
        }
        if !(self.domain.radius > 0.0) {
            return Err(FamilyError::Spec("domain radius must be positive".into()));
        }
        let factors = self
            .factors
            .iter()
            .map(|f| {
                Ok(ParamFactor {
                    p: f.p.iter().map(|c| c.to_lampoly()).collect::<Result<Vec<_>, FamilyError>>()?,
                    b: f.b.to_lampoly()?,
                })
            })
            .collect::<Result<Vec<_>, FamilyError>>()?;
        for f in &factors {
            if f.nominal_degree() < 2 {
                return Err(FamilyError::LowDegree(f.nominal_degree()));
            }
        }
        Ok(ParamHenonFamily {
            factors,
            domain: Disk {
                center: self.domain.center.value()?,
                radius: self.domain.radius,
            },
        })
    }

    pub fn from_json(text: &str) -> Result<ParamHenonFamily, FamilyError> {
        let spec: FamilySpec = serde_json::from_str(text).map_err(|e| FamilyError::Spec(e.to_string()))?;
        spec.build()
    }
}
