//! Poincaré cones, horizontal curves in the bidisk and certified tangency hunting.

use crate::family::{Disk, ParamHenonFamily};
use crate::linalg::{Mat2, Point2};
use crate::manifolds::{stable_series, unstable_series, ManifoldSeries};
use crate::periodic::solve_periodic;
use crate::roots::{poly_roots, winding_on_circle};
use crate::C64;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Cone comparisons within this are reported as Boundary.
pub const CONE_TOL: f64 = 1e-12;
/// Default defect tolerance of a certificate.
pub const DEFECT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TangencyError {
    #[error("point {0:?} is not strictly inside the bidisk")]
    OnBoundary(Point2),
    #[error("frame directions are dependent")]
    SingularFrame,
    #[error("frame violation at λ = {lambda}: W piece not vertical at parameter {param}")]
    FrameViolation { lambda: C64, param: C64 },
    #[error("continuation failed at λ = {lambda}: {reason}")]
    Continuation { lambda: C64, reason: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    Horizontal,
    Vertical,
    Boundary,
}

/// Compares |vᵢ|/(1 − |xᵢ|²) for the two coordinates.
pub fn poincare_cone(x: Point2, v: Point2) -> Result<Cone, TangencyError> {
    if x.z.norm() >= 1.0 || x.w.norm() >= 1.0 {
        return Err(TangencyError::OnBoundary(x));
    }
    let h = v.z.norm() / (1.0 - x.z.norm_sqr());
    let vert = v.w.norm() / (1.0 - x.w.norm_sqr());
    Ok(if (h - vert).abs() <= CONE_TOL {
        Cone::Boundary
    } else if h > vert {
        Cone::Horizontal
    } else {
        Cone::Vertical
    })
}

/// Affine chart p = center + a·s₁·e₁ + b·s₂·e₂, local coordinates (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidiskFrame {
    pub center: Point2,
    pub dir1: Point2,
    pub dir2: Point2,
    pub scale1: f64,
    pub scale2: f64,
}

impl BidiskFrame {
    pub fn new(center: Point2, dir1: Point2, dir2: Point2, scale1: f64, scale2: f64) -> Result<Self, TangencyError> {
        let f = BidiskFrame { center, dir1, dir2, scale1, scale2 };
        let m = f.matrix();
        if !(scale1 > 0.0 && scale2 > 0.0) || m.det().norm() < 1e-12 * m.norm().powi(2) {
            return Err(TangencyError::SingularFrame);
        }
        Ok(f)
    }

    pub fn identity() -> Self {
        BidiskFrame {
            center: Point2::zero(),
            dir1: Point2::real(1.0, 0.0),
            dir2: Point2::real(0.0, 1.0),
            scale1: 1.0,
            scale2: 1.0,
        }
    }

    /// Columns s₁e₁, s₂e₂.
    pub fn matrix(&self) -> Mat2 {
        Mat2::from_columns(self.dir1.scale(C64::new(self.scale1, 0.0)), self.dir2.scale(C64::new(self.scale2, 0.0)))
    }

    pub fn to_local(&self, p: Point2) -> Point2 {
        self.matrix().solve(p - self.center).expect("frame is invertible")
    }

    pub fn from_local(&self, q: Point2) -> Point2 {
        self.center + self.matrix().apply(q)
    }

    pub fn vector_to_local(&self, v: Point2) -> Point2 {
        self.matrix().solve(v).expect("frame is invertible")
    }
}

/// A polynomial Σ c·tⁱλʲ.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BiPoly {
    pub terms: Vec<(usize, usize, C64)>,
}

impl BiPoly {
    pub fn new(terms: &[(usize, usize, f64)]) -> Self {
        BiPoly { terms: terms.iter().map(|&(i, j, c)| (i, j, C64::new(c, 0.0))).collect() }
    }

    pub fn eval(&self, t: C64, l: C64) -> C64 {
        self.terms.iter().map(|&(i, j, c)| c * t.powu(i as u32) * l.powu(j as u32)).sum()
    }

    pub fn d_t(&self, t: C64, l: C64) -> C64 {
        self.terms
            .iter()
            .filter(|x| x.0 > 0)
            .map(|&(i, j, c)| c * i as f64 * t.powu(i as u32 - 1) * l.powu(j as u32))
            .sum()
    }

    /// Coefficients in t at fixed λ, constant first.
    pub fn coeffs_in_t(&self, l: C64) -> Vec<C64> {
        let deg = self.terms.iter().map(|x| x.0).max().unwrap_or(0);
        let mut out = vec![C64::new(0.0, 0.0); deg + 1];
        for &(i, j, c) in &self.terms {
            out[i] += c * l.powu(j as u32);
        }
        out
    }

    pub fn derivative_t(&self) -> BiPoly {
        BiPoly { terms: self.terms.iter().filter(|x| x.0 > 0).map(|&(i, j, c)| (i - 1, j, c * i as f64)).collect() }
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|x| x.2.im == 0.0)
    }
}

/// t ↦ (z(t, λ), w(t, λ)) with polynomial coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCurve {
    pub z: BiPoly,
    pub w: BiPoly,
    /// Horizontality margin ε.
    pub margin: f64,
}

impl PolyCurve {
    pub fn new(z: BiPoly, w: BiPoly) -> Self {
        PolyCurve { z, w, margin: 0.0 }
    }

    /// The vertical graph z = g(w, λ), parameterized by s = w.
    pub fn vertical_graph(g: BiPoly) -> Self {
        PolyCurve::new(g, BiPoly::new(&[(1, 0, 1.0)]))
    }
}

/// P(z, w, λ) = Σ c·zⁱwʲλᵐ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitCurve {
    pub terms: Vec<(usize, usize, usize, C64)>,
}

impl ImplicitCurve {
    pub fn new(terms: &[(usize, usize, usize, f64)]) -> Self {
        ImplicitCurve { terms: terms.iter().map(|&(i, j, m, c)| (i, j, m, C64::new(c, 0.0))).collect() }
    }

    pub fn eval(&self, z: C64, w: C64, l: C64) -> C64 {
        self.terms.iter().map(|&(i, j, m, c)| c * z.powu(i as u32) * w.powu(j as u32) * l.powu(m as u32)).sum()
    }

    fn partial(&self, var: usize) -> ImplicitCurve {
        let terms = self
            .terms
            .iter()
            .filter_map(|&(i, j, m, c)| match var {
                0 if i > 0 => Some((i - 1, j, m, c * i as f64)),
                1 if j > 0 => Some((i, j - 1, m, c * j as f64)),
                _ => None,
            })
            .collect();
        ImplicitCurve { terms }
    }

    /// Coefficients in w of P(z₀, w, λ), constant first.
    fn coeffs_in_w(&self, z: C64, l: C64) -> Vec<C64> {
        let deg = self.terms.iter().map(|x| x.1).max().unwrap_or(0);
        let mut out = vec![C64::new(0.0, 0.0); deg + 1];
        for &(i, j, m, c) in &self.terms {
            out[j] += c * z.powu(i as u32) * l.powu(m as u32);
        }
        out
    }

    fn coeffs_in_z(&self, w: C64, l: C64) -> Vec<C64> {
        let deg = self.terms.iter().map(|x| x.0).max().unwrap_or(0);
        let mut out = vec![C64::new(0.0, 0.0); deg + 1];
        for &(i, j, m, c) in &self.terms {
            out[i] += c * w.powu(j as u32) * l.powu(m as u32);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    Parametric(PolyCurve),
    Implicit(ImplicitCurve),
}

fn trimmed_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |x| x.norm() < 1e-14) {
        c.pop();
    }
    if c.len() <= 1 {
        return Vec::new();
    }
    poly_roots(&c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degree: usize,
    /// (z₀, count) per probe.
    pub probes: Vec<(C64, usize)>,
    /// False when the probes disagree (a probe hit a branch point).
    pub consistent: bool,
}

/// Number of points of the curve over z₀ with |w| < 1, counted with multiplicity.
pub fn fiber_count(curve: &Curve, z0: C64, l: C64) -> usize {
    match curve {
        Curve::Parametric(pc) => {
            let mut c = pc.z.coeffs_in_t(l);
            c[0] -= z0;
            trimmed_roots(&c).into_iter().filter(|t| pc.w.eval(*t, l).norm() < 1.0).count()
        }
        Curve::Implicit(ic) => trimmed_roots(&ic.coeffs_in_w(z0, l)).into_iter().filter(|w| w.norm() < 1.0).count(),
    }
}

/// Degree of the projection to the first coordinate over 𝔻, by majority of three random probes.
pub fn horizontal_degree(curve: &Curve, l: C64, seed: u64) -> DegreeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<(C64, usize)> = (0..3)
        .map(|_| {
            let z0 = C64::from_polar(0.9 * rng.gen::<f64>().sqrt(), 2.0 * PI * rng.gen::<f64>());
            (z0, fiber_count(curve, z0, l))
        })
        .collect();
    let counts: Vec<usize> = probes.iter().map(|p| p.1).collect();
    let degree = if counts[0] == counts[1] || counts[0] == counts[2] { counts[0] } else { counts[1] };
    DegreeReport { degree, consistent: counts.iter().all(|&c| c == counts[0]), probes }
}

/// Checks that fibers over sampled z₀ ∈ 𝔻 avoid the shell 1 − ε ≤ |w| ≤ 1 + ε.
pub fn horizontal_margin_ok(curve: &PolyCurve, l: C64) -> bool {
    let eps = curve.margin;
    for r in [0.0, 0.3, 0.6, 0.9, 0.99] {
        for a in 0..16 {
            let z0 = C64::from_polar(r, 2.0 * PI * a as f64 / 16.0);
            let mut c = curve.z.coeffs_in_t(l);
            c[0] -= z0;
            for t in trimmed_roots(&c) {
                let m = curve.w.eval(t, l).norm();
                if m >= 1.0 - eps && m <= 1.0 + eps {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalTangency {
    /// Curve parameter t (parametric) or the w-coordinate (implicit).
    pub param: C64,
    pub point: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalReport {
    pub points: Vec<VerticalTangency>,
    /// Singular points (both partials vanish), reported separately.
    pub singular: Vec<Point2>,
    /// Argument-principle count on the region boundary (parametric curves).
    pub boundary_count: Option<i64>,
}

/// Vertical tangencies inside the region (a disk in t, or in w for implicit curves).
pub fn vertical_tangencies(curve: &Curve, l: C64, region: Disk) -> VerticalReport {
    match curve {
        Curve::Parametric(pc) => {
            let dz = pc.z.derivative_t();
            let dw = pc.w.derivative_t();
            let mut points = Vec::new();
            let mut singular = Vec::new();
            for t in trimmed_roots(&dz.coeffs_in_t(l)) {
                if (t - region.center).norm() >= region.radius {
                    continue;
                }
                let p = Point2::new(pc.z.eval(t, l), pc.w.eval(t, l));
                if dw.eval(t, l).norm() < 1e-10 {
                    singular.push(p);
                } else {
                    points.push(VerticalTangency { param: t, point: p });
                }
            }
            let boundary_count = winding_on_circle(|t| Some(dz.eval(t, l)), region.center, region.radius, 64);
            points.sort_by(|a, b| (a.param.re, a.param.im).partial_cmp(&(b.param.re, b.param.im)).unwrap());
            VerticalReport { points, singular, boundary_count }
        }
        Curve::Implicit(ic) => implicit_vertical(ic, l, region),
    }
}

fn implicit_vertical(ic: &ImplicitCurve, l: C64, region: Disk) -> VerticalReport {
    let pz = ic.partial(0);
    let pw = ic.partial(1);
    let pzz = pz.partial(0);
    let pzw = pz.partial(1);
    let pww = pw.partial(1);
    let mut found: Vec<Point2> = Vec::new();
    let grid = 8;
    for a in 0..grid {
        for b in 0..grid {
            let w0 = region.center
                + C64::new(
                    region.radius * (2.0 * (a as f64 + 0.5) / grid as f64 - 1.0),
                    region.radius * (2.0 * (b as f64 + 0.5) / grid as f64 - 1.0),
                );
            for z0 in trimmed_roots(&ic.coeffs_in_z(w0, l)) {
                let (mut z, mut w) = (z0, w0);
                for _ in 0..50 {
                    let f = Point2::new(ic.eval(z, w, l), pw.eval(z, w, l));
                    let j = Mat2::new(pz.eval(z, w, l), pw.eval(z, w, l), pzw.eval(z, w, l), pww.eval(z, w, l));
                    let Some(d) = j.solve(f) else { break };
                    z -= d.z;
                    w -= d.w;
                    if d.norm() < 1e-15 * (1.0 + z.norm() + w.norm()) {
                        break;
                    }
                }
                let ok = ic.eval(z, w, l).norm() < 1e-10 && pw.eval(z, w, l).norm() < 1e-10;
                if ok && (w - region.center).norm() < region.radius && !found.iter().any(|p| (p.z - z).norm() + (p.w - w).norm() < 1e-8) {
                    found.push(Point2::new(z, w));
                }
            }
        }
    }
    let _ = pzz;
    let mut points = Vec::new();
    let mut singular = Vec::new();
    for p in found {
        if pz.eval(p.z, p.w, l).norm() < 1e-10 {
            singular.push(p);
        } else {
            points.push(VerticalTangency { param: p.w, point: p });
        }
    }
    points.sort_by(|a, b| (a.param.re, a.param.im).partial_cmp(&(b.param.re, b.param.im)).unwrap());
    VerticalReport { points, singular, boundary_count: None }
}

/// One λ-slice of a curve family: point and tangent at a parameter.
pub trait CurveSlice: Sync + Send {
    fn point(&self, t: C64) -> Option<(Point2, Point2)>;
}

/// A one-parameter family of parameterized curves.
pub trait CurveFamily: Sync {
    type Slice: CurveSlice;
    fn slice(&self, l: C64) -> Result<Self::Slice, TangencyError>;
    /// True when real parameters give real curves.
    fn is_real(&self) -> bool {
        false
    }
}

pub struct PolySlice {
    curve: PolyCurve,
    l: C64,
}

impl CurveSlice for PolySlice {
    fn point(&self, t: C64) -> Option<(Point2, Point2)> {
        let c = &self.curve;
        Some((Point2::new(c.z.eval(t, self.l), c.w.eval(t, self.l)), Point2::new(c.z.d_t(t, self.l), c.w.d_t(t, self.l))))
    }
}

impl CurveFamily for PolyCurve {
    type Slice = PolySlice;
    fn slice(&self, l: C64) -> Result<PolySlice, TangencyError> {
        Ok(PolySlice { curve: self.clone(), l })
    }
    fn is_real(&self) -> bool {
        self.z.is_real() && self.w.is_real()
    }
}

/// Which invariant manifold a [`ManifoldCurve`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Unstable,
    Stable,
}

/// Wᵘ or Wˢ of a saddle fixed point of f_λ, continued from a seed and evaluated
/// through the series and the dynamics.
#[derive(Debug, Clone)]
pub struct ManifoldCurve {
    pub family: ParamHenonFamily,
    pub seed: Point2,
    pub branch: Branch,
    pub order: usize,
}

pub struct ManifoldSlice {
    map: crate::family::HenonMap,
    series: ManifoldSeries,
    branch: Branch,
}

impl ManifoldSlice {
    pub fn series(&self) -> &ManifoldSeries {
        &self.series
    }
}

impl CurveSlice for ManifoldSlice {
    fn point(&self, t: C64) -> Option<(Point2, Point2)> {
        let s = &self.series;
        let mut u = t;
        let mut m = 0usize;
        let mut scale = C64::new(1.0, 0.0);
        while u.norm() > 0.5 * s.validity_radius {
            u /= s.eigenvalue;
            scale /= s.eigenvalue;
            m += 1;
            if m > 200 {
                return None;
            }
        }
        let x = s.polynomial(u);
        let mut dx = Point2::zero();
        for (j, a) in s.coefficients.iter().enumerate().skip(1).rev() {
            dx = dx.scale(u) + a.scale(C64::new(j as f64, 0.0));
        }
        let (p, d) = match self.branch {
            Branch::Unstable => self.map.orbit_with_differential(x, m).ok()?,
            Branch::Stable => self.map.inverse_orbit_with_differential(x, m).ok()?,
        };
        let v = d.apply(dx.scale(scale));
        (p.is_finite() && v.is_finite()).then_some((p, v))
    }
}

impl CurveFamily for ManifoldCurve {
    type Slice = ManifoldSlice;
    fn slice(&self, l: C64) -> Result<ManifoldSlice, TangencyError> {
        let err = |reason: String| TangencyError::Continuation { lambda: l, reason };
        let map = self.family.map_unchecked(l).map_err(|e| err(e.to_string()))?;
        let saddle = solve_periodic(&map, 1, self.seed, 1e-13).map_err(|e| err(e.to_string()))?;
        let series = match self.branch {
            Branch::Unstable => unstable_series(&map, &saddle, self.order),
            Branch::Stable => stable_series(&map, &saddle, self.order),
        }
        .map_err(|e| err(e.to_string()))?;
        Ok(ManifoldSlice { map, series, branch: self.branch })
    }
    fn is_real(&self) -> bool {
        let real = |c: &C64| c.im == 0.0;
        self.seed.z.im == 0.0
            && self.seed.w.im == 0.0
            && self.family.factors.iter().all(|f| f.b.0.iter().all(real) && f.p.iter().all(|q| q.0.iter().all(real)))
    }
}

/// Parameter search region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaDomain {
    Segment { a: C64, b: C64 },
    Disk { center: C64, radius: f64 },
}

impl LambdaDomain {
    pub fn probes(&self, count: usize) -> Vec<C64> {
        match *self {
            LambdaDomain::Segment { a, b } => {
                (0..count).map(|k| a + (b - a) * ((k as f64 + 0.5) / count as f64)).collect()
            }
            LambdaDomain::Disk { center, radius } => sunflower(Disk { center, radius }, count),
        }
    }

    /// Half-length of the segment or the disk radius.
    pub fn search_radius(&self) -> f64 {
        match *self {
            LambdaDomain::Segment { a, b } => 0.5 * (b - a).norm(),
            LambdaDomain::Disk { radius, .. } => radius,
        }
    }

    pub fn contains(&self, l: C64) -> bool {
        match *self {
            LambdaDomain::Segment { a, b } => {
                let d = b - a;
                let s = ((l - a) * d.conj()).re / d.norm_sqr();
                let dist = (l - (a + d * s.clamp(0.0, 1.0))).norm();
                (-1e-9..=1.0 + 1e-9).contains(&s) && dist <= 1e-6 * d.norm().max(1.0)
            }
            LambdaDomain::Disk { center, radius } => (l - center).norm() <= radius,
        }
    }

    fn is_real(&self) -> bool {
        matches!(*self, LambdaDomain::Segment { a, b } if a.im == 0.0 && b.im == 0.0)
    }
}

/// `count` points of a sunflower pattern filling a disk.
fn sunflower(d: Disk, count: usize) -> Vec<C64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| d.center + C64::from_polar(d.radius * ((k as f64 + 0.5) / count as f64).sqrt(), golden * k as f64))
        .collect()
}

/// Start points in a parameter disk: the real diameter for real searches, otherwise a sunflower.
fn starts(d: Disk, count: usize, real: bool) -> Vec<C64> {
    if real {
        (0..count).map(|k| d.center + d.radius * (2.0 * (k as f64 + 0.5) / count as f64 - 1.0)).collect()
    } else {
        sunflower(d, count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HuntOptions {
    pub grid: usize,
    pub lambda_probes: usize,
    pub defect_tol: f64,
    /// Use real start grids (default: when both families and the λ-segment are real).
    pub real_grid: Option<bool>,
}

impl Default for HuntOptions {
    fn default() -> Self {
        HuntOptions { grid: 32, lambda_probes: 64, defect_tol: DEFECT_TOL, real_grid: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuntDomain {
    pub t: Disk,
    pub s: Disk,
    pub lambda: LambdaDomain,
}

/// Intersection count on each side of λ* along a transversal segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleZeroWitness {
    pub delta: f64,
    pub direction: C64,
    pub count_minus: usize,
    pub count_plus: usize,
    /// "real_roots" (real families) or "discriminant".
    pub method: String,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyCertificate {
    pub lambda: C64,
    pub t: C64,
    pub s: C64,
    /// Contact point in ambient coordinates.
    pub contact: Point2,
    /// |det(tangent_V, tangent_W)|/(|tangent_V||tangent_W|) at the contact.
    pub defect: f64,
    /// |V(t) − W(s)| at the contact.
    pub separation: f64,
    /// Winding of the local discriminant (t₁ − t₂)² around λ*.
    pub winding: i64,
    pub witness: DoubleZeroWitness,
}

impl TangencyCertificate {
    /// Intersection count change across λ*.
    pub fn count_drop(&self) -> usize {
        self.witness.count_plus.abs_diff(self.witness.count_minus)
    }

    pub fn certified(&self, tol: f64) -> bool {
        self.defect < tol && self.separation < tol && self.winding >= 1 && self.witness.passes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub lambda: C64,
    pub starts: usize,
    pub intersections: usize,
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuntReport {
    pub certificates: Vec<TangencyCertificate>,
    /// Converged tangency solutions that failed certification.
    pub rejected: Vec<TangencyCertificate>,
    pub probes: Vec<ProbeOutcome>,
    pub total_starts: usize,
}

impl HuntReport {
    /// Probe grid outcomes as CSV.
    pub fn coverage_csv(&self) -> String {
        let mut s = String::from("lambda_re,lambda_im,starts,intersections,converged\n");
        for p in &self.probes {
            s.push_str(&format!("{:.17e},{:.17e},{},{},{}\n", p.lambda.re, p.lambda.im, p.starts, p.intersections, p.converged));
        }
        s
    }
}

fn det2(a: Point2, b: Point2) -> C64 {
    a.z * b.w - a.w * b.z
}

struct Local<'a, S: CurveSlice> {
    slice: &'a S,
    frame: &'a BidiskFrame,
}

impl<S: CurveSlice> Local<'_, S> {
    fn at(&self, t: C64) -> Option<(Point2, Point2)> {
        let (p, v) = self.slice.point(t)?;
        Some((self.frame.to_local(p), self.frame.vector_to_local(v)))
    }
}

/// Newton for V(t) = W(s) at fixed λ.
fn intersect<A: CurveSlice, B: CurveSlice>(v: &Local<A>, w: &Local<B>, t0: C64, s0: C64) -> Option<(C64, C64)> {
    let (mut t, mut s) = (t0, s0);
    for _ in 0..40 {
        let (pv, tv) = v.at(t)?;
        let (pw, tw) = w.at(s)?;
        let g = pv - pw;
        let j = Mat2::from_columns(tv, -tw);
        let d = j.solve(g)?;
        t -= d.z;
        s -= d.w;
        if !(t.is_finite() && s.is_finite()) {
            return None;
        }
        if d.norm() < 1e-14 * (1.0 + t.norm() + s.norm()) {
            let (pv, _) = v.at(t)?;
            let (pw, _) = w.at(s)?;
            return ((pv - pw).norm() < 1e-10).then_some((t, s));
        }
    }
    None
}

fn tangency_residual<A: CurveSlice, B: CurveSlice>(v: &Local<A>, w: &Local<B>, t: C64, s: C64) -> Option<Vector3<C64>> {
    let (pv, tv) = v.at(t)?;
    let (pw, tw) = w.at(s)?;
    let g = pv - pw;
    Some(Vector3::new(g.z, g.w, det2(tv, tw)))
}

/// Newton on (V − W, det(V', W')) in (t, s, λ) with finite-difference columns.
fn tangency_newton<V: CurveFamily, W: CurveFamily>(
    vf: &V,
    wf: &W,
    frame: &BidiskFrame,
    t0: C64,
    s0: C64,
    l0: C64,
    tol: f64,
) -> Option<(C64, C64, C64)> {
    let (mut t, mut s, mut l) = (t0, s0, l0);
    for _ in 0..60 {
        let vs = vf.slice(l).ok()?;
        let ws = wf.slice(l).ok()?;
        let v = Local { slice: &vs, frame };
        let w = Local { slice: &ws, frame };
        let r = tangency_residual(&v, &w, t, s)?;
        let ht = 1e-6 * (1.0 + t.norm());
        let hs = 1e-6 * (1.0 + s.norm());
        let hl = 1e-7 * (1.0 + l.norm());
        let col = |a: Vector3<C64>, b: Vector3<C64>, h: f64| (a - b) / C64::new(2.0 * h, 0.0);
        let ct = col(tangency_residual(&v, &w, t + ht, s)?, tangency_residual(&v, &w, t - ht, s)?, ht);
        let cs = col(tangency_residual(&v, &w, t, s + hs)?, tangency_residual(&v, &w, t, s - hs)?, hs);
        let rl = |dl: f64| -> Option<Vector3<C64>> {
            let vs = vf.slice(l + dl).ok()?;
            let ws = wf.slice(l + dl).ok()?;
            tangency_residual(&Local { slice: &vs, frame }, &Local { slice: &ws, frame }, t, s)
        };
        let cl = col(rl(hl)?, rl(-hl)?, hl);
        let j = Matrix3::from_columns(&[ct, cs, cl]);
        let d = j.lu().solve(&r)?;
        t -= d[0];
        s -= d[1];
        l -= d[2];
        if !(t.is_finite() && s.is_finite() && l.is_finite()) {
            return None;
        }
        let size = d.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if size < tol * 1e-6 * (1.0 + t.norm() + s.norm() + l.norm()) {
            return Some((t, s, l));
        }
    }
    None
}

/// h(t) = V_z(t) − W_z(s(t)) where W_w(s(t)) = V_w(t), and h'(t), in frame coordinates.
fn local_graph_gap<A: CurveSlice, B: CurveSlice>(v: &Local<A>, w: &Local<B>, t: C64, s_seed: C64) -> Option<(C64, C64, C64)> {
    let (pv, tv) = v.at(t)?;
    let mut s = s_seed;
    for _ in 0..50 {
        let (pw, tw) = w.at(s)?;
        let d = (pw.w - pv.w) / tw.w;
        s -= d;
        if !s.is_finite() {
            return None;
        }
        if d.norm() < 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    let (pw, tw) = w.at(s)?;
    if (pw.w - pv.w).norm() > 1e-10 * (1.0 + pv.w.norm()) {
        return None;
    }
    let h = pv.z - pw.z;
    let dh = tv.z - tw.z * tv.w / tw.w;
    Some((h, dh, s))
}

/// Power sums (p₀, p₁, p₂) of the zeros of h inside |t − t*| = r.
fn power_sums<A: CurveSlice, B: CurveSlice>(v: &Local<A>, w: &Local<B>, tc: C64, sc: C64, r: f64) -> Option<[C64; 3]> {
    let m = 64;
    let mut sums = [C64::new(0.0, 0.0); 3];
    let mut s = sc;
    for k in 0..m {
        let tau = C64::from_polar(r, 2.0 * PI * k as f64 / m as f64);
        let (h, dh, s_new) = local_graph_gap(v, w, tc + tau, s)?;
        s = s_new;
        let f = dh / h * tau;
        sums[0] += f;
        sums[1] += f * tau;
        sums[2] += f * tau * tau;
    }
    for x in &mut sums {
        *x /= m as f64;
    }
    Some(sums)
}

/// Certifies a converged tangency: defect, winding of the local discriminant, double-zero witness.
fn certify<V: CurveFamily, W: CurveFamily>(
    vf: &V,
    wf: &W,
    frame: &BidiskFrame,
    t: C64,
    s: C64,
    l: C64,
    delta: f64,
    real: bool,
) -> Option<TangencyCertificate> {
    let vs = vf.slice(l).ok()?;
    let ws = wf.slice(l).ok()?;
    let (pv, tv) = vs.point(t)?;
    let (pw, tw) = ws.point(s)?;
    let defect = det2(tv, tw).norm() / (tv.norm() * tw.norm());
    let separation = (pv - pw).norm();

    // Local discriminant D(λ) = (t₁ − t₂)² from contour power sums.
    let disc = |lam: C64, r: f64| -> Option<C64> {
        let vs = vf.slice(lam).ok()?;
        let ws = wf.slice(lam).ok()?;
        let p = power_sums(&Local { slice: &vs, frame }, &Local { slice: &ws, frame }, t, s, r)?;
        ((p[0] - 2.0).norm() < 1e-6).then(|| 2.0 * p[2] - p[1] * p[1])
    };
    // Radius guess: roots separate like √(2δ|h_λ|/|h_tt|).
    let v0 = Local { slice: &vs, frame };
    let w0 = Local { slice: &ws, frame };
    let ht = 1e-4 * (1.0 + t.norm());
    let h_at = |tt: C64| local_graph_gap(&v0, &w0, tt, s).map(|x| x.0);
    let htt = (h_at(t + ht)? - 2.0 * h_at(t)? + h_at(t - ht)?) / (ht * ht);
    let hl = {
        let e = 1e-6 * (1.0 + l.norm());
        let vp = vf.slice(l + e).ok()?;
        let wp = wf.slice(l + e).ok()?;
        let hp = local_graph_gap(&Local { slice: &vp, frame }, &Local { slice: &wp, frame }, t, s)?.0;
        (hp - h_at(t)?) / e
    };
    let guess = 3.0 * (2.0 * delta * hl.norm() / htt.norm().max(1e-300)).sqrt();
    let mut winding = 0;
    let mut radius = None;
    for f in [1.0, 2.0, 4.0, 0.5, 8.0, 0.25] {
        let r = guess * f;
        if !(r > 0.0 && r.is_finite()) {
            continue;
        }
        if let Some(wd) = winding_on_circle(|lam| disc(lam, r), l, delta, 16) {
            winding = wd;
            radius = Some(r);
            break;
        }
    }
    let r = radius?;
    // D'(λ*) by Cauchy's formula on the same circle.
    let m = 32;
    let mut dprime = C64::new(0.0, 0.0);
    for k in 0..m {
        let e = C64::from_polar(delta, 2.0 * PI * k as f64 / m as f64);
        dprime += disc(l + e, r)? / e;
    }
    dprime /= m as f64;
    let direction = if real { C64::new(dprime.re.signum(), 0.0) } else { dprime.conj() / dprime.norm() };
    let count = |lam: C64| -> Option<usize> {
        if real {
            let vs = vf.slice(lam).ok()?;
            let ws = wf.slice(lam).ok()?;
            let (v, w) = (Local { slice: &vs, frame }, Local { slice: &ws, frame });
            let n = 400;
            let mut prev: Option<f64> = None;
            let mut changes = 0;
            let mut sd = s;
            for k in 0..=n {
                let tt = t + 2.0 * r * (k as f64 / n as f64 - 0.5);
                let (h, _, s_new) = local_graph_gap(&v, &w, tt, sd)?;
                sd = s_new;
                if let Some(p) = prev {
                    if p * h.re < 0.0 {
                        changes += 1;
                    }
                }
                prev = Some(h.re);
            }
            Some(changes)
        } else {
            Some(if disc(lam, r)?.re > 0.0 { 2 } else { 0 })
        }
    };
    let count_minus = count(l - direction * delta)?;
    let count_plus = count(l + direction * delta)?;
    let witness = DoubleZeroWitness {
        delta,
        direction,
        count_minus,
        count_plus,
        method: if real { "real_roots".into() } else { "discriminant".into() },
        passes: count_plus.abs_diff(count_minus) == 2,
    };
    Some(TangencyCertificate { lambda: l, t, s, contact: pv, defect, separation, winding, witness })
}

/// Multistart hunt for parameters where V_λ and W_λ are tangent.
///
/// At each λ-probe a grid×grid set of (t, s) starts is run to intersections of V and W;
/// each intersection then seeds Newton on the tangency system in (t, s, λ).
pub fn tangency_hunt<V: CurveFamily, W: CurveFamily>(
    vf: &V,
    wf: &W,
    domain: &HuntDomain,
    frame: &BidiskFrame,
    opts: &HuntOptions,
) -> Result<HuntReport, TangencyError> {
    if opts.grid == 0 || opts.lambda_probes == 0 {
        return Err(TangencyError::Invalid("empty multistart grid".into()));
    }
    let real = opts.real_grid.unwrap_or(vf.is_real() && wf.is_real() && domain.lambda.is_real());
    let ts = starts(domain.t, opts.grid, real);
    let ss = starts(domain.s, opts.grid, real);
    let probes = domain.lambda.probes(opts.lambda_probes);
    let delta = 1e-3 * domain.lambda.search_radius();
    let in_disk = |x: C64, d: &Disk| (x - d.center).norm() <= d.radius;

    let per_probe: Vec<(ProbeOutcome, Vec<(C64, C64, C64)>)> = probes
        .par_iter()
        .map(|&l| {
            let mut outcome = ProbeOutcome { lambda: l, starts: ts.len() * ss.len(), intersections: 0, converged: 0 };
            let (Ok(vs), Ok(ws)) = (vf.slice(l), wf.slice(l)) else {
                return (outcome, Vec::new());
            };
            let v = Local { slice: &vs, frame };
            let w = Local { slice: &ws, frame };
            let mut hits: Vec<(C64, C64)> = Vec::new();
            for &t0 in &ts {
                for &s0 in &ss {
                    if let Some((t, s)) = intersect(&v, &w, t0, s0) {
                        if in_disk(t, &domain.t) && in_disk(s, &domain.s) && !hits.iter().any(|h| (h.0 - t).norm() + (h.1 - s).norm() < 1e-8) {
                            hits.push((t, s));
                        }
                    }
                }
            }
            outcome.intersections = hits.len();
            let mut sols = Vec::new();
            for (t, s) in hits {
                if let Some((t1, s1, l1)) = tangency_newton(vf, wf, frame, t, s, l, opts.defect_tol) {
                    if in_disk(t1, &domain.t) && in_disk(s1, &domain.s) && domain.lambda.contains(l1) {
                        outcome.converged += 1;
                        sols.push((t1, s1, l1));
                    }
                }
            }
            (outcome, sols)
        })
        .collect();

    let mut unique: Vec<(C64, C64, C64)> = Vec::new();
    for (_, sols) in &per_probe {
        for &(t, s, l) in sols {
            if !unique.iter().any(|u| (u.2 - l).norm() < 1e-7 && (u.0 - t).norm() < 1e-5) {
                unique.push((t, s, l));
            }
        }
    }
    unique.sort_by(|a, b| (a.2.re, a.2.im, a.0.re, a.0.im).partial_cmp(&(b.2.re, b.2.im, b.0.re, b.0.im)).unwrap());
    let checked: Vec<Option<TangencyCertificate>> = unique
        .par_iter()
        .map(|&(t, s, l)| certify(vf, wf, frame, t, s, l, delta, real && l.im.abs() < 1e-10 && t.im.abs() < 1e-10))
        .collect();
    let mut certificates = Vec::new();
    let mut rejected = Vec::new();
    for c in checked.into_iter().flatten() {
        if c.certified(opts.defect_tol) {
            certificates.push(c);
        } else {
            rejected.push(c);
        }
    }
    let total_starts = per_probe.iter().map(|p| p.0.starts).sum();
    Ok(HuntReport { certificates, rejected, probes: per_probe.into_iter().map(|p| p.0).collect(), total_starts })
}

/// Re-solves from a certificate with a tighter tolerance; returns the moved certificate.
pub fn reverify<V: CurveFamily, W: CurveFamily>(
    vf: &V,
    wf: &W,
    frame: &BidiskFrame,
    cert: &TangencyCertificate,
    tol: f64,
) -> Option<TangencyCertificate> {
    let (t, s, l) = tangency_newton(vf, wf, frame, cert.t, cert.s, cert.lambda, tol)?;
    let real = cert.witness.method == "real_roots";
    certify(vf, wf, frame, t, s, l, cert.witness.delta, real)
}

/// Checks that the W piece is vertical in the frame at λ, sampling its parameter disk.
pub fn check_vertical_piece<W: CurveFamily>(wf: &W, frame: &BidiskFrame, s: Disk, l: C64, real: bool) -> Result<(), TangencyError> {
    let ws = wf.slice(l)?;
    let w = Local { slice: &ws, frame };
    for s0 in starts(s, 32, real) {
        let Some((p, v)) = w.at(s0) else { continue };
        if p.z.norm() >= 1.0 || p.w.norm() >= 1.0 {
            continue;
        }
        if poincare_cone(p, v)? != Cone::Vertical {
            return Err(TangencyError::FrameViolation { lambda: l, param: s0 });
        }
    }
    Ok(())
}

/// Homoclinic tangencies of a saddle fixed point: Wᵘ (parameter t) against Wˢ (parameter s).
pub fn homoclinic_tangency_hunt(
    family: &ParamHenonFamily,
    saddle_seed: Point2,
    order: usize,
    frame: &BidiskFrame,
    domain: &HuntDomain,
    opts: &HuntOptions,
) -> Result<HuntReport, TangencyError> {
    let unstable = ManifoldCurve { family: family.clone(), seed: saddle_seed, branch: Branch::Unstable, order };
    let stable = ManifoldCurve { family: family.clone(), seed: saddle_seed, branch: Branch::Stable, order };
    let real = opts.real_grid.unwrap_or(unstable.is_real() && domain.lambda.is_real());
    for l in domain.lambda.probes(opts.lambda_probes) {
        check_vertical_piece(&stable, frame, domain.s, l, real)?;
    }
    tangency_hunt(&unstable, &stable, domain, frame, opts)
}
