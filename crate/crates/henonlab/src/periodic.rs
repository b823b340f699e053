//! Periodic orbits: Newton solves, enumeration, continuation in λ,
//! multiplier root-of-unity parameters and bifurcation scans.

use crate::family::{Escaped, FamilyError, HenonMap, ParamHenonFamily, Poly};
use crate::linalg::{Mat2, Point2};
use crate::roots::poly_roots;
use crate::C64;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Default half-width of the band |κ| ∈ [1 − τ, 1 + τ] classified as indifferent.
pub const DEFAULT_TAU: f64 = 1e-6;
/// Relative distance under which two periodic points are identified.
pub const DEDUP_TOL: f64 = 1e-8;
/// Distance under which two tracked orbits are reported as colliding.
pub const COLLISION_TOL: f64 = 1e-6;
/// Largest number of branch sequences used as enumeration seeds.
pub const MAX_SYMBOL_SEEDS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrbitType {
    Sink,
    Saddle,
    Source,
    SemiIndifferent,
}

/// Type of a cycle from its multipliers ordered |κ₁| ≥ |κ₂|.
pub fn classify(k1: C64, k2: C64, tau: f64) -> OrbitType {
    let (a, b) = (k1.norm(), k2.norm());
    if (a - 1.0).abs() <= tau || (b - 1.0).abs() <= tau {
        OrbitType::SemiIndifferent
    } else if a < 1.0 {
        OrbitType::Sink
    } else if b > 1.0 {
        OrbitType::Source
    } else {
        OrbitType::Saddle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<Point2>,
    pub period: usize,
    /// (κ₁, κ₂) with |κ₁| ≥ |κ₂|.
    pub multipliers: (C64, C64),
    #[serde(rename = "type")]
    pub kind: OrbitType,
    /// |fⁿ(p₀) − p₀| at the returned base point.
    pub residual: f64,
    /// False when the minimal period is a proper divisor of `period`.
    pub prime: bool,
}

impl PeriodicOrbit {
    pub fn base(&self) -> Point2 {
        self.points[0]
    }

    /// The same cycle with base point `points[k]`.
    pub fn rotated(&self, map: &HenonMap, k: usize) -> Result<PeriodicOrbit, Escaped> {
        orbit_at(map, self.period, self.points[k % self.period], DEFAULT_TAU)
    }

    /// Smallest distance from any point of `self` to the base point of `other`.
    pub fn distance_to(&self, other: &PeriodicOrbit) -> f64 {
        self.points
            .iter()
            .map(|p| (*p - other.points[0]).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn record(&self, lambda: C64) -> OrbitRecord {
        OrbitRecord {
            lambda: [lambda.re, lambda.im],
            period: self.period,
            points: self.points.iter().map(|p| p.to_pairs()).collect(),
            multipliers: [
                [self.multipliers.0.re, self.multipliers.0.im],
                [self.multipliers.1.re, self.multipliers.1.im],
            ],
            kind: self.kind,
            residual: self.residual,
        }
    }
}

/// Flat report form of an orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub lambda: [f64; 2],
    pub period: usize,
    pub points: Vec<[[f64; 2]; 2]>,
    pub multipliers: [[f64; 2]; 2],
    #[serde(rename = "type")]
    pub kind: OrbitType,
    pub residual: f64,
}

pub const CSV_HEADER: &str =
    "lambda_re,lambda_im,period,index,z_re,z_im,w_re,w_im,k1_re,k1_im,k2_re,k2_im,type,residual";

impl OrbitRecord {
    /// One CSV row per orbit point, columns as in [`CSV_HEADER`].
    pub fn csv_rows(&self) -> Vec<String> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                format!(
                    "{:e},{:e},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:?},{:e}",
                    self.lambda[0],
                    self.lambda[1],
                    self.period,
                    i,
                    p[0][0],
                    p[0][1],
                    p[1][0],
                    p[1][1],
                    self.multipliers[0][0],
                    self.multipliers[0][1],
                    self.multipliers[1][0],
                    self.multipliers[1][1],
                    self.kind,
                    self.residual
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodicError {
    #[error("Dfⁿ − I is numerically singular at {point:?} (|det| = {det:e})")]
    SingularJacobian { point: Point2, det: f64 },
    #[error("Newton iterate left the search box of radius {radius}")]
    Diverged { radius: f64 },
    #[error(transparent)]
    Escaped(#[from] Escaped),
    #[error("Newton stalled with residual {residual:e}")]
    NoConvergence { residual: f64 },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Builds the orbit record of the point x assumed to satisfy fⁿ(x) ≈ x.
pub fn orbit_at(map: &HenonMap, n: usize, x: Point2, tau: f64) -> Result<PeriodicOrbit, Escaped> {
    let (y, jac) = map.orbit_with_differential(x, n)?;
    let mut points = Vec::with_capacity(n);
    let mut p = x;
    for _ in 0..n {
        points.push(p);
        p = map.eval(p)?;
    }
    let scale = x.norm().max(1.0);
    let minimal = (1..n)
        .filter(|m| n % m == 0)
        .find(|&m| (points[m] - x).norm() <= DEDUP_TOL * scale);
    let multipliers = jac.eigenvalues();
    Ok(PeriodicOrbit {
        points,
        period: n,
        multipliers,
        kind: classify(multipliers.0, multipliers.1, tau),
        residual: (y - x).norm(),
        prime: minimal.is_none(),
    })
}

/// Smallest m dividing n with fᵐ(x) = x up to [`DEDUP_TOL`].
pub fn minimal_period(orbit: &PeriodicOrbit) -> usize {
    let n = orbit.period;
    let x = orbit.points[0];
    let scale = x.norm().max(1.0);
    (1..n)
        .filter(|m| n % m == 0)
        .find(|&m| (orbit.points[m] - x).norm() <= DEDUP_TOL * scale)
        .unwrap_or(n)
}

fn singular_threshold(m: &Mat2) -> f64 {
    1e-10 * m.norm().powi(2).max(1.0)
}

struct NewtonOutcome {
    x: Point2,
    jac: Mat2,
    residual: f64,
}

/// Newton iteration for fⁿ(x) = x.
fn newton(
    map: &HenonMap,
    n: usize,
    seed: Point2,
    tol: f64,
    max_iter: usize,
    box_radius: f64,
    check_singular: bool,
) -> Result<NewtonOutcome, PeriodicError> {
    let mut x = seed;
    let mut best: Option<NewtonOutcome> = None;
    let mut prev_step = f64::INFINITY;
    for _ in 0..max_iter {
        let (y, jac) = map.orbit_with_differential(x, n)?;
        let f = y - x;
        let residual = f.norm();
        let m = jac.sub_scalar(C64::new(1.0, 0.0));
        let det = m.det().norm();
        if check_singular && det < singular_threshold(&m) {
            return Err(PeriodicError::SingularJacobian { point: x, det });
        }
        if best.as_ref().map_or(true, |b| residual < b.residual) {
            best = Some(NewtonOutcome { x, jac, residual });
        }
        let dx = match m.solve(-f) {
            Some(d) if d.is_finite() => d,
            _ => return Err(PeriodicError::SingularJacobian { point: x, det }),
        };
        let step = dx.norm();
        let scale = 1.0 + x.norm();
        if residual <= tol && (step <= 1e-14 * scale || step >= prev_step) {
            break;
        }
        x = x + dx;
        if x.max_abs() > box_radius {
            return Err(PeriodicError::Diverged { radius: box_radius });
        }
        prev_step = step;
    }
    let best = best.ok_or(PeriodicError::NoConvergence { residual: f64::INFINITY })?;
    if best.residual > tol {
        return Err(PeriodicError::NoConvergence { residual: best.residual });
    }
    if check_singular {
        let m = best.jac.sub_scalar(C64::new(1.0, 0.0));
        let det = m.det().norm();
        if det < singular_threshold(&m) {
            return Err(PeriodicError::SingularJacobian { point: best.x, det });
        }
    }
    Ok(best)
}

fn search_box(map: &HenonMap, seed: Point2) -> f64 {
    4.0 * map.default_escape_radius().max(seed.max_abs())
}

/// Newton on fⁿ − id from `seed`; the result satisfies residual ≤ tol.
pub fn solve_periodic(map: &HenonMap, n: usize, seed: Point2, tol: f64) -> Result<PeriodicOrbit, PeriodicError> {
    if n == 0 || !(tol > 0.0) {
        return Err(PeriodicError::Invalid("need n ≥ 1 and tol > 0".into()));
    }
    let out = newton(map, n, seed, tol, 100, search_box(map, seed), true)?;
    Ok(orbit_at(map, n, out.x, DEFAULT_TAU)?)
}

/// Outcome of a periodic-point enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    /// Distinct cycles whose minimal period divides n, each with its minimal period.
    pub orbits: Vec<PeriodicOrbit>,
    /// Number of periodic points found (sum of minimal periods).
    pub point_count: usize,
    /// dⁿ, the count with multiplicity of fixed points of fⁿ.
    pub expected: usize,
    pub complete: bool,
}

/// Roots of p(z) = y ordered by branch: by argument about the root centroid,
/// measured from a cut placed off the real axis.
pub fn preimage_branches(p: &Poly, y: C64) -> Vec<C64> {
    let mut coeffs = p.0.clone();
    coeffs[0] -= y;
    let d = p.degree();
    let centroid = if d >= 1 && p.0.len() > d { -p.0[d - 1] / (p.leading() * d as f64) } else { C64::new(0.0, 0.0) };
    let rot = C64::from_polar(1.0, -(PI / 2.0 + 0.1));
    let mut roots = poly_roots(&coeffs);
    roots.sort_by(|a, b| {
        let ka = ((a - centroid) * rot).arg();
        let kb = ((b - centroid) * rot).arg();
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    roots
}

/// Periodic z-sequence of length L = n·k for the recurrence z_{j+1} = p_j(z_j) − b_j z_{j−1},
/// seeded by repeated inverse-branch sweeps along `symbols`.
fn symbolic_seed(map: &HenonMap, symbols: &[usize]) -> Vec<C64> {
    let k = map.factors().len();
    let len = symbols.len();
    let mut z = vec![C64::new(0.0, 0.0); len];
    for _ in 0..40 {
        for j in (0..len).rev() {
            let fac = &map.factors()[j % k];
            let y = z[(j + 1) % len] + fac.b * z[(j + len - 1) % len];
            let branches = preimage_branches(&fac.p, y);
            z[j] = branches[symbols[j] % branches.len()];
        }
    }
    z
}

/// Newton on the cyclic recurrence system.
fn cyclic_newton(map: &HenonMap, mut z: Vec<C64>, bound: f64) -> Option<Vec<C64>> {
    let k = map.factors().len();
    let len = z.len();
    let residuals = |z: &[C64]| -> DVector<C64> {
        DVector::from_fn(len, |j, _| {
            let fac = &map.factors()[j % k];
            z[(j + 1) % len] - fac.p.eval(z[j]) + fac.b * z[(j + len - 1) % len]
        })
    };
    for _ in 0..60 {
        let r = residuals(&z);
        let mut jac = DMatrix::<C64>::zeros(len, len);
        for j in 0..len {
            let fac = &map.factors()[j % k];
            let (_, dp) = fac.p.eval_d(z[j]);
            jac[(j, (j + 1) % len)] += C64::new(1.0, 0.0);
            jac[(j, j)] -= dp;
            jac[(j, (j + len - 1) % len)] += fac.b;
        }
        let dz = jac.lu().solve(&(-r))?;
        let mut step: f64 = 0.0;
        let mut size: f64 = 0.0;
        for j in 0..len {
            z[j] += dz[j];
            step = step.max(dz[j].norm());
            size = size.max(z[j].norm());
        }
        if !step.is_finite() || size > bound {
            return None;
        }
        if step <= 1e-14 * (1.0 + size) {
            break;
        }
    }
    let size = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let res = residuals(&z).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if res <= 1e-9 * (1.0 + size * size) {
        Some(z)
    } else {
        None
    }
}

fn lex_key(p: &Point2) -> [f64; 4] {
    [p.z.re, p.z.im, p.w.re, p.w.im]
}

fn lex_cmp(a: &Point2, b: &Point2) -> std::cmp::Ordering {
    let (ka, kb) = (lex_key(a), lex_key(b));
    for i in 0..4 {
        match ka[i].partial_cmp(&kb[i]) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn candidate_orbit(map: &HenonMap, n: usize, x: Point2, tol: f64, box_radius: f64) -> Option<PeriodicOrbit> {
    let polished = match newton(map, n, x, tol, 40, 4.0 * box_radius, false) {
        Ok(out) => out.x,
        Err(_) => return None,
    };
    let full = orbit_at(map, n, polished, DEFAULT_TAU).ok()?;
    if full.residual > tol {
        return None;
    }
    let m = minimal_period(&full);
    let orbit = if m < n { orbit_at(map, m, polished, DEFAULT_TAU).ok()? } else { full };
    if orbit.points.iter().any(|p| p.max_abs() > box_radius) {
        return None;
    }
    // Canonical base point: lexicographically smallest point of the cycle.
    let start = (0..orbit.period)
        .min_by(|&i, &j| lex_cmp(&orbit.points[i], &orbit.points[j]))
        .unwrap_or(0);
    if start == 0 {
        Some(orbit)
    } else {
        orbit_at(map, orbit.period, orbit.points[start], DEFAULT_TAU).ok()
    }
}

/// All cycles of minimal period dividing n inside the box |z|, |w| ≤ box.
///
/// Seeds are the inverse-branch symbol sequences (when there are at most
/// [`MAX_SYMBOL_SEEDS`]) followed by a `grid_density`² diagonal grid.
pub fn enumerate_periodic(map: &HenonMap, n: usize, box_radius: Option<f64>, grid_density: usize) -> Enumeration {
    let box_radius = box_radius.unwrap_or_else(|| map.default_escape_radius());
    let k = map.factors().len();
    let len = n * k;
    let radices: Vec<usize> = (0..len).map(|j| map.factors()[j % k].p.degree()).collect();
    let expected = map.degree().checked_pow(n as u32).unwrap_or(usize::MAX);
    let tol = 1e-9;

    let mut seeds: Vec<Seed> = Vec::new();
    if expected <= MAX_SYMBOL_SEEDS {
        let mut symbols = vec![0usize; len];
        loop {
            seeds.push(Seed::Symbolic(symbols.clone()));
            let mut pos = 0;
            while pos < len {
                symbols[pos] += 1;
                if symbols[pos] < radices[pos] {
                    break;
                }
                symbols[pos] = 0;
                pos += 1;
            }
            if pos == len {
                break;
            }
        }
    }
    let g = grid_density;
    for i in 0..g {
        for j in 0..g {
            let re = -box_radius + (2.0 * box_radius) * (i as f64 + 0.5) / g as f64;
            let im = -box_radius + (2.0 * box_radius) * (j as f64 + 0.5) / g as f64;
            let c = C64::new(re, im);
            seeds.push(Seed::Point(Point2::new(c, c)));
        }
    }

    let found: Vec<Option<PeriodicOrbit>> = seeds
        .par_iter()
        .map(|seed| {
            let x = match seed {
                Seed::Symbolic(symbols) => {
                    let z0 = symbolic_seed(map, symbols);
                    let z = cyclic_newton(map, z0, 16.0 * box_radius)?;
                    Point2::new(z[0], z[len - 1])
                }
                Seed::Point(p) => *p,
            };
            candidate_orbit(map, n, x, tol, box_radius)
        })
        .collect();

    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for orbit in found.into_iter().flatten() {
        let scale = orbit.points[0].norm().max(1.0);
        let duplicate = orbits
            .iter()
            .any(|o| o.period == orbit.period && o.distance_to(&orbit) <= DEDUP_TOL * scale);
        if !duplicate {
            orbits.push(orbit);
        }
    }
    orbits.sort_by(|a, b| a.period.cmp(&b.period).then_with(|| lex_cmp(&a.points[0], &b.points[0])));
    let point_count = orbits.iter().map(|o| o.period).sum();
    Enumeration { orbits, point_count, expected, complete: point_count == expected }
}

enum Seed {
    Symbolic(Vec<usize>),
    Point(Point2),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    TypeChange,
    Collision,
    NewtonFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationEvent {
    pub lambda: C64,
    pub kind: EventKind,
    pub detail: String,
}

/// Step control for predictor-corrector continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    /// First step as a fraction of the segment length.
    pub initial_step: f64,
    /// Largest step as a fraction of the segment length.
    pub max_step: f64,
    /// Smallest step relative to the total path length before a detour is tried.
    pub min_step: f64,
    /// Radius of the semicircular detour relative to the total path length.
    pub detour_radius: f64,
    pub tol: f64,
    pub max_newton: usize,
    pub tau: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            initial_step: 0.02,
            max_step: 0.05,
            min_step: 1e-7,
            detour_radius: 1e-4,
            tol: 1e-12,
            max_newton: 12,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    /// Tracked orbits at the last reached parameter.
    pub orbits: Vec<PeriodicOrbit>,
    /// Last parameter reached (the path end when `completed`).
    pub lambda: C64,
    pub events: Vec<ContinuationEvent>,
    pub completed: bool,
}

#[derive(Clone, Copy)]
enum Segment {
    Line { from: C64, to: C64 },
    /// λ(s) = start + radius·dir·(1 − e^{iπs}).
    Arc { start: C64, dir: C64, radius: f64 },
}

impl Segment {
    fn at(&self, s: f64) -> C64 {
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Arc { start, dir, radius } => {
                start + dir * radius * (C64::new(1.0, 0.0) - C64::from_polar(1.0, PI * s))
            }
        }
    }

    fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { radius, .. } => PI * radius,
        }
    }
}

#[derive(Clone)]
struct Tracked {
    x: Point2,
    jac: Mat2,
    period: usize,
}

struct Tracker<'a> {
    family: &'a ParamHenonFamily,
    ctrl: &'a StepControl,
    total_length: f64,
    states: Vec<Tracked>,
    lambda: C64,
    events: Vec<ContinuationEvent>,
    colliding: Vec<(usize, usize)>,
}

enum StepFailure {
    Rejected,
    Fatal(String),
}

impl<'a> Tracker<'a> {
    fn kind(&self, st: &Tracked) -> OrbitType {
        let (k1, k2) = st.jac.eigenvalues();
        classify(k1, k2, self.ctrl.tau)
    }

    /// Predictor-corrector step of every orbit from the current λ to `target`.
    fn try_step(&self, target: C64) -> Result<Vec<Tracked>, StepFailure> {
        let map = self.family.map_unchecked(target).map_err(|e| StepFailure::Fatal(e.to_string()))?;
        let h = target - self.lambda;
        let mut out = Vec::with_capacity(self.states.len());
        for st in &self.states {
            let (_, dl, jac) = self
                .family
                .orbit_with_dlambda(self.lambda, st.x, st.period)
                .map_err(|e| StepFailure::Fatal(e.to_string()))?;
            let m = jac.sub_scalar(C64::new(1.0, 0.0));
            let tangent = m.solve(-dl).ok_or(StepFailure::Rejected)?;
            let predicted = st.x + tangent.scale(h);
            let res = newton(&map, st.period, predicted, self.ctrl.tol, self.ctrl.max_newton, f64::INFINITY, false)
                .map_err(|_| StepFailure::Rejected)?;
            let correction = (res.x - predicted).norm();
            let allowed = (0.3 * (tangent.scale(h)).norm()).max(1e-10 * (1.0 + st.x.norm()));
            if correction > allowed {
                return Err(StepFailure::Rejected);
            }
            out.push(Tracked { x: res.x, jac: res.jac, period: st.period });
        }
        Ok(out)
    }

    fn accept(&mut self, seg: &Segment, s0: f64, s1: f64, next: Vec<Tracked>) {
        let lambda1 = seg.at(s1);
        for (old, new) in self.states.iter().zip(next.iter()) {
            let (ka, kb) = (self.kind(old), self.kind(new));
            if ka != kb {
                let (a1, a2) = old.jac.eigenvalues();
                let (b1, b2) = new.jac.eigenvalues();
                let f0 = [a1.norm() - 1.0, a2.norm() - 1.0];
                let f1 = [b1.norm() - 1.0, b2.norm() - 1.0];
                let mut frac = 0.5;
                for i in 0..2 {
                    if f0[i].signum() != f1[i].signum() && f0[i] != f1[i] {
                        frac = f0[i] / (f0[i] - f1[i]);
                        break;
                    }
                }
                let lam = seg.at(s0 + frac.clamp(0.0, 1.0) * (s1 - s0));
                self.events.push(ContinuationEvent {
                    lambda: lam,
                    kind: EventKind::TypeChange,
                    detail: format!("{:?} -> {:?}", ka, kb),
                });
            }
        }
        self.states = next;
        self.lambda = lambda1;
        self.check_collisions();
    }

    fn check_collisions(&mut self) {
        for i in 0..self.states.len() {
            for j in (i + 1)..self.states.len() {
                let close = self.states[i].period == self.states[j].period
                    && self.orbit_distance(i, j) < COLLISION_TOL;
                let known = self.colliding.contains(&(i, j));
                if close && !known {
                    self.colliding.push((i, j));
                    self.events.push(ContinuationEvent {
                        lambda: self.lambda,
                        kind: EventKind::Collision,
                        detail: format!("orbits {} and {}", i, j),
                    });
                } else if !close && known {
                    self.colliding.retain(|p| *p != (i, j));
                }
            }
        }
    }

    fn orbit_distance(&self, i: usize, j: usize) -> f64 {
        let map = match self.family.map_unchecked(self.lambda) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        let target = self.states[j].x;
        let mut p = self.states[i].x;
        let mut best = f64::INFINITY;
        for _ in 0..self.states[i].period {
            best = best.min((p - target).norm());
            p = map.apply_raw(p);
        }
        best
    }

    /// Tracks along a segment. On a line, exhausted step refinement triggers a
    /// rollback to an earlier accepted state and a semicircular detour whose
    /// diameter contains the failure point.
    fn run_segment(&mut self, seg: Segment, allow_detour: bool) -> Result<(), String> {
        let len = seg.length();
        if len == 0.0 {
            return Ok(());
        }
        let mut s = 0.0;
        let mut ds = self.ctrl.initial_step;
        let min_ds = self.ctrl.min_step * self.total_length / len;
        let mut history: Vec<Checkpoint> = vec![self.checkpoint()];
        while s < 1.0 {
            let s1 = (s + ds).min(1.0);
            match self.try_step(seg.at(s1)) {
                Ok(next) => {
                    self.accept(&seg, s, s1, next);
                    s = s1;
                    ds = (ds * 1.5).min(self.ctrl.max_step);
                    history.push(self.checkpoint());
                }
                Err(StepFailure::Fatal(msg)) => return Err(msg),
                Err(StepFailure::Rejected) => {
                    ds *= 0.5;
                    if ds >= min_ds {
                        continue;
                    }
                    let Segment::Line { from, to } = seg else {
                        return Err("step refinement exhausted on detour".into());
                    };
                    if !allow_detour {
                        return Err("step refinement exhausted".into());
                    }
                    let failed_at = self.lambda;
                    let radius = self.ctrl.detour_radius * self.total_length;
                    let back = history
                        .iter()
                        .rposition(|h| (h.lambda - failed_at).norm() >= radius)
                        .unwrap_or(0);
                    let reach = (failed_at - history[back].lambda).norm().max(radius);
                    let end_s = (s + reach / len).min(1.0);
                    let cp = history[back].clone();
                    history.truncate(back + 1);
                    self.restore(&cp);
                    let end = seg.at(end_s);
                    let half = 0.5 * (end - self.lambda).norm();
                    if half <= 0.0 {
                        return Err("step refinement exhausted at path end".into());
                    }
                    let dir = (to - from) / (to - from).norm();
                    self.run_segment(Segment::Arc { start: self.lambda, dir, radius: half }, false)?;
                    self.lambda = end;
                    s = end_s;
                    ds = self.ctrl.initial_step;
                    history.push(self.checkpoint());
                }
            }
        }
        Ok(())
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            lambda: self.lambda,
            states: self.states.clone(),
            events: self.events.len(),
            colliding: self.colliding.clone(),
        }
    }

    fn restore(&mut self, cp: &Checkpoint) {
        self.lambda = cp.lambda;
        self.states = cp.states.clone();
        self.events.truncate(cp.events);
        self.colliding = cp.colliding.clone();
    }
}

#[derive(Clone)]
struct Checkpoint {
    lambda: C64,
    states: Vec<Tracked>,
    events: usize,
    colliding: Vec<(usize, usize)>,
}

/// Continues several cycles in lockstep along a polygonal λ-path starting at `path[0]`.
pub fn continue_orbits(
    family: &ParamHenonFamily,
    orbits: &[PeriodicOrbit],
    path: &[C64],
    ctrl: &StepControl,
) -> Result<Continuation, PeriodicError> {
    if path.is_empty() || orbits.is_empty() {
        return Err(PeriodicError::Invalid("empty path or orbit list".into()));
    }
    let start = path[0];
    let map0 = family.map_unchecked(start)?;
    let mut states = Vec::new();
    for o in orbits {
        let (y, jac) = map0.orbit_with_differential(o.points[0], o.period)?;
        let tol = ctrl.tol.max(o.residual) * 10.0 + 1e-12;
        if (y - o.points[0]).norm() > tol {
            return Err(PeriodicError::Invalid("orbit is not periodic at the path start".into()));
        }
        states.push(Tracked { x: o.points[0], jac, period: o.period });
    }
    let total_length: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut tracker = Tracker {
        family,
        ctrl,
        total_length: total_length.max(f64::MIN_POSITIVE),
        states,
        lambda: start,
        events: Vec::new(),
        colliding: Vec::new(),
    };
    tracker.check_collisions();
    let mut completed = true;
    for w in path.windows(2) {
        if let Err(msg) = tracker.run_segment(Segment::Line { from: w[0], to: w[1] }, true) {
            tracker.events.push(ContinuationEvent { lambda: tracker.lambda, kind: EventKind::NewtonFailure, detail: msg });
            completed = false;
            break;
        }
    }
    let map = family.map_unchecked(tracker.lambda)?;
    let out = tracker
        .states
        .iter()
        .map(|st| orbit_at(&map, st.period, st.x, ctrl.tau))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Continuation { orbits: out, lambda: tracker.lambda, events: tracker.events, completed })
}

/// Continues one cycle along the path; see [`continue_orbits`].
pub fn continue_orbit(
    family: &ParamHenonFamily,
    orbit: &PeriodicOrbit,
    path: &[C64],
    ctrl: &StepControl,
) -> Result<Continuation, PeriodicError> {
    continue_orbits(family, std::slice::from_ref(orbit), path, ctrl)
}

/// Parameter where a multiplier of the continued cycle equals a target value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnityRoot {
    pub lambda: C64,
    pub orbit: PeriodicOrbit,
    /// The multiplier closest to the target.
    pub multiplier: C64,
    /// Central-difference derivative of the continued multiplier.
    pub drho_dlambda: C64,
    /// |∂ρ/∂λ| < 1e−10.
    pub degenerate: bool,
    /// The cycle collides with another one at λ* (target 1), so ρ is not a
    /// holomorphic function of λ there and the difference quotient blows up.
    pub fold: bool,
}

fn closest_multiplier(jac: &Mat2, target: C64) -> C64 {
    let (k1, k2) = jac.eigenvalues();
    if (k1 - target).norm() <= (k2 - target).norm() {
        k1
    } else {
        k2
    }
}

/// Solves fⁿ_λ(x) = x together with det(Dfⁿ_λ(x) − target·I) = 0 for (x, λ).
pub fn solve_multiplier_root_of_unity(
    family: &ParamHenonFamily,
    orbit: &PeriodicOrbit,
    target: C64,
    lambda_seed: C64,
) -> Result<UnityRoot, PeriodicError> {
    let n = orbit.period;
    let mut x = orbit.points[0];
    let mut lam = lambda_seed;
    let det_fn = |x: Point2, lam: C64| -> Result<C64, PeriodicError> {
        let map = family.map_unchecked(lam)?;
        let (_, jac) = map.orbit_with_differential(x, n)?;
        Ok(jac.sub_scalar(target).det())
    };
    let mut converged = false;
    for _ in 0..80 {
        let map = family.map_unchecked(lam)?;
        let (y, dl, jac) = family.orbit_with_dlambda(lam, x, n)?;
        let f = y - x;
        let g = jac.sub_scalar(target).det();
        let scale = 1.0 + x.norm() + lam.norm();
        let hz = 1e-6 * (1.0 + x.z.norm());
        let hw = 1e-6 * (1.0 + x.w.norm());
        let hl = 1e-6 * (1.0 + lam.norm());
        let dz = C64::new(hz, 0.0);
        let dw = C64::new(hw, 0.0);
        let dlam = C64::new(hl, 0.0);
        let gz = (det_fn(Point2::new(x.z + dz, x.w), lam)? - det_fn(Point2::new(x.z - dz, x.w), lam)?) / (2.0 * hz);
        let gw = (det_fn(Point2::new(x.z, x.w + dw), lam)? - det_fn(Point2::new(x.z, x.w - dw), lam)?) / (2.0 * hw);
        let gl = (det_fn(x, lam + dlam)? - det_fn(x, lam - dlam)?) / (2.0 * hl);
        let one = C64::new(1.0, 0.0);
        let a = Matrix3::new(
            jac.a - one, jac.b, dl.z,
            jac.c, jac.d - one, dl.w,
            gz, gw, gl,
        );
        let rhs = Vector3::new(-f.z, -f.w, -g);
        let step = a.lu().solve(&rhs).ok_or(PeriodicError::SingularJacobian { point: x, det: 0.0 })?;
        x = Point2::new(x.z + step[0], x.w + step[1]);
        lam += step[2];
        if !x.is_finite() || !lam.re.is_finite() || !lam.im.is_finite() || x.max_abs() > search_box(&map, orbit.points[0]) {
            return Err(PeriodicError::Diverged { radius: search_box(&map, orbit.points[0]) });
        }
        let size = step[0].norm().max(step[1].norm()).max(step[2].norm());
        if size <= 1e-15 * scale {
            converged = true;
            break;
        }
    }
    let map = family.family_at(lam)?;
    let (y, jac) = map.orbit_with_differential(x, n)?;
    let residual = (y - x).norm();
    if !converged && residual > 1e-12 {
        return Err(PeriodicError::NoConvergence { residual });
    }
    let orbit_star = orbit_at(&map, n, x, DEFAULT_TAU)?;
    let multiplier = closest_multiplier(&jac, target);
    let m = jac.sub_scalar(C64::new(1.0, 0.0));
    let fold = m.det().norm() < 1e-8 * m.norm().powi(2).max(1.0);

    let h = 1e-6 * family.domain.radius.max(1e-12);
    let rho_at = |l: C64| -> Result<C64, PeriodicError> {
        let map = family.map_unchecked(l)?;
        let mut seeds = vec![x];
        if fold {
            let (k1, k2) = jac.eigenvalues();
            let unit = if (k1 - 1.0).norm() <= (k2 - 1.0).norm() { k1 } else { k2 };
            let v = jac.eigenvector(unit);
            let r = h.sqrt();
            for s in [C64::new(r, 0.0), C64::new(-r, 0.0), C64::new(0.0, r), C64::new(0.0, -r)] {
                seeds.push(x + v.scale(s));
            }
        }
        let mut best: Option<(f64, C64)> = None;
        for seed in seeds {
            if let Ok(out) = newton(&map, n, seed, 1e-13, 40, f64::INFINITY, false) {
                if (out.x - x).norm() > 1e-2 * (1.0 + x.norm()) {
                    continue;
                }
                let rho = closest_multiplier(&out.jac, target);
                let d = (out.x - x).norm();
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, rho));
                }
            }
        }
        best.map(|(_, r)| r).ok_or(PeriodicError::NoConvergence { residual: f64::NAN })
    };
    let hc = C64::new(h, 0.0);
    let drho = (rho_at(lam + hc)? - rho_at(lam - hc)?) / (2.0 * h);
    Ok(UnityRoot {
        lambda: lam,
        orbit: orbit_star,
        multiplier,
        drho_dlambda: drho,
        degenerate: drho.norm() < 1e-10,
        fold,
    })
}

/// Rectangular grid of parameter cells; row 0 is the top (largest Im λ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub cols: usize,
    pub rows: usize,
}

impl ParamGrid {
    pub fn vertex(&self, col: usize, row: usize) -> C64 {
        let re = self.re_range.0 + (self.re_range.1 - self.re_range.0) * col as f64 / self.cols as f64;
        let im = self.im_range.1 - (self.im_range.1 - self.im_range.0) * row as f64 / self.rows as f64;
        C64::new(re, im)
    }

    pub fn center(&self, col: usize, row: usize) -> C64 {
        (self.vertex(col, row) + self.vertex(col + 1, row + 1)) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanBudget {
    pub grid_density: usize,
    pub step: StepControl,
}

impl Default for ScanBudget {
    fn default() -> Self {
        ScanBudget { grid_density: 12, step: StepControl::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellTag {
    /// No tracked cycle of period ≤ P changes type in the cell. This is a
    /// necessary condition for stability only, since longer periods are not tracked.
    Constant,
    Crossing,
    Untracked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRaster {
    pub grid: ParamGrid,
    pub max_period: usize,
    /// Row-major cell tags.
    pub tags: Vec<CellTag>,
    /// Number of attracting cycles of period ≤ P at each cell center.
    pub sink_counts: Vec<usize>,
}

impl BifurcationRaster {
    pub fn tag(&self, col: usize, row: usize) -> CellTag {
        self.tags[row * self.grid.cols + col]
    }

    pub fn sinks(&self, col: usize, row: usize) -> usize {
        self.sink_counts[row * self.grid.cols + col]
    }
}

struct VertexData {
    orbits: Vec<PeriodicOrbit>,
    types: Vec<(usize, OrbitType)>,
    complete: bool,
}

fn cycles_up_to(family: &ParamHenonFamily, lambda: C64, max_period: usize, density: usize) -> Option<VertexData> {
    let map = family.map_unchecked(lambda).ok()?;
    let mut orbits = Vec::new();
    let mut complete = true;
    for p in 1..=max_period {
        let e = enumerate_periodic(&map, p, None, density);
        complete &= e.complete;
        orbits.extend(e.orbits.into_iter().filter(|o| o.period == p));
    }
    let mut types: Vec<(usize, OrbitType)> = orbits.iter().map(|o| (o.period, o.kind)).collect();
    types.sort();
    Some(VertexData { orbits, types, complete })
}

/// Tags each parameter cell by comparing cycle types at its corners and
/// tracking the corner cycles around the cell boundary.
pub fn scan_bifurcation_grid(
    family: &ParamHenonFamily,
    grid: &ParamGrid,
    max_period: usize,
    budget: &ScanBudget,
) -> BifurcationRaster {
    let vcols = grid.cols + 1;
    let vertices: Vec<Option<VertexData>> = (0..(grid.rows + 1) * vcols)
        .into_par_iter()
        .map(|idx| cycles_up_to(family, grid.vertex(idx % vcols, idx / vcols), max_period, budget.grid_density))
        .collect();
    let cells: Vec<(CellTag, usize)> = (0..grid.rows * grid.cols)
        .into_par_iter()
        .map(|idx| {
            let (col, row) = (idx % grid.cols, idx / grid.cols);
            let sinks = cycles_up_to(family, grid.center(col, row), max_period, budget.grid_density)
                .map(|v| v.orbits.iter().filter(|o| o.kind == OrbitType::Sink).count())
                .unwrap_or(0);
            let corners = [(col, row), (col + 1, row), (col + 1, row + 1), (col, row + 1)];
            let data: Vec<&VertexData> =
                match corners.iter().map(|&(c, r)| vertices[r * vcols + c].as_ref()).collect::<Option<Vec<_>>>() {
                    Some(d) => d,
                    None => return (CellTag::Untracked, sinks),
                };
            if data.iter().any(|d| d.types != data[0].types) {
                return (CellTag::Crossing, sinks);
            }
            let mut untracked = data.iter().any(|d| !d.complete);
            let mut path: Vec<C64> = corners.iter().map(|&(c, r)| grid.vertex(c, r)).collect();
            path.push(path[0]);
            path.dedup();
            if path.len() > 1 && !data[0].orbits.is_empty() {
                match continue_orbits(family, &data[0].orbits, &path, &budget.step) {
                    Ok(c) => {
                        if c.events.iter().any(|e| e.kind != EventKind::NewtonFailure) {
                            return (CellTag::Crossing, sinks);
                        }
                        untracked |= !c.completed;
                    }
                    Err(_) => untracked = true,
                }
            }
            (if untracked { CellTag::Untracked } else { CellTag::Constant }, sinks)
        })
        .collect();
    BifurcationRaster {
        grid: grid.clone(),
        max_period,
        tags: cells.iter().map(|c| c.0).collect(),
        sink_counts: cells.iter().map(|c| c.1).collect(),
    }
}
