//! Sink linearization, strong-stable projection, incoming Fatou coordinates and
//! critical points of fibrations restricted to unstable manifolds.

use crate::family::{Escaped, HenonMap, OVERFLOW_BOUND};
use crate::jet::{Jet, Shape};
use crate::linalg::{Mat2, Point2};
use crate::manifolds::{evaluate, ManifoldSeries};
use crate::maps::{Iterate, PlaneMap};
use crate::periodic::PeriodicOrbit;
use crate::roots::winding_on_circle;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for κ₂ = κ₁ⁱ.
pub const RESONANCE_TOL: f64 = 1e-8;
/// Radius of the certification circle around a critical point.
pub const CERT_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasinError {
    #[error("cycle is not attracting")]
    NotASink,
    #[error("orbit did not converge to the sink within {0} iterates")]
    NotInBasin(usize),
    #[error("|κ₁| = |κ₂| without resonance: no strong stable splitting")]
    NoStrongStableSplitting,
    #[error("orbit left the incoming petal at step {0}")]
    NotInPetal(usize),
    #[error("map is not in the normalized form x + x^(k+1) + … (leading coefficient {0})")]
    NotNormalized(C64),
    #[error("linearization failed: {0}")]
    Linearization(String),
}

/// Conjugacy F∘h = h∘L near a sink with L(u) = (κ₁u₁, κ₂u₂ + α·u₁ⁱ).
#[derive(Debug, Clone)]
pub struct SinkLinearization {
    pub sink: PeriodicOrbit,
    /// |κ₁| ≥ |κ₂|.
    pub eigenvalues: (C64, C64),
    pub resonance: Option<usize>,
    /// 1 in the resonant case after rescaling u₂ (0 if the resonant coefficient vanishes).
    pub alpha: C64,
    pub order: usize,
    /// Columns are the eigenvectors; h(u) = p + basis·g(u).
    pub basis: Mat2,
    pub basis_inv: Mat2,
    pub g: (Jet, Jet),
    /// max coefficient of F∘h − h∘L up to the jet order.
    pub residual: f64,
    /// Radius in u where the top-order terms are below rounding relative to |u|.
    pub jet_radius: f64,
}

fn compose_with_linear(g: &(Jet, Jet), k1: C64, k2: C64, alpha: C64, res: Option<usize>) -> (Jet, Jet) {
    let shape = g.0.shape;
    let u1 = Jet::variable(shape, 0, C64::new(0.0, 0.0)).scale(k1);
    let mut u2 = Jet::variable(shape, 1, C64::new(0.0, 0.0)).scale(k2);
    if let Some(i) = res {
        let mut t = Jet::zero(shape);
        t.set(i, 0, 0, alpha);
        u2 = &u2 + &t;
    }
    let sub = |f: &Jet| -> Jet {
        let mut out = Jet::zero(shape);
        let p1: Vec<Jet> = (0..=shape.total).map(|a| u1.powu(a as u32)).collect();
        let p2: Vec<Jet> = (0..=shape.total).map(|b| u2.powu(b as u32)).collect();
        for (a, b, _) in shape.monomials() {
            let c = f.coeff(a, b, 0);
            if c.norm() != 0.0 {
                out = &out + &(&p1[a] * &p2[b]).scale(c);
            }
        }
        out
    };
    (sub(&g.0), sub(&g.1))
}

fn apply_map_to_g<M: PlaneMap>(f: &M, p: Point2, basis: &Mat2, inv: &Mat2, g: &(Jet, Jet)) -> Option<(Jet, Jet)> {
    let z = (&g.0.scale(basis.a) + &g.1.scale(basis.b)).add_const(p.z);
    let w = (&g.0.scale(basis.c) + &g.1.scale(basis.d)).add_const(p.w);
    let (fz, fw) = f.eval_jet(&z, &w)?;
    let (fz, fw) = (fz.add_const(-p.z), fw.add_const(-p.w));
    Some((&fz.scale(inv.a) + &fw.scale(inv.b), &fz.scale(inv.c) + &fw.scale(inv.d)))
}

/// Poincaré–Dulac normal form of F at the sink to total order `order`.
pub fn linearize_sink<M: PlaneMap>(f: &M, sink: &PeriodicOrbit, order: usize) -> Result<SinkLinearization, BasinError> {
    let p = sink.points[0];
    let df = f.differential(p);
    let (k1, k2) = df.eigenvalues();
    if !(k1.norm() < 1.0) {
        return Err(BasinError::NotASink);
    }
    let v1 = df.eigenvector(k1);
    let mut v2 = df.eigenvector(k2);
    if (k1 - k2).norm() <= RESONANCE_TOL * k1.norm().max(1e-300) {
        // Repeated eigenvalue: complete the basis orthogonally.
        v2 = Point2::new(-v1.w.conj(), v1.z.conj());
    }
    let basis = Mat2::from_columns(v1, v2);
    let basis_inv = basis.inverse().ok_or_else(|| BasinError::Linearization("degenerate eigenbasis".into()))?;
    let shape = Shape::bivariate(order.max(1));
    let mut g = (Jet::variable(shape, 0, C64::new(0.0, 0.0)), Jet::variable(shape, 1, C64::new(0.0, 0.0)));
    let mut resonance = None;
    let mut alpha = C64::new(0.0, 0.0);
    let mut m = 2;
    while m <= order {
        let lhs = apply_map_to_g(f, p, &basis, &basis_inv, &g)
            .ok_or_else(|| BasinError::Linearization("map undefined on the jet".into()))?;
        let rhs = compose_with_linear(&g, k1, k2, alpha, resonance);
        let mut redo = false;
        for a in (0..=m).rev() {
            let b = m - a;
            let mu = k1.powu(a as u32) * k2.powu(b as u32);
            let d0 = rhs.0.coeff(a, b, 0) - lhs.0.coeff(a, b, 0);
            g.0.set(a, b, 0, d0 / (k1 - mu));
            let d1 = rhs.1.coeff(a, b, 0) - lhs.1.coeff(a, b, 0);
            let den = k2 - mu;
            if b == 0 && resonance.is_none() && den.norm() <= RESONANCE_TOL * k2.norm().max(1e-300) {
                // Resonant monomial u₁ᵃ: it stays in L with coefficient α.
                resonance = Some(a);
                let raw = -d1;
                if raw.norm() > 1e-14 {
                    // Rescale u₂ by the raw coefficient so that α = 1, then solve this order again.
                    for (i, j, _) in shape.monomials() {
                        if j > 0 && i + j < m {
                            let s = raw.powu(j as u32);
                            g.0.set(i, j, 0, g.0.coeff(i, j, 0) * s);
                            g.1.set(i, j, 0, g.1.coeff(i, j, 0) * s);
                        }
                    }
                    alpha = C64::new(1.0, 0.0);
                    redo = true;
                    break;
                }
                continue;
            }
            if Some(a) == resonance && b == 0 {
                continue;
            }
            g.1.set(a, b, 0, d1 / den);
        }
        if redo {
            for (i, j, _) in shape.monomials() {
                if i + j == m {
                    g.0.set(i, j, 0, C64::new(0.0, 0.0));
                    g.1.set(i, j, 0, C64::new(0.0, 0.0));
                }
            }
            continue;
        }
        m += 1;
    }
    finish(f, sink, k1, k2, resonance, alpha, order, basis, basis_inv, g, p)
}

#[allow(clippy::too_many_arguments)]
fn finish<M: PlaneMap>(
    f: &M,
    sink: &PeriodicOrbit,
    k1: C64,
    k2: C64,
    resonance: Option<usize>,
    alpha: C64,
    order: usize,
    basis: Mat2,
    basis_inv: Mat2,
    g: (Jet, Jet),
    p: Point2,
) -> Result<SinkLinearization, BasinError> {
    let lhs = apply_map_to_g(f, p, &basis, &basis_inv, &g)
        .ok_or_else(|| BasinError::Linearization("map undefined on the jet".into()))?;
    let rhs = compose_with_linear(&g, k1, k2, alpha, resonance);
    let residual = (&lhs.0 - &rhs.0).max_abs().max((&lhs.1 - &rhs.1).max_abs());
    let shape = g.0.shape;
    let top: f64 = shape
        .monomials()
        .filter(|(a, b, _)| a + b == shape.total && shape.total >= 2)
        .map(|(a, b, _)| g.0.coeff(a, b, 0).norm() + g.1.coeff(a, b, 0).norm())
        .sum();
    let jet_radius = if top == 0.0 || shape.total < 2 {
        f64::INFINITY
    } else {
        (1e-16 / top).powf(1.0 / (shape.total as f64 - 1.0))
    };
    Ok(SinkLinearization {
        sink: sink.clone(),
        eigenvalues: (k1, k2),
        resonance,
        alpha,
        order,
        basis,
        basis_inv,
        g,
        residual,
        jet_radius,
    })
}

impl SinkLinearization {
    /// h(u) = p + basis·g(u).
    pub fn h(&self, u1: C64, u2: C64) -> Point2 {
        let zero = C64::new(0.0, 0.0);
        let g = Point2::new(self.g.0.eval(u1, u2, zero), self.g.1.eval(u1, u2, zero));
        self.sink.points[0] + self.basis.apply(g)
    }

    /// Linearizing coordinate u = h⁻¹(x) by Newton, for x near the sink.
    pub fn coordinate(&self, x: Point2) -> Option<(C64, C64)> {
        let zero = C64::new(0.0, 0.0);
        let y = self.basis_inv.apply(x - self.sink.points[0]);
        let d = [
            self.g.0.derivative(0),
            self.g.0.derivative(1),
            self.g.1.derivative(0),
            self.g.1.derivative(1),
        ];
        let mut u = y;
        for _ in 0..50 {
            let gv = Point2::new(self.g.0.eval(u.z, u.w, zero), self.g.1.eval(u.z, u.w, zero));
            let jac = Mat2::new(
                d[0].eval(u.z, u.w, zero),
                d[1].eval(u.z, u.w, zero),
                d[2].eval(u.z, u.w, zero),
                d[3].eval(u.z, u.w, zero),
            );
            let du = jac.solve(y - gv)?;
            u = u + du;
            if du.norm() <= 1e-16 * u.norm().max(1e-300) {
                break;
            }
        }
        u.is_finite().then_some((u.z, u.w))
    }

    fn has_splitting(&self) -> bool {
        let (a, b) = (self.eigenvalues.0.norm(), self.eigenvalues.1.norm());
        b < a * (1.0 - 1e-12) || self.resonance.is_some()
    }
}

/// lim κ₁⁻ⁿ·u₁(Fⁿx), with u the linearizing coordinate; level sets are strong stable leaves.
pub fn strong_stable_value<M: PlaneMap>(f: &M, lin: &SinkLinearization, x: Point2, budget: usize) -> Result<C64, BasinError> {
    if !lin.has_splitting() {
        return Err(BasinError::NoStrongStableSplitting);
    }
    let k1 = lin.eigenvalues.0;
    let near = 0.5 * lin.jet_radius.min(1e300);
    let p = lin.sink.points[0];
    let mut y = x;
    let mut scale = C64::new(1.0, 0.0);
    let mut prev: Option<C64> = None;
    for _ in 0..=budget {
        let u = lin.basis_inv.apply(y - p);
        if u.norm() <= near {
            let (u1, _) = lin.coordinate(y).ok_or(BasinError::NotInBasin(budget))?;
            let v = u1 * scale;
            if let Some(pv) = prev {
                if (v - pv).norm() <= 1e-12 * pv.norm().max(1.0) {
                    return Ok(pv);
                }
            }
            if prev.is_none() && u.norm() == 0.0 {
                return Ok(v);
            }
            prev = Some(v);
        }
        y = match f.eval(y) {
            Ok(z) => z,
            Err(_) => return Err(BasinError::NotInBasin(budget)),
        };
        scale /= k1;
    }
    Err(BasinError::NotInBasin(budget))
}

/// The model map (x/(1−x), s·y): the first coordinate is conjugate to z ↦ z − 1 by z = 1/x.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicModel {
    pub contraction: C64,
}

impl PlaneMap for ParabolicModel {
    fn eval(&self, x: Point2) -> Result<Point2, Escaped> {
        let y = Point2::new(x.z / (C64::new(1.0, 0.0) - x.z), x.w * self.contraction);
        if y.is_finite() && y.max_abs() <= OVERFLOW_BOUND {
            Ok(y)
        } else {
            Err(Escaped { step: 0, last: x })
        }
    }

    fn differential(&self, x: Point2) -> Mat2 {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let d = one - x.z;
        Mat2::new((d * d).inv(), zero, zero, self.contraction)
    }

    fn eval_jet(&self, z: &Jet, w: &Jet) -> Option<(Jet, Jet)> {
        let one_minus = (-z).add_const(C64::new(1.0, 0.0));
        Some((z * &one_minus.recip()?, w.scale(self.contraction)))
    }
}

/// Local data of a semi-parabolic germ x ↦ x + x^{k+1} + … on the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatouData {
    pub k: usize,
    /// Coefficient of the logarithmic correction in wᴵ = z + c·log z, z = 1/(kxᵏ).
    pub c: C64,
    pub petal: usize,
    pub r: f64,
    /// Angular margin inside the petal for admissible starting points.
    pub eta: f64,
    /// True when c was fitted from orbit tails rather than read from the jet.
    pub fitted: bool,
}

impl FatouData {
    /// Whether x lies in the incoming petal {|xᵏ + rᵏ| < rᵏ} around the direction of petal j,
    /// with `margin` narrowing the admissible arguments of xᵏ about π.
    pub fn in_petal(&self, x: C64, margin: f64) -> bool {
        let k = self.k as i32;
        let xk = x.powi(k);
        let rk = self.r.powi(k);
        if (xk + rk).norm() >= rk || x.norm() == 0.0 {
            return false;
        }
        let dir = std::f64::consts::PI * (2 * self.petal + 1) as f64 / self.k as f64;
        let rel = (x * C64::from_polar(1.0, -dir)).arg();
        if rel.abs() >= std::f64::consts::PI / (2.0 * self.k as f64) {
            return false;
        }
        ((xk.arg().abs()) - std::f64::consts::PI).abs() < std::f64::consts::PI / 2.0 - margin
    }

    pub fn w(&self, x: C64) -> C64 {
        let z = (x.powi(self.k as i32) * self.k as f64).inv();
        if self.c.norm() == 0.0 {
            z
        } else {
            z + self.c * z.ln()
        }
    }
}

/// Reads k and c from the jet of x ↦ F₁(x, 0) = x + x^{k+1} + b·x^{2k+1} + …, where
/// c = ((k+1)/2 − b)/k. Falls back to fitting c from orbit tails when no jet is available.
pub fn fatou_data<M: PlaneMap>(f: &M, petal: usize, r: f64, eta: f64) -> Result<FatouData, BasinError> {
    let max_k = 8;
    let shape = Shape::univariate(2 * max_k + 2);
    let x = Jet::variable(shape, 0, C64::new(0.0, 0.0));
    let zero = Jet::zero(shape);
    if let Some((fx, _)) = f.eval_jet(&x, &zero) {
        let k = (1..=max_k)
            .find(|&j| fx.coeff(j + 1, 0, 0).norm() > 1e-12)
            .ok_or(BasinError::NotNormalized(C64::new(0.0, 0.0)))?;
        let lead = fx.coeff(k + 1, 0, 0);
        if (lead - C64::new(1.0, 0.0)).norm() > 1e-10 || (fx.coeff(1, 0, 0) - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(BasinError::NotNormalized(lead));
        }
        // Terms strictly between orders k+1 and 2k+1 must vanish in the normalized form.
        let b = fx.coeff(2 * k + 1, 0, 0);
        let c = (C64::new((k as f64 + 1.0) / 2.0, 0.0) - b) / k as f64;
        return Ok(FatouData { k, c, petal, r, eta, fitted: false });
    }
    let k = 1;
    let mut data = FatouData { k, c: C64::new(0.0, 0.0), petal, r, eta, fitted: true };
    let mut estimates = Vec::new();
    for start in [0.3, 0.5, 0.7] {
        let mut p = Point2::new(C64::new(-start * r, 0.0), C64::new(0.0, 0.0));
        for _ in 0..20_000 {
            p = f.eval(p).map_err(|_| BasinError::NotInPetal(0))?;
        }
        let z0 = (p.z * k as f64).inv();
        let q = f.eval(p).map_err(|_| BasinError::NotInPetal(0))?;
        let z1 = (q.z * k as f64).inv();
        estimates.push((z1 - z0 + 1.0) * z0);
    }
    data.c = estimates.iter().sum::<C64>() / estimates.len() as f64;
    Ok(data)
}

/// Neville extrapolation of samples (tᵢ, vᵢ) to t = 0.
pub fn neville_at_zero(samples: &[(C64, C64)]) -> C64 {
    let n = samples.len();
    let mut p: Vec<C64> = samples.iter().map(|s| s.1).collect();
    for m in 1..n {
        for i in 0..n - m {
            let (ti, tj) = (samples[i].0, samples[i + m].0);
            p[i] = (tj * p[i] - ti * p[i + 1]) / (tj - ti);
        }
    }
    p[0]
}

/// Incoming Fatou coordinate φᴵ = lim (wᴵ(xₙ) + n), extrapolated in 1/zₙ.
///
/// A point outside the admissible sector is first iterated into it (within the budget),
/// which extends φᴵ along its computed orbit by φᴵ(x) = φᴵ(fᵐx) + m.
pub fn fatou_coordinate<M: PlaneMap>(f: &M, fd: &FatouData, x: Point2, budget: usize) -> Result<C64, BasinError> {
    let mut y = x;
    let mut entry = 0usize;
    while !fd.in_petal(y.z, fd.eta) {
        if entry >= budget {
            return Err(BasinError::NotInPetal(0));
        }
        y = f.eval(y).map_err(|_| BasinError::NotInPetal(0))?;
        entry += 1;
    }
    fatou_in_sector(f, fd, y, budget).map(|v| v + entry as f64)
}

fn fatou_in_sector<M: PlaneMap>(f: &M, fd: &FatouData, x: Point2, budget: usize) -> Result<C64, BasinError> {
    let mut y = x;
    let mut samples: Vec<(C64, C64)> = Vec::new();
    let mut next_checkpoint = 1usize;
    let mut prev: Option<C64> = None;
    for n in 0..=budget {
        if n == next_checkpoint || n == 0 {
            let t = y.z.powi(fd.k as i32) * fd.k as f64;
            samples.push((t, fd.w(y.z) + n as f64));
            if samples.len() > 6 {
                samples.remove(0);
            }
            if samples.len() >= 2 {
                let est = neville_at_zero(&samples);
                if let Some(pv) = prev {
                    if (est - pv).norm() < 1e-10 * pv.norm().max(1.0) {
                        return Ok(est);
                    }
                }
                prev = Some(est);
            }
            if n > 0 {
                next_checkpoint *= 2;
            }
        }
        y = f.eval(y).map_err(|_| BasinError::NotInPetal(n + 1))?;
        if !fd.in_petal(y.z, 0.0) {
            return Err(BasinError::NotInPetal(n + 1));
        }
    }
    prev.ok_or(BasinError::NotInPetal(budget))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FibrationKind {
    StrongStable,
    Fatou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub winding: i64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t_star: [f64; 2],
    pub point: [[f64; 2]; 2],
    pub degree: i64,
    pub fibration: FibrationKind,
    pub cert: Certificate,
    /// |h'(t*)|.
    pub derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDisk {
    pub center: C64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub points: Vec<CriticalPoint>,
    /// Winding of h' on the search circle, when h is defined along all of it.
    pub boundary_count: Option<i64>,
    /// Sum of local degrees of the refined zeros.
    pub refined_count: i64,
    /// Squares [center, half side] where h could not be evaluated.
    pub holes: Vec<(C64, f64)>,
    /// Whether |Jac| < d⁻⁴ holds for the map (None for non-Hénon inputs).
    pub dissipative_hypothesis: Option<bool>,
}

/// h'(t) by central differences with a fixed step.
pub fn central_derivative<H: Fn(C64) -> Option<C64>>(h: &H, t: C64, step: f64) -> Option<C64> {
    let d = C64::new(step, 0.0);
    Some((h(t + d)? - h(t - d)?) / (2.0 * step))
}

fn square_winding<D: Fn(C64) -> Option<C64>>(dh: &D, center: C64, half: f64) -> Option<i64> {
    let corners = [
        center + C64::new(-half, -half),
        center + C64::new(half, -half),
        center + C64::new(half, half),
        center + C64::new(-half, half),
    ];
    crate::roots::winding_on_path(
        |s| {
            let side = ((s * 4.0).floor() as usize).min(3);
            let frac = s * 4.0 - side as f64;
            corners[side] + (corners[(side + 1) % 4] - corners[side]) * frac
        },
        dh,
        64,
    )
}

fn refine_zero<D: Fn(C64) -> Option<C64>>(dh: &D, start: C64, step: f64, tol: f64) -> Option<C64> {
    let mut t = start;
    for _ in 0..60 {
        let v = dh(t)?;
        let d = C64::new(step, 0.0);
        let dd = (dh(t + d)? - dh(t - d)?) / (2.0 * step);
        if dd.norm() == 0.0 {
            return None;
        }
        let dt = v / dd;
        t -= dt;
        if dt.norm() < 1e-14 * (1.0 + t.norm()) {
            break;
        }
    }
    let v = dh(t)?;
    (v.norm() < tol).then_some(t)
}

/// Zeros of h' in a disk, located by a quadtree of boundary windings,
/// refined by Newton and certified by a winding on a circle of radius [`CERT_RADIUS`].
pub fn critical_points_of<H, C>(
    h: &H,
    curve: &C,
    disk: &SearchDisk,
    tol: f64,
    fibration: FibrationKind,
) -> CriticalReport
where
    H: Fn(C64) -> Option<C64> + Sync,
    C: Fn(C64) -> Option<Point2> + Sync,
{
    let step = 1e-5 * disk.radius.max(1e-8);
    let dh = |t: C64| central_derivative(h, t, step);
    let boundary_count = winding_on_circle(&dh, disk.center, disk.radius, 256);
    let min_half = disk.radius / 64.0;
    let mut level: Vec<(C64, f64)> = vec![(disk.center, disk.radius)];
    let mut holes = Vec::new();
    let mut seeds: Vec<C64> = Vec::new();
    while !level.is_empty() {
        let results: Vec<(C64, f64, Option<i64>)> = level
            .par_iter()
            .map(|&(c, half)| (c, half, square_winding(&dh, c, half)))
            .collect();
        let mut next = Vec::new();
        for (c, half, w) in results {
            let dx = ((c.re - disk.center.re).abs() - half).max(0.0);
            let dy = ((c.im - disk.center.im).abs() - half).max(0.0);
            if dx.hypot(dy) > disk.radius {
                continue;
            }
            match w {
                Some(0) => {}
                Some(_) if half <= min_half => seeds.push(c),
                None if half <= min_half => holes.push((c, half)),
                _ => {
                    let q = half / 2.0;
                    for (dx, dy) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
                        next.push((c + C64::new(dx, dy), q));
                    }
                }
            }
        }
        level = next;
    }
    let refined: Vec<Option<C64>> = seeds.par_iter().map(|&s| refine_zero(&dh, s, step, tol)).collect();
    let mut zeros: Vec<C64> = Vec::new();
    for t in refined.into_iter().flatten() {
        if (t - disk.center).norm() < disk.radius && !zeros.iter().any(|z| (z - t).norm() < 1e-8) {
            zeros.push(t);
        }
    }
    zeros.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap_or(std::cmp::Ordering::Equal));
    let mut points = Vec::new();
    for t in zeros {
        let Some(winding) = winding_on_circle(&dh, t, CERT_RADIUS.min(disk.radius), 64) else { continue };
        if winding < 1 {
            continue;
        }
        let Some(x) = curve(t) else { continue };
        points.push(CriticalPoint {
            t_star: [t.re, t.im],
            point: x.to_pairs(),
            degree: winding,
            fibration,
            cert: Certificate { winding, radius: CERT_RADIUS.min(disk.radius) },
            derivative: dh(t).map(|v| v.norm()).unwrap_or(f64::NAN),
        });
    }
    // Zeros closer than the certification radius are counted together.
    let mut refined_count = 0;
    let mut counted: Vec<C64> = Vec::new();
    for p in &points {
        let t = C64::new(p.t_star[0], p.t_star[1]);
        if !counted.iter().any(|c| (c - t).norm() < CERT_RADIUS) {
            refined_count += p.degree;
            counted.push(t);
        }
    }
    CriticalReport { points, boundary_count, refined_count, holes, dissipative_hypothesis: None }
}

/// Critical points of the strong-stable fibration of a sink basin along Wᵘ(q).
pub fn critical_points(
    map: &HenonMap,
    lin: &SinkLinearization,
    series: &ManifoldSeries,
    disk: &SearchDisk,
    tol: f64,
    budget: usize,
) -> CriticalReport {
    let dyn_u = series.dynamics(map);
    let dyn_s = Iterate::forward(map, lin.sink.period);
    let curve = |t: C64| evaluate(series, t, &dyn_u).ok();
    let h = |t: C64| strong_stable_value(&dyn_s, lin, curve(t)?, budget).ok();
    let mut report = critical_points_of(&h, &curve, disk, tol, FibrationKind::StrongStable);
    let d = map.degree() as f64;
    report.dissipative_hypothesis = Some(map.jacobian().norm() < d.powi(-4));
    report
}
