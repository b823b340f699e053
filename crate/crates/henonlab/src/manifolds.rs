//! Power-series parameterizations ψ of stable and unstable manifolds of saddle
//! cycles, with F(ψ(t)) = ψ(κt) for F = fⁿ (unstable) or F = f⁻ⁿ (stable).

use crate::family::{Escaped, HenonMap};
use crate::jet::{Jet, Shape};
use crate::linalg::Point2;
use crate::maps::{Iterate, PlaneMap};
use crate::periodic::{OrbitType, PeriodicOrbit};
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Tail bound defining the validity radius.
pub const TAIL_BOUND: f64 = 1e-10;
/// Largest admissible ‖(DF_p − κʲI)⁻¹‖.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Samples per circle in the Wiman search.
pub const WIMAN_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldKind {
    Unstable,
    Stable,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("cycle is not a saddle ({0:?})")]
    NotSaddle(OrbitType),
    #[error("DF − κ^{order}·I is ill-conditioned (inverse norm {norm:e})")]
    IllConditioned { order: usize, norm: f64 },
    #[error("series composition became non-finite at order {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSeries {
    pub base: PeriodicOrbit,
    pub kind: ManifoldKind,
    /// Multiplier of the conjugacy: κ₁ for unstable, 1/κ₂ for stable.
    pub eigenvalue: C64,
    /// Unit eigenvector, equal to the first-order coefficient.
    pub direction: Point2,
    pub coefficients: Vec<Point2>,
    pub validity_radius: f64,
    /// Largest ‖(DF_p − κʲI)⁻¹‖ met while solving.
    pub max_condition: f64,
}

impl ManifoldSeries {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Truncated polynomial value Σ a_j tʲ.
    pub fn polynomial(&self, t: C64) -> Point2 {
        let mut acc = Point2::zero();
        for a in self.coefficients.iter().rev() {
            acc = acc.scale(t) + *a;
        }
        acc
    }

    /// The conjugated dynamics F for this series.
    pub fn dynamics<'a>(&self, map: &'a HenonMap) -> Iterate<'a> {
        match self.kind {
            ManifoldKind::Unstable => Iterate::forward(map, self.base.period),
            ManifoldKind::Stable => Iterate::backward(map, self.base.period),
        }
    }
}

/// Solves F(ψ(t)) = ψ(κt) order by order at a fixed point p of F.
pub fn series_from_dynamics<M: PlaneMap>(
    dynamics: &M,
    base: PeriodicOrbit,
    kind: ManifoldKind,
    kappa: C64,
    order: usize,
) -> Result<ManifoldSeries, ManifoldError> {
    let p = base.points[0];
    let a = dynamics.differential(p);
    let direction = a.eigenvector(kappa);
    let mut coefficients = vec![p, direction];
    let mut max_condition: f64 = 0.0;
    for j in 2..=order {
        let shape = Shape::univariate(j);
        let mut z = Jet::zero(shape);
        let mut w = Jet::zero(shape);
        for (i, c) in coefficients.iter().enumerate() {
            z.c[i] = c.z;
            w.c[i] = c.w;
        }
        let (fz, fw) = dynamics.eval_jet(&z, &w).ok_or(ManifoldError::NonFinite(j))?;
        let r = Point2::new(fz.c[j], fw.c[j]);
        let m = a.sub_scalar(kappa.powu(j as u32));
        let inv = m.inverse().ok_or(ManifoldError::IllConditioned { order: j, norm: f64::INFINITY })?;
        let norm = inv.norm();
        if !(norm <= CONDITION_LIMIT) {
            return Err(ManifoldError::IllConditioned { order: j, norm });
        }
        max_condition = max_condition.max(norm);
        let aj = inv.apply(-r);
        if !aj.is_finite() {
            return Err(ManifoldError::NonFinite(j));
        }
        coefficients.push(aj);
    }
    let validity_radius = validity_radius(&coefficients, kappa);
    Ok(ManifoldSeries { base, kind, eigenvalue: kappa, direction, coefficients, validity_radius, max_condition })
}

/// Largest r with Σ_{j > N/2} |a_j| rʲ < [`TAIL_BOUND`] whose Horner rounding
/// estimate 2N·u·Σ_j |a_j| (|κ|r)ʲ also stays below [`TAIL_BOUND`], so both sides
/// of F(ψ(t)) = ψ(κt) are accurate for |t| ≤ r. Capped at 1e12.
pub fn validity_radius(coefficients: &[Point2], kappa: C64) -> f64 {
    let n = coefficients.len() - 1;
    let k = kappa.norm().max(1.0);
    let rounding = 2.0 * n.max(1) as f64 * f64::EPSILON;
    let ok = |r: f64| -> bool {
        let tail: f64 = coefficients
            .iter()
            .enumerate()
            .skip(n / 2 + 1)
            .map(|(j, a)| a.norm() * r.powi(j as i32))
            .sum();
        let size: f64 = coefficients
            .iter()
            .enumerate()
            .map(|(j, a)| a.norm() * (k * r).powi(j as i32))
            .sum();
        tail < TAIL_BOUND && rounding * size < TAIL_BOUND
    };
    let cap = 1e12;
    if ok(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (-300.0f64, cap.ln());
    if !ok(lo.exp()) {
        return lo.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.exp()
}

fn check_saddle(saddle: &PeriodicOrbit) -> Result<(), ManifoldError> {
    if saddle.kind == OrbitType::Saddle {
        Ok(())
    } else {
        Err(ManifoldError::NotSaddle(saddle.kind))
    }
}

/// Unstable-manifold series of a saddle cycle of fⁿ, with κ = κ₁.
pub fn unstable_series(map: &HenonMap, saddle: &PeriodicOrbit, order: usize) -> Result<ManifoldSeries, ManifoldError> {
    check_saddle(saddle)?;
    let dynamics = Iterate::forward(map, saddle.period);
    series_from_dynamics(&dynamics, saddle.clone(), ManifoldKind::Unstable, saddle.multipliers.0, order)
}

/// Stable-manifold series, built from f⁻ⁿ with κ = 1/κ₂.
pub fn stable_series(map: &HenonMap, saddle: &PeriodicOrbit, order: usize) -> Result<ManifoldSeries, ManifoldError> {
    check_saddle(saddle)?;
    let dynamics = Iterate::backward(map, saddle.period);
    series_from_dynamics(&dynamics, saddle.clone(), ManifoldKind::Stable, saddle.multipliers.1.inv(), order)
}

/// ψ(t) = F^m(ψ(t·κ^{−m})) with m minimal such that |t·κ^{−m}| ≤ r_valid.
pub fn evaluate<M: PlaneMap>(series: &ManifoldSeries, t: C64, dynamics: &M) -> Result<Point2, Escaped> {
    let mut s = t;
    let mut m = 0usize;
    while s.norm() > series.validity_radius {
        s /= series.eigenvalue;
        m += 1;
    }
    let mut x = series.polynomial(s);
    for step in 0..m {
        x = dynamics.eval(x).map_err(|e| Escaped { step, last: e.last })?;
    }
    Ok(x)
}

/// max |F(ψ(t)) − ψ(κt)| over `samples` points of the circle |t| = radius,
/// both sides evaluated from the truncated polynomial.
pub fn functional_residual<M: PlaneMap>(series: &ManifoldSeries, dynamics: &M, radius: f64, samples: usize) -> f64 {
    (0..samples)
        .map(|k| {
            let t = C64::from_polar(radius, 2.0 * PI * k as f64 / samples as f64);
            match dynamics.eval(series.polynomial(t)) {
                Ok(y) => (y - series.polynomial(t * series.eigenvalue)).norm(),
                Err(_) => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max)
}

/// log d / log|κ|.
pub fn theoretical_order(degree: usize, kappa: C64) -> f64 {
    (degree as f64).ln() / kappa.norm().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub radii: Vec<f64>,
    /// Running maximum of |first coordinate| on each circle.
    pub m1: Vec<f64>,
    /// Running maximum of |second coordinate| on each circle.
    pub m2: Vec<f64>,
    pub rho_hat: f64,
    pub rho_theory: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Index of the first radius dropped because of overflow.
    pub truncated_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSummary {
    pub rho_hat: f64,
    pub rho_theory: f64,
    pub residual: f64,
}

impl GrowthProfile {
    pub fn csv(&self) -> String {
        let mut out = String::from("r,M1,M2\n");
        for i in 0..self.m1.len() {
            out.push_str(&format!("{:e},{:e},{:e}\n", self.radii[i], self.m1[i], self.m2[i]));
        }
        out
    }

    pub fn summary(&self) -> GrowthSummary {
        GrowthSummary { rho_hat: self.rho_hat, rho_theory: self.rho_theory, residual: self.residual }
    }
}

/// Geometric radii from `start` to `end` with `per_decade` points per factor ten.
pub fn geometric_schedule(start: f64, end: f64, per_decade: usize) -> Vec<f64> {
    let count = ((end / start).log10() * per_decade as f64).round() as usize;
    (0..=count).map(|k| start * 10f64.powf(k as f64 / per_decade as f64)).collect()
}

/// Least-squares slope of log log M(r) against log r over the upper half of
/// the radii that did not overflow.
pub fn order_estimate<M: PlaneMap>(
    series: &ManifoldSeries,
    dynamics: &M,
    radii: &[f64],
    samples: usize,
) -> GrowthProfile {
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    let mut truncated_at = None;
    let (mut run1, mut run2) = (0.0f64, 0.0f64);
    for (idx, &r) in radii.iter().enumerate() {
        let values: Vec<Option<(f64, f64)>> = (0..samples)
            .into_par_iter()
            .map(|k| {
                let t = C64::from_polar(r, 2.0 * PI * k as f64 / samples as f64);
                evaluate(series, t, dynamics).ok().map(|x| (x.z.norm(), x.w.norm()))
            })
            .collect();
        if values.iter().any(|v| v.is_none()) {
            truncated_at = Some(idx);
            break;
        }
        for (a, b) in values.into_iter().flatten() {
            run1 = run1.max(a);
            run2 = run2.max(b);
        }
        m1.push(run1);
        m2.push(run2);
    }
    let pts: Vec<(f64, f64)> = m1
        .iter()
        .zip(&m2)
        .zip(radii)
        .filter_map(|((a, b), r)| {
            let big = a.max(*b);
            (big.ln() > 1.0).then(|| (r.ln(), big.ln().ln()))
        })
        .collect();
    let upper = &pts[pts.len() / 2..];
    let (slope, residual) = linear_fit(upper);
    GrowthProfile {
        radii: radii[..m1.len()].to_vec(),
        m1,
        m2,
        rho_hat: slope,
        rho_theory: theoretical_order(dynamics.degree(), series.eigenvalue),
        residual,
        truncated_at,
    }
}

/// Slope and RMS residual of the least-squares line through the points.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WimanCircle {
    pub radius: f64,
    /// Minimum over the circle of max(|z|, |w|); infinite when every sample escaped.
    pub min_modulus: f64,
    /// Angle of the minimizing sample.
    pub angle: f64,
}

/// Candidate radii: 10^{k/8} for k ≥ 0, independent of the search bound.
pub fn wiman_radii(r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let r = 10f64.powf(k as f64 / 8.0);
        if r > r_max {
            break;
        }
        out.push(r);
        k += 1;
    }
    out
}

fn circle_modulus<M: PlaneMap>(series: &ManifoldSeries, dynamics: &M, r: f64, theta: f64) -> f64 {
    match evaluate(series, C64::from_polar(r, theta), dynamics) {
        Ok(x) => x.max_abs(),
        Err(_) => f64::INFINITY,
    }
}

/// Circles |t| = r, r ≤ r_max, on which ψ stays outside the bidisk of radius `k_radius`.
pub fn wiman_circles<M: PlaneMap>(series: &ManifoldSeries, dynamics: &M, k_radius: f64, r_max: f64) -> Vec<WimanCircle> {
    let mut out = Vec::new();
    for r in wiman_radii(r_max) {
        let step = 2.0 * PI / WIMAN_SAMPLES as f64;
        let values: Vec<f64> = (0..WIMAN_SAMPLES)
            .into_par_iter()
            .map(|k| circle_modulus(series, dynamics, r, k as f64 * step))
            .collect();
        let (imin, &vmin) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let mut best = (vmin, imin as f64 * step);
        if vmin.is_finite() {
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = ((imin as f64 - 1.0) * step, (imin as f64 + 1.0) * step);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let mut fc = circle_modulus(series, dynamics, r, c);
            let mut fd = circle_modulus(series, dynamics, r, d);
            for _ in 0..60 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = circle_modulus(series, dynamics, r, c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = circle_modulus(series, dynamics, r, d);
                }
            }
            for (v, th) in [(fc, c), (fd, d)] {
                if v < best.0 {
                    best = (v, th);
                }
            }
        }
        if best.0 > k_radius {
            out.push(WimanCircle { radius: r, min_modulus: best.0, angle: best.1.rem_euclid(2.0 * PI) });
        }
    }
    out
}
