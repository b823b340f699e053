//! Skew-family transit: pull the vertical leaf through p^o back m times and meet it
//! with the forward orbit of p^ι.

use super::model::{in_omega, Family2d};
use super::transit::{
    check_endpoints, forbidden_index, min_feasible_n, newton_on_window, Certificates, TransitError, TransitProblem,
    TransitSolution, Verification, Window, DERIVATIVE_BOUND,
};
use super::dd::Cdd;
use crate::roots::winding_on_circle;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default number of samples on |w| = s.
pub const GRAPH_SAMPLES: usize = 64;
/// Default slope bound for vertical graphs.
pub const SLOPE_BOUND: f64 = 0.01;

/// A vertical graph w ↦ z over 𝔻_s, stored as values on |w| = s and Taylor coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalGraph {
    pub s: f64,
    pub values: Vec<C64>,
    pub coeffs: Vec<C64>,
}

impl VerticalGraph {
    pub fn constant(z: C64, s: f64, samples: usize) -> Self {
        Self::from_values(vec![z; samples], s)
    }

    pub fn sample_point(s: f64, k: usize, samples: usize) -> C64 {
        C64::from_polar(s, 2.0 * PI * k as f64 / samples as f64)
    }

    /// Taylor coefficients aⱼ sⱼ = (1/N) Σ φ(w_k) e^{−2πijk/N}, j < N/2.
    pub fn from_values(values: Vec<C64>, s: f64) -> Self {
        let n = values.len();
        let coeffs = (0..n / 2)
            .map(|j| {
                let sum = values.iter().enumerate().fold(C64::new(0.0, 0.0), |acc, (k, v)| {
                    acc + v * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64)
                });
                sum / (n as f64 * s.powi(j as i32))
            })
            .collect();
        VerticalGraph { s, values, coeffs }
    }

    pub fn eval(&self, w: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * w + c)
    }

    pub fn deriv(&self, w: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * w + c * j as f64;
        }
        acc
    }

    /// max |φ'| on the sample circle, which bounds it on the disk.
    pub fn slope(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|k| self.deriv(Self::sample_point(self.s, k, n)).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pullback {
    pub graph: VerticalGraph,
    /// max |f_u(ψ(w), w)₁ − φ(f_u(ψ(w), w)₂)| over samples.
    pub residual: f64,
    pub slope: f64,
}

/// The graph ψ with f_u(ψ(w), w) on the graph φ, solved per sample by Newton.
pub fn graph_transform_pullback<F: Family2d + ?Sized>(
    fam: &F,
    u: C64,
    graph: &VerticalGraph,
    radius: f64,
    slope_bound: f64,
) -> Result<Pullback, TransitError> {
    if graph.slope() > slope_bound {
        return Err(TransitError::Pullback(format!("input slope {} exceeds {slope_bound}", graph.slope())));
    }
    let n = graph.values.len();
    let s = graph.s;
    let b = fam.b(u);
    let mut values = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    for k in 0..n {
        let w = VerticalGraph::sample_point(s, k, n);
        let mut z = (graph.eval(b * w) + 1.0) / (1.0 + u);
        let mut done = false;
        for _ in 0..60 {
            let (z1, w1) = fam.step(u, z, w);
            let h = z1 - graph.eval(w1);
            let dh = 1.0 + u + fam.eta_z(u, z, w) - graph.deriv(w1) * fam.theta_z(u, z, w);
            let step = h / dh;
            z -= step;
            if !z.is_finite() {
                break;
            }
            if step.norm() <= 1e-15 * z.norm().max(1.0) {
                done = true;
                break;
            }
        }
        if !done {
            return Err(TransitError::Pullback(format!("Newton failed at w = {w}")));
        }
        if !in_omega(z, radius) {
            return Err(TransitError::Pullback(format!("preimage {z} outside Ω_R")));
        }
        let (z1, w1) = fam.step(u, z, w);
        if w1.norm() >= s {
            return Err(TransitError::Pullback(format!("image w = {w1} leaves the disk")));
        }
        residual = residual.max((z1 - graph.eval(w1)).norm());
        values.push(z);
    }
    let out = VerticalGraph::from_values(values, s);
    let slope = out.slope();
    if slope > slope_bound {
        return Err(TransitError::Pullback(format!("output slope {slope} exceeds {slope_bound}")));
    }
    Ok(Pullback { graph: out, residual, slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitProblem2d {
    pub base: TransitProblem,
    pub w_in: C64,
    /// Radius s of the vertical disk.
    pub s: f64,
    pub samples: usize,
    pub slope_bound: f64,
}

impl TransitProblem2d {
    pub fn new(z_in: C64, w_in: C64, z_out: C64, n: usize) -> Self {
        TransitProblem2d {
            base: TransitProblem::new(z_in, z_out, n),
            w_in,
            s: 1.0,
            samples: GRAPH_SAMPLES,
            slope_bound: SLOPE_BOUND,
        }
    }
}

fn pulled_leaf<F: Family2d + ?Sized>(fam: &F, u: C64, tp: &TransitProblem2d, m: usize) -> Result<Vec<VerticalGraph>, TransitError> {
    let mut graphs = vec![VerticalGraph::constant(tp.base.z_out, tp.s, tp.samples)];
    for _ in 0..m {
        let p = graph_transform_pullback(fam, u, graphs.last().unwrap(), tp.base.radius, tp.slope_bound)?;
        graphs.push(p.graph);
    }
    Ok(graphs)
}

fn forward<F: Family2d + ?Sized>(fam: &F, u: C64, z: C64, w: C64, l: usize) -> Vec<(C64, C64)> {
    let mut out = vec![(z, w)];
    for _ in 0..l {
        let (z, w) = *out.last().unwrap();
        out.push(fam.step(u, z, w));
    }
    out
}

/// Solves for u such that f_u^l(p^ι) lies on the m-fold pullback of the leaf {z = z^o}.
pub fn transit_solve_2d<F: Family2d + ?Sized>(fam: &F, tp: &TransitProblem2d) -> Result<TransitSolution, TransitError> {
    check_endpoints(&tp.base)?;
    if tp.w_in.norm() >= tp.s {
        return Err(TransitError::EndpointOutside(tp.w_in));
    }
    let n = tp.base.n;
    let (l, m) = (n / 2, n - n / 2);
    let gamma = fam.gamma();
    let window = Window::new(n, gamma, tp.base.window_scale);
    let ends = |u: C64| -> Option<(C64, C64)> {
        let (z, w) = *forward(fam, u, tp.base.z_in, tp.w_in, l).last()?;
        if w.norm() >= tp.s || !z.is_finite() {
            return None;
        }
        let leaf = pulled_leaf(fam, u, tp, m).ok()?;
        Some((z, leaf[m].eval(w)))
    };
    let ratio = |u: C64| -> Option<C64> {
        let (a, b) = ends(u)?;
        Some((a - u.inv()) / (b - u.inv()) - 1.0)
    };
    let winding = winding_on_circle(ratio, window.center, window.radius, 32);
    if winding != Some(1) {
        return Err(TransitError::NoRootInWindow {
            winding,
            min_n: min_feasible_n(tp.base.z_in, tp.base.z_out, gamma, tp.base.window_scale),
        });
    }
    let scale = tp.base.z_out.norm().max(tp.base.z_in.norm()).max(1.0);
    let u = newton_on_window(|u| ends(u).map(|(a, b)| a - b), &window, scale)?;
    let leaf = pulled_leaf(fam, u, tp, m)?;
    let orbit2 = forward(fam, u, tp.base.z_in, tp.w_in, n);
    let (zl, wl) = orbit2[l];
    let membership_residual = (zl - leaf[m].eval(wl)).norm();
    let endpoint_error = (orbit2[n].0 - tp.base.z_out).norm();
    let orbit: Vec<C64> = orbit2.iter().map(|p| p.0).collect();
    let derivative_product = orbit2[..n]
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, &(z, w)| acc * (1.0 + u + fam.eta_z(u, z, w)));
    let forbidden = forbidden_index(&orbit, tp.base.z_in, tp.base.z_out, tp.base.radius);
    let contraction_rate = contraction_along_leaf(fam, u, &leaf, tp.s);
    let verification = verify_2d(fam, u, tp);
    Ok(TransitSolution {
        u,
        n,
        endpoint_error,
        derivative_product,
        certificates: Certificates {
            winding: 1,
            forbidden_ok: forbidden.is_none(),
            derivative_ok: (derivative_product - 1.0).norm() <= DERIVATIVE_BOUND,
        },
        in_window: window.in_proof_window(u),
        window,
        forbidden_index: forbidden,
        membership_residual: Some(membership_residual),
        contraction_rate: Some(contraction_rate),
        verification,
        orbit,
    })
}

/// Follows a point down the stored leaves (leaf m, m−1, …) and fits the slope of the
/// accumulated log|b + θ_w + θ_z·φ'| against the step index. Pushing a tangent vector
/// forward instead is unstable, since the leaf direction is the contracted one.
pub fn contraction_along_leaf<F: Family2d + ?Sized>(fam: &F, u: C64, leaf: &[VerticalGraph], s: f64) -> f64 {
    let m = leaf.len() - 1;
    let mut w = C64::new(0.5 * s, 0.0);
    let mut acc = 0.0;
    let mut pts = Vec::with_capacity(m + 1);
    for j in 0..=m {
        pts.push((j as f64, acc));
        if j == m {
            break;
        }
        let g = &leaf[m - j];
        let z = g.eval(w);
        let c = fam.b(u) + fam.theta_w(u, z, w) + fam.theta_z(u, z, w) * g.deriv(w);
        acc += c.norm().ln();
        w = fam.step(u, z, w).1;
    }
    let nn = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nn;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nn;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Re-iterates p^ι forward n times in double-double.
pub fn verify_2d<F: Family2d + ?Sized>(fam: &F, u: C64, tp: &TransitProblem2d) -> Option<Verification> {
    let ud = Cdd::from_c64(u);
    let (mut z, mut w) = (Cdd::from_c64(tp.base.z_in), Cdd::from_c64(tp.w_in));
    let mut orbit = vec![z.to_c64()];
    let mut prod = C64::new(1.0, 0.0);
    for _ in 0..tp.base.n {
        prod *= 1.0 + u + fam.eta_z(u, z.to_c64(), w.to_c64());
        let (z1, w1) = fam.step_dd(ud, z, w)?;
        z = z1;
        w = w1;
        orbit.push(z.to_c64());
    }
    Some(Verification {
        endpoint_error: (z - Cdd::from_c64(tp.base.z_out)).norm(),
        forbidden_ok: forbidden_index(&orbit, tp.base.z_in, tp.base.z_out, tp.base.radius).is_none(),
        derivative_product: prod,
        derivative_ok: (prod - 1.0).norm() <= DERIVATIVE_BOUND,
    })
}
