//! Transit parameters: u near −2πi/n with f_uⁿ(z^ι) = z^o, certified by winding on Wₙ.

use super::dd::Cdd;
use super::model::{in_incoming_sector, in_omega, in_outgoing_sector, Family1d};
use crate::roots::winding_on_circle;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Bound on |∏f' − 1| along a transit orbit.
pub const DERIVATIVE_BOUND: f64 = 0.2;
const WINDING_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransitError {
    #[error("no root in Wₙ (winding {winding:?}); minimum feasible n ≈ {min_n:.0}")]
    NoRootInWindow { winding: Option<i64>, min_n: f64 },
    #[error("n = {n} is below the floor {floor}")]
    BelowFloor { n: usize, floor: usize },
    #[error("endpoint {0} lies outside its sector or Ω_R")]
    EndpointOutside(C64),
    #[error("orbit leaves Ω_R or violates the lower bound at index {0}")]
    ForbiddenRegionViolation(usize),
    #[error("|∏f' − 1| = {0} exceeds 1/5")]
    DerivativeBound(f64),
    #[error("backward Newton failed at step {0}")]
    BackwardNewtonFailure(usize),
    #[error("Newton on Wₙ did not converge (last |residual| = {0:e})")]
    NewtonFailure(f64),
    #[error("pullback failed: {0}")]
    Pullback(String),
}

/// The disk Wₙ = ball(−2πi/n, scale·n^{−1−γ/2}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: C64,
    pub radius: f64,
    /// Radius of the unscaled disk.
    pub proof_radius: f64,
}

impl Window {
    pub fn new(n: usize, gamma: f64, scale: f64) -> Self {
        let nf = n as f64;
        let proof_radius = nf.powf(-1.0 - gamma / 2.0);
        Window { center: C64::new(0.0, -2.0 * PI / nf), radius: scale * proof_radius, proof_radius }
    }

    pub fn contains(&self, u: C64) -> bool {
        (u - self.center).norm() <= self.radius
    }

    pub fn in_proof_window(&self, u: C64) -> bool {
        (u - self.center).norm() <= self.proof_radius
    }
}

/// Leading-order estimate of the smallest n whose window contains the root.
pub fn min_feasible_n(z_in: C64, z_out: C64, gamma: f64, scale: f64) -> f64 {
    let k = (C64::new(0.0, 2.0 * PI) * (z_out - z_in) - 2.0 * PI * PI).norm();
    (k / scale).powf(1.0 / (1.0 - gamma / 2.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTransit {
    pub u: C64,
    pub n: usize,
    pub winding: i64,
    pub window: Window,
    pub in_window: bool,
    /// |ℓ_uⁿ(z^ι) − z^o| re-evaluated in double-double.
    pub endpoint_error: f64,
}

/// Affine iterate ℓ_uⁿ(z) = (1+u)ⁿ(z − 1/u) + 1/u.
pub fn linear_iterate(u: C64, z: C64, n: usize) -> C64 {
    (1.0 + u).powu(n as u32) * (z - u.inv()) + u.inv()
}

/// Solves ℓ_uⁿ(z^ι) = z^o for u in Wₙ.
pub fn linear_transit(z_in: C64, z_out: C64, n: usize, gamma: f64, scale: f64) -> Result<LinearTransit, TransitError> {
    let window = Window::new(n, gamma, scale);
    let ratio = |u: C64| -> Option<C64> {
        let r = (1.0 + u).powu(n as u32) * (z_in - u.inv()) / (z_out - u.inv()) - 1.0;
        r.is_finite().then_some(r)
    };
    let winding = winding_on_circle(ratio, window.center, window.radius, WINDING_SAMPLES);
    if winding != Some(1) {
        return Err(TransitError::NoRootInWindow { winding, min_n: min_feasible_n(z_in, z_out, gamma, scale) });
    }
    let mut u = window.center;
    let nn = n as f64;
    for _ in 0..100 {
        let p = (1.0 + u).powu(n as u32 - 1);
        let e = p * (1.0 + u) * (z_in - u.inv()) + u.inv() - z_out;
        let de = nn * p * (z_in - u.inv()) + (p * (1.0 + u) - 1.0) / (u * u);
        let step = e / de;
        u -= step;
        if step.norm() <= 1e-16 * u.norm() {
            break;
        }
    }
    let endpoint_error = linear_endpoint_dd(u, z_in, z_out, n);
    Ok(LinearTransit { u, n, winding: 1, window, in_window: window.in_proof_window(u), endpoint_error })
}

fn linear_endpoint_dd(u: C64, z_in: C64, z_out: C64, n: usize) -> f64 {
    let a = Cdd::ONE + Cdd::from_c64(u);
    let mut z = Cdd::from_c64(z_in);
    for _ in 0..n {
        z = a * z - Cdd::ONE;
    }
    (z - Cdd::from_c64(z_out)).norm()
}

/// Problem data shared by the 1D and 2D solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitProblem {
    pub z_in: C64,
    pub z_out: C64,
    pub n: usize,
    /// Radius R of Ω_R.
    pub radius: f64,
    /// Bound constant M for |η_u| ≤ M/|z|^γ, when measured.
    pub m_const: Option<f64>,
    /// Wₙ radius as a multiple of n^{−1−γ/2}.
    pub window_scale: f64,
    pub n_floor: usize,
}

impl TransitProblem {
    pub fn new(z_in: C64, z_out: C64, n: usize) -> Self {
        TransitProblem { z_in, z_out, n, radius: 1.0, m_const: None, window_scale: 1.0, n_floor: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub winding: i64,
    pub forbidden_ok: bool,
    pub derivative_ok: bool,
}

/// Independent re-check at double-double precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub endpoint_error: f64,
    pub forbidden_ok: bool,
    pub derivative_product: C64,
    pub derivative_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitSolution {
    pub u: C64,
    pub n: usize,
    pub endpoint_error: f64,
    pub derivative_product: C64,
    pub certificates: Certificates,
    pub in_window: bool,
    pub window: Window,
    /// First orbit index breaking Ω_R membership or the lower bound.
    pub forbidden_index: Option<usize>,
    /// Residual of the leaf-membership condition (2D only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership_residual: Option<f64>,
    /// Fitted vertical contraction log-rate (2D only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_rate: Option<f64>,
    pub verification: Option<Verification>,
    #[serde(skip)]
    pub orbit: Vec<C64>,
}

impl TransitSolution {
    /// Errors unless every certificate and its verification hold.
    pub fn require_certified(&self) -> Result<(), TransitError> {
        if self.certificates.winding != 1 {
            return Err(TransitError::NoRootInWindow { winding: Some(self.certificates.winding), min_n: f64::NAN });
        }
        if let Some(i) = self.forbidden_index {
            return Err(TransitError::ForbiddenRegionViolation(i));
        }
        if !self.certificates.derivative_ok {
            return Err(TransitError::DerivativeBound((self.derivative_product - 1.0).norm()));
        }
        Ok(())
    }

    /// Orbit as CSV lines "index,re,im".
    pub fn orbit_csv(&self) -> String {
        let mut s = String::from("index,re,im\n");
        for (i, z) in self.orbit.iter().enumerate() {
            s.push_str(&format!("{i},{:.17e},{:.17e}\n", z.re, z.im));
        }
        s
    }
}

/// Lower bound on |z_j| along the orbit: min(|z₀|/2 + j/10, n/10) from the nearer endpoint.
pub fn orbit_lower_bound(z_in: C64, z_out: C64, n: usize, j: usize) -> f64 {
    let cap = n as f64 / 10.0;
    let l = n / 2;
    if j <= l {
        (z_in.norm() / 2.0 + j as f64 / 10.0).min(cap)
    } else {
        (z_out.norm() / 2.0 + (n - j) as f64 / 10.0).min(cap)
    }
}

/// First index where the orbit leaves Ω_R or drops below the lower bound.
pub fn forbidden_index(orbit: &[C64], z_in: C64, z_out: C64, radius: f64) -> Option<usize> {
    let n = orbit.len() - 1;
    orbit
        .iter()
        .enumerate()
        .position(|(j, z)| !in_omega(*z, radius) || z.norm() < orbit_lower_bound(z_in, z_out, n, j))
}

/// Solves ζ with f_u(ζ) = target by Newton seeded at (target + 1)/(1+u).
pub fn backward_step<F: Family1d + ?Sized>(fam: &F, u: C64, target: C64) -> Option<C64> {
    let mut z = (target + 1.0) / (1.0 + u);
    for _ in 0..60 {
        let r = fam.step(u, z) - target;
        let step = r / fam.deriv(u, z);
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            let r = fam.step(u, z) - target;
            return (r.norm() <= 1e-11 * target.norm().max(1.0)).then_some(z);
        }
    }
    None
}

fn forward<F: Family1d + ?Sized>(fam: &F, u: C64, z0: C64, l: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(l + 1);
    let mut z = z0;
    out.push(z);
    for _ in 0..l {
        z = fam.step(u, z);
        out.push(z);
    }
    out
}

fn backward<F: Family1d + ?Sized>(fam: &F, u: C64, z0: C64, m: usize) -> Result<Vec<C64>, TransitError> {
    let mut out = Vec::with_capacity(m + 1);
    let mut z = z0;
    out.push(z);
    for j in 0..m {
        z = backward_step(fam, u, z).ok_or(TransitError::BackwardNewtonFailure(j))?;
        out.push(z);
    }
    Ok(out)
}

/// Newton on a scalar function of u with a central-difference derivative.
pub(crate) fn newton_on_window<D>(d: D, window: &Window, scale: f64) -> Result<C64, TransitError>
where
    D: Fn(C64) -> Option<C64>,
{
    let mut u = window.center;
    let h = window.radius * 1e-4;
    let mut last = f64::INFINITY;
    for _ in 0..80 {
        let r = d(u).ok_or(TransitError::NewtonFailure(last))?;
        last = r.norm();
        if last <= 1e-13 * scale {
            return Ok(u);
        }
        let dp = d(u + h).ok_or(TransitError::NewtonFailure(last))?;
        let dm = d(u - h).ok_or(TransitError::NewtonFailure(last))?;
        let step = r * (2.0 * h) / (dp - dm);
        u -= step;
        if step.norm() <= 1e-16 * u.norm() {
            return Ok(u);
        }
    }
    if last <= 1e-9 * scale {
        Ok(u)
    } else {
        Err(TransitError::NewtonFailure(last))
    }
}

pub(crate) fn check_endpoints(tp: &TransitProblem) -> Result<(), TransitError> {
    if tp.n < tp.n_floor {
        return Err(TransitError::BelowFloor { n: tp.n, floor: tp.n_floor });
    }
    if !in_incoming_sector(tp.z_in) || !in_omega(tp.z_in, tp.radius) {
        return Err(TransitError::EndpointOutside(tp.z_in));
    }
    if !in_outgoing_sector(tp.z_out) || !in_omega(tp.z_out, tp.radius) {
        return Err(TransitError::EndpointOutside(tp.z_out));
    }
    Ok(())
}

/// Solves f_u^l(z^ι) = f_u^{−m}(z^o), l = ⌊n/2⌋, m = n − l, for u in Wₙ.
pub fn transit_solve_1d<F: Family1d + ?Sized>(fam: &F, tp: &TransitProblem) -> Result<TransitSolution, TransitError> {
    check_endpoints(tp)?;
    let n = tp.n;
    let (l, m) = (n / 2, n - n / 2);
    let gamma = fam.gamma();
    let window = Window::new(n, gamma, tp.window_scale);
    let ends = |u: C64| -> Option<(C64, C64)> {
        let a = *forward(fam, u, tp.z_in, l).last()?;
        let b = *backward(fam, u, tp.z_out, m).ok()?.last()?;
        (a.is_finite() && b.is_finite()).then_some((a, b))
    };
    let ratio = |u: C64| -> Option<C64> {
        let (a, b) = ends(u)?;
        Some((a - u.inv()) / (b - u.inv()) - 1.0)
    };
    let winding = winding_on_circle(ratio, window.center, window.radius, WINDING_SAMPLES);
    if winding != Some(1) {
        return Err(TransitError::NoRootInWindow {
            winding,
            min_n: min_feasible_n(tp.z_in, tp.z_out, gamma, tp.window_scale),
        });
    }
    let scale = tp.z_out.norm().max(tp.z_in.norm()).max(1.0);
    let u = newton_on_window(|u| ends(u).map(|(a, b)| a - b), &window, scale)?;
    let fwd = forward(fam, u, tp.z_in, l);
    let bwd = backward(fam, u, tp.z_out, m)?;
    let mut orbit = fwd.clone();
    orbit.extend(bwd.iter().rev().skip(1));
    let full = forward(fam, u, tp.z_in, n);
    let endpoint_error = (full[n] - tp.z_out).norm();
    let derivative_product = orbit[..n].iter().fold(C64::new(1.0, 0.0), |acc, z| acc * fam.deriv(u, *z));
    let forbidden = forbidden_index(&orbit, tp.z_in, tp.z_out, tp.radius);
    let verification = verify_1d(fam, u, tp);
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
        membership_residual: None,
        contraction_rate: None,
        verification,
        orbit,
    })
}

/// Re-iterates the orbit forward in double-double and rechecks every certificate.
pub fn verify_1d<F: Family1d + ?Sized>(fam: &F, u: C64, tp: &TransitProblem) -> Option<Verification> {
    let ud = Cdd::from_c64(u);
    let a = Cdd::ONE + ud;
    let mut z = Cdd::from_c64(tp.z_in);
    let mut orbit = Vec::with_capacity(tp.n + 1);
    let mut prod = Cdd::ONE;
    orbit.push(z.to_c64());
    for _ in 0..tp.n {
        prod = prod * (a + fam.eta_z_dd(ud, z)?);
        z = a * z - Cdd::ONE + fam.eta_dd(ud, z)?;
        orbit.push(z.to_c64());
    }
    let derivative_product = prod.to_c64();
    Some(Verification {
        endpoint_error: (z - Cdd::from_c64(tp.z_out)).norm(),
        forbidden_ok: forbidden_index(&orbit, tp.z_in, tp.z_out, tp.radius).is_none(),
        derivative_product,
        derivative_ok: (derivative_product - 1.0).norm() <= DERIVATIVE_BOUND,
    })
}

/// Solves many independent problems in parallel, preserving input order.
pub fn transit_grid<F: Family1d>(fam: &F, problems: &[TransitProblem]) -> Vec<Result<TransitSolution, TransitError>> {
    problems.par_iter().map(|tp| transit_solve_1d(fam, tp)).collect()
}
