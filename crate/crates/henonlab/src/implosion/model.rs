//! Model families (1+u)z − 1 + η_u(z) and their skew extensions, including the one
//! obtained from a normal form through z = ρ^{k+1}/(kxᵏ), u = ρ^{−k} − 1.

use super::dd::Cdd;
use super::normal_form::NormalFormResult;
use super::series::{eval_lambda, invert_lambda_series, powi, JetError};
use crate::jet::Jet;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

fn fd_step(z: C64) -> f64 {
    1e-6 * z.norm().max(1.0)
}

/// A one-parameter family f_u(z) = (1+u)z − 1 + η_u(z) near z = ∞.
pub trait Family1d: Sync {
    /// Decay exponent γ = 1/k of η.
    fn gamma(&self) -> f64;
    fn eta(&self, u: C64, z: C64) -> C64;
    fn eta_z(&self, u: C64, z: C64) -> C64 {
        let h = fd_step(z);
        (self.eta(u, z + h) - self.eta(u, z - h)) / (2.0 * h)
    }
    /// η in double-double, when the family supports it.
    fn eta_dd(&self, _u: Cdd, _z: Cdd) -> Option<Cdd> {
        None
    }
    fn eta_z_dd(&self, _u: Cdd, _z: Cdd) -> Option<Cdd> {
        None
    }
    fn step(&self, u: C64, z: C64) -> C64 {
        (1.0 + u) * z - 1.0 + self.eta(u, z)
    }
    fn deriv(&self, u: C64, z: C64) -> C64 {
        1.0 + u + self.eta_z(u, z)
    }
}

/// A skew family (z, w) ↦ ((1+u)z − 1 + η_u(z, w), b_u·w + θ_u(z, w)).
pub trait Family2d: Sync {
    fn gamma(&self) -> f64;
    fn b(&self, u: C64) -> C64;
    fn eta(&self, u: C64, z: C64, w: C64) -> C64;
    fn theta(&self, u: C64, z: C64, w: C64) -> C64;
    fn eta_z(&self, u: C64, z: C64, w: C64) -> C64 {
        let h = fd_step(z);
        (self.eta(u, z + h, w) - self.eta(u, z - h, w)) / (2.0 * h)
    }
    fn eta_w(&self, u: C64, z: C64, w: C64) -> C64 {
        let h = 1e-6;
        (self.eta(u, z, w + h) - self.eta(u, z, w - h)) / (2.0 * h)
    }
    fn theta_z(&self, u: C64, z: C64, w: C64) -> C64 {
        let h = fd_step(z);
        (self.theta(u, z + h, w) - self.theta(u, z - h, w)) / (2.0 * h)
    }
    fn theta_w(&self, u: C64, z: C64, w: C64) -> C64 {
        let h = 1e-6;
        (self.theta(u, z, w + h) - self.theta(u, z, w - h)) / (2.0 * h)
    }
    fn step_dd(&self, _u: Cdd, _z: Cdd, _w: Cdd) -> Option<(Cdd, Cdd)> {
        None
    }
    fn step(&self, u: C64, z: C64, w: C64) -> (C64, C64) {
        ((1.0 + u) * z - 1.0 + self.eta(u, z, w), self.b(u) * w + self.theta(u, z, w))
    }
}

/// η(z) = Σ cⱼ z^{−j}, j ≥ 1, independent of u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalModel {
    /// cⱼ for j = 1, 2, …
    pub coeffs: Vec<C64>,
    pub gamma: f64,
}

impl RationalModel {
    pub fn linear() -> Self {
        RationalModel { coeffs: Vec::new(), gamma: 1.0 }
    }

    pub fn inverse_power(c: f64) -> Self {
        RationalModel { coeffs: vec![C64::new(c, 0.0)], gamma: 1.0 }
    }
}

impl Family1d for RationalModel {
    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn eta(&self, _u: C64, z: C64) -> C64 {
        let r = z.inv();
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| (acc + c) * r)
    }

    fn eta_z(&self, _u: C64, z: C64) -> C64 {
        let r = z.inv();
        let mut acc = C64::new(0.0, 0.0);
        for (j, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * r + c * (j as f64 + 1.0);
        }
        -acc * r * r
    }

    fn eta_dd(&self, _u: Cdd, z: Cdd) -> Option<Cdd> {
        let r = z.recip();
        Some(self.coeffs.iter().rev().fold(Cdd::ZERO, |acc, c| (acc + Cdd::from_c64(*c)) * r))
    }

    fn eta_z_dd(&self, _u: Cdd, z: Cdd) -> Option<Cdd> {
        let r = z.recip();
        let mut acc = Cdd::ZERO;
        for (j, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * r + Cdd::from_c64(*c * (j as f64 + 1.0));
        }
        Some(-(acc * r * r))
    }
}

/// ((1+u)z − 1 + Σcⱼz^{−j} + e·w/z, b·w + t/z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalSkewMap {
    pub eta: Vec<C64>,
    pub eta_w: C64,
    pub b: C64,
    pub theta: C64,
    pub gamma: f64,
}

impl RationalSkewMap {
    /// ((1+u)z − 1 + 0.5/z + 0.1w/z, 0.3w + 0.2/z).
    pub fn standard() -> Self {
        RationalSkewMap {
            eta: vec![C64::new(0.5, 0.0)],
            eta_w: C64::new(0.1, 0.0),
            b: C64::new(0.3, 0.0),
            theta: C64::new(0.2, 0.0),
            gamma: 1.0,
        }
    }

    fn one_dim(&self) -> RationalModel {
        RationalModel { coeffs: self.eta.clone(), gamma: self.gamma }
    }
}

impl Family2d for RationalSkewMap {
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn b(&self, _u: C64) -> C64 {
        self.b
    }
    fn eta(&self, u: C64, z: C64, w: C64) -> C64 {
        self.one_dim().eta(u, z) + self.eta_w * w / z
    }
    fn theta(&self, _u: C64, z: C64, _w: C64) -> C64 {
        self.theta / z
    }
    fn eta_z(&self, u: C64, z: C64, w: C64) -> C64 {
        self.one_dim().eta_z(u, z) - self.eta_w * w / (z * z)
    }
    fn eta_w(&self, _u: C64, z: C64, _w: C64) -> C64 {
        self.eta_w / z
    }
    fn theta_z(&self, _u: C64, z: C64, _w: C64) -> C64 {
        -self.theta / (z * z)
    }
    fn theta_w(&self, _u: C64, _z: C64, _w: C64) -> C64 {
        C64::new(0.0, 0.0)
    }
    fn step_dd(&self, u: Cdd, z: Cdd, w: Cdd) -> Option<(Cdd, Cdd)> {
        let r = z.recip();
        let eta = self.one_dim().eta_dd(u, z)? + Cdd::from_c64(self.eta_w) * w * r;
        let z1 = (Cdd::ONE + u) * z - Cdd::ONE + eta;
        let w1 = Cdd::from_c64(self.b) * w + Cdd::from_c64(self.theta) * r;
        Some((z1, w1))
    }
}

/// Ω_R = {|z| > R, arg z ∈ (−3π/8, 11π/8)}.
pub fn in_omega(z: C64, radius: f64) -> bool {
    let a = z.arg();
    z.norm() > radius && !(-5.0 * PI / 8.0..=-3.0 * PI / 8.0).contains(&a)
}

/// Incoming sector arg z ∈ (3π/4, 5π/4).
pub fn in_incoming_sector(z: C64) -> bool {
    z.arg().abs() > 0.75 * PI
}

/// Outgoing sector arg z ∈ (−π/4, π/4).
pub fn in_outgoing_sector(z: C64) -> bool {
    z.arg().abs() < 0.25 * PI
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("u(λ) = ρ^(−k) − 1 has vanishing derivative at λ = 0")]
    ParameterDegenerate,
    #[error("series error: {0}")]
    Series(#[from] JetError),
    #[error("parameter Newton failed for u = {0}")]
    ParameterNewton(C64),
    #[error("η decay violated: fitted exponent {fitted} at worst sample z = {worst_z}")]
    DecayViolation { fitted: f64, worst_z: C64 },
}

/// The model family attached to a normal form.
#[derive(Debug, Clone)]
pub struct FatouModel {
    pub k: usize,
    pub map: (Jet, Jet),
    pub rho: Jet,
    pub b: Jet,
    /// u(λ) = ρ(λ)^{−k} − 1 as a λ-series.
    pub u_of_lambda: Jet,
    /// Inverse series λ(u).
    pub lambda_of_u: Jet,
}

/// Builds the model family of a normal form.
pub fn fatou_parameter_change(nf: &NormalFormResult) -> Result<FatouModel, ModelError> {
    let u = powi(&nf.rho, -(nf.k as i32))?.add_const(C64::new(-1.0, 0.0));
    if u.coeff(0, 0, 1).norm() < 1e-14 {
        return Err(ModelError::ParameterDegenerate);
    }
    let lambda_of_u = invert_lambda_series(&u)?;
    Ok(FatouModel { k: nf.k, map: nf.map.clone(), rho: nf.rho.clone(), b: nf.b.clone(), u_of_lambda: u, lambda_of_u })
}

impl FatouModel {
    /// λ with ρ(λ)^{−k} − 1 = u: series guess refined by Newton on the evaluated multiplier.
    pub fn lambda(&self, u: C64) -> Result<C64, ModelError> {
        let k = self.k as i32;
        let drho = self.rho.derivative(2);
        let mut l = eval_lambda(&self.lambda_of_u, u);
        for _ in 0..50 {
            let rho = eval_lambda(&self.rho, l);
            let r = rho.powi(-k) - 1.0 - u;
            let dr = -(k as f64) * rho.powi(-k - 1) * eval_lambda(&drho, l);
            let step = r / dr;
            l -= step;
            if step.norm() <= 1e-16 * l.norm().max(1e-300) || r.norm() == 0.0 {
                return Ok(l);
            }
        }
        let r = eval_lambda(&self.rho, l).powi(-k) - 1.0 - u;
        if r.norm() <= 1e-13 * u.norm().max(1e-300) {
            Ok(l)
        } else {
            Err(ModelError::ParameterNewton(u))
        }
    }

    fn x_of_z(&self, z: C64, rho: C64) -> C64 {
        let k = self.k as f64;
        (rho.powu(self.k as u32 + 1) / (k * z)).powf(1.0 / k)
    }

    fn z_of_x(&self, x: C64, rho: C64) -> C64 {
        rho.powu(self.k as u32 + 1) / (self.k as f64 * x.powu(self.k as u32))
    }

    fn pair(&self, u: C64, z: C64, w: C64) -> (C64, C64) {
        let l = self.lambda(u).unwrap_or(C64::new(f64::NAN, f64::NAN));
        let rho = eval_lambda(&self.rho, l);
        let x = self.x_of_z(z, rho);
        let x1 = self.map.0.eval(x, w, l);
        let y1 = self.map.1.eval(x, w, l);
        let z1 = self.z_of_x(x1, rho);
        (z1 - (1.0 + u) * z + 1.0, y1 - eval_lambda(&self.b, l) * w)
    }
}

impl Family1d for FatouModel {
    fn gamma(&self) -> f64 {
        1.0 / self.k as f64
    }
    fn eta(&self, u: C64, z: C64) -> C64 {
        self.pair(u, z, C64::new(0.0, 0.0)).0
    }
}

impl Family2d for FatouModel {
    fn gamma(&self) -> f64 {
        1.0 / self.k as f64
    }
    fn b(&self, u: C64) -> C64 {
        match self.lambda(u) {
            Ok(l) => eval_lambda(&self.b, l),
            Err(_) => C64::new(f64::NAN, f64::NAN),
        }
    }
    fn eta(&self, u: C64, z: C64, w: C64) -> C64 {
        self.pair(u, z, w).0
    }
    fn theta(&self, u: C64, z: C64, w: C64) -> C64 {
        self.pair(u, z, w).1
    }
}

/// Sampled bound |η_u(z, w)| ≤ M/|z|^γ on Ω_{R₀} × 𝔻_s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub m_const: f64,
    /// Slope of log max|η| against log |z| across rings.
    pub fitted_exponent: f64,
    pub worst_z: C64,
    pub worst_w: C64,
    pub samples: usize,
}

/// Samples η on rings |z| = R₀·2^i (i < rings) inside Ω, with w on |w| ∈ {0, s}.
pub fn decay_report<F: Fn(C64, C64) -> C64>(eta: F, gamma: f64, r0: f64, s: f64, rings: usize) -> DecayReport {
    let angles = 48;
    let mut m_const: f64 = 0.0;
    let (mut worst_z, mut worst_w) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut logs = Vec::new();
    let mut samples = 0;
    for i in 0..rings {
        let r = r0 * 2f64.powi(i as i32 + 1);
        let mut ring_max: f64 = 0.0;
        for a in 0..angles {
            let t = -3.0 * PI / 8.0 + (a as f64 + 0.5) / angles as f64 * 1.75 * PI;
            let z = C64::from_polar(r, t);
            for w in [C64::new(0.0, 0.0), C64::new(s, 0.0), C64::new(0.0, s), C64::new(-s, 0.0)] {
                let v = eta(z, w).norm();
                samples += 1;
                ring_max = ring_max.max(v);
                let scaled = v * r.powf(gamma);
                if scaled > m_const || !scaled.is_finite() {
                    m_const = if scaled.is_finite() { scaled } else { f64::INFINITY };
                    worst_z = z;
                    worst_w = w;
                }
            }
        }
        logs.push((r.ln(), ring_max.max(1e-300).ln()));
    }
    let nn = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / nn;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / nn;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    DecayReport { m_const, fitted_exponent: sxy / sxx, worst_z, worst_w, samples }
}

/// Checks that the fitted decay is at least γ − 0.1 and that M is finite.
pub fn check_decay(report: &DecayReport, gamma: f64) -> Result<(), ModelError> {
    if !report.m_const.is_finite() || report.fitted_exponent > -gamma + 0.1 {
        return Err(ModelError::DecayViolation { fitted: report.fitted_exponent, worst_z: report.worst_z });
    }
    Ok(())
}
