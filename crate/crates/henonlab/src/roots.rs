//! Polynomial root finding and winding numbers of sampled complex functions.

use crate::C64;
use std::f64::consts::PI;

/// All roots of Σ cₖ zᵏ (lowest degree first) by the Aberth–Ehrlich iteration.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |v| v.norm() == 0.0) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    if deg == 2 {
        let (a, b, cc) = (c[2], c[1], c[0]);
        let disc = (b * b - a * cc * 4.0).sqrt();
        let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) * 0.5 } else { -(b - disc) * 0.5 };
        if q.norm() == 0.0 {
            return vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        }
        return vec![q / a, cc / q];
    }
    let lead = c[deg];
    let monic: Vec<C64> = c.iter().map(|v| v / lead).collect();
    let bound = 1.0 + monic[..deg].iter().map(|v| v.norm()).fold(0.0, f64::max);
    let radius = bound.min(
        monic[..deg]
            .iter()
            .enumerate()
            .map(|(k, v)| v.norm().powf(1.0 / (deg - k) as f64))
            .fold(0.0, f64::max)
            * 2.0,
    );
    let radius = if radius > 0.0 { radius } else { 1.0 };
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(radius * 0.7, 2.0 * PI * k as f64 / deg as f64 + 0.4))
        .collect();
    let eval = |x: C64| -> (C64, C64) {
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for cf in monic.iter().rev() {
            d = d * x + v;
            v = v * x + cf;
        }
        (v, d)
    };
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..deg {
            let (v, d) = eval(z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    s += (z[i] - z[j]).inv();
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * s);
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_step < 1e-16 {
            break;
        }
    }
    z
}

/// Winding number of a closed curve sampled at `samples` (first point not repeated).
/// Returns None if the curve passes through zero.
pub fn winding_of_samples(samples: &[C64]) -> Option<i64> {
    if samples.is_empty() || samples.iter().any(|v| v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite()) {
        return None;
    }
    let mut total = 0.0;
    for k in 0..samples.len() {
        let a = samples[k];
        let b = samples[(k + 1) % samples.len()];
        total += (b / a).arg();
    }
    Some((total / (2.0 * PI)).round() as i64)
}

/// Winding number of f around 0 along the circle |t − center| = radius.
///
/// Sampling is refined until consecutive phase increments stay below π/4.
pub fn winding_on_circle<F>(f: F, center: C64, radius: f64, initial: usize) -> Option<i64>
where
    F: Fn(C64) -> Option<C64>,
{
    winding_on_path(|s| center + C64::from_polar(radius, 2.0 * PI * s), f, initial)
}

/// Winding number of f along a closed path γ(s), s ∈ [0, 1).
pub fn winding_on_path<G, F>(gamma: G, f: F, initial: usize) -> Option<i64>
where
    G: Fn(f64) -> C64,
    F: Fn(C64) -> Option<C64>,
{
    let n = initial.max(8);
    let mut params: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    let mut values: Vec<C64> = Vec::with_capacity(n);
    for s in &params {
        values.push(f(gamma(*s))?);
    }
    let mut total = 0.0;
    let mut i = 0;
    let mut budget = 200_000usize;
    while i < params.len() {
        let j = (i + 1) % params.len();
        let s_end = if j == 0 { 1.0 } else { params[j] };
        let a = values[i];
        let b = values[j];
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return None;
        }
        let inc = (b / a).arg();
        if inc.abs() > PI / 4.0 && s_end - params[i] > 1e-12 {
            if budget == 0 {
                return None;
            }
            budget -= 1;
            let mid = 0.5 * (params[i] + s_end);
            let v = f(gamma(mid))?;
            params.insert(i + 1, mid);
            values.insert(i + 1, v);
            continue;
        }
        total += inc;
        i += 1;
    }
    Some((total / (2.0 * PI)).round() as i64)
}
