//! Escape-rate (Green) functions, slice rasters and the Hausdorff diagnostic.

use crate::family::{HenonMap, OVERFLOW_BOUND};
use crate::linalg::Point2;
use crate::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold below which a Green value counts as zero for K-membership.
pub const BOUNDED_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenResult {
    pub value: f64,
    pub escaped_at: Option<usize>,
    pub refined: bool,
}

impl GreenResult {
    fn bounded() -> Self {
        Self { value: 0.0, escaped_at: None, refined: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

fn step(map: &HenonMap, dir: Direction, x: Point2) -> Point2 {
    match dir {
        Direction::Forward => map.apply_raw(x),
        Direction::Backward => map.apply_inverse_raw(x),
    }
}

/// Leading coordinate (z forward, w backward) and the trailing one.
fn split(dir: Direction, x: Point2) -> (f64, f64) {
    match dir {
        Direction::Forward => (x.z.norm(), x.w.norm()),
        Direction::Backward => (x.w.norm(), x.z.norm()),
    }
}

fn green(map: &HenonMap, x: Point2, radius: f64, budget: usize, dir: Direction) -> GreenResult {
    let d = map.degree() as f64;
    let lead = match dir {
        Direction::Forward => map.forward_leading(),
        Direction::Backward => map.backward_leading(),
    };
    let mut p = x;
    let mut n = 0usize;
    loop {
        let (lead_abs, trail_abs) = split(dir, p);
        if lead_abs > radius && lead_abs >= trail_abs {
            break;
        }
        if n == budget {
            return GreenResult::bounded();
        }
        let q = step(map, dir, p);
        if !q.is_finite() || q.max_abs() > OVERFLOW_BOUND {
            // Leaving through the trailing coordinate; the next step would escape.
            let scale = d.powi(-(n as i32));
            let value = scale * p.max_abs().ln() + scale * lead.norm().ln() / (d - 1.0);
            return GreenResult { value: value.max(0.0), escaped_at: Some(n), refined: false };
        }
        p = q;
        n += 1;
    }
    let mut scale = d.powi(-(n as i32));
    let mut value = scale * split(dir, p).0.ln();
    let mut refined = false;
    for _ in 0..200 {
        let q = step(map, dir, p);
        let (q_lead, _) = split(dir, q);
        if !q.is_finite() || q.max_abs() > OVERFLOW_BOUND {
            value += scale * lead.norm().ln() / (d - 1.0);
            refined = true;
            break;
        }
        let inc = scale / d * (q_lead.ln() - d * split(dir, p).0.ln());
        value += inc;
        scale /= d;
        p = q;
        if inc.abs() < 1e-14 {
            refined = true;
            break;
        }
    }
    GreenResult { value: value.max(0.0), escaped_at: Some(n), refined }
}

/// Forward escape rate G⁺ at x.
pub fn green_plus(map: &HenonMap, x: Point2, escape_radius: f64, budget: usize) -> GreenResult {
    green(map, x, escape_radius, budget, Direction::Forward)
}

/// Backward escape rate G⁻ at x, computed along the inverse orbit.
pub fn green_minus(map: &HenonMap, x: Point2, escape_radius: f64, budget: usize) -> GreenResult {
    green(map, x, escape_radius, budget, Direction::Backward)
}

/// Affine embedding of a real rectangle into ℂ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub origin: Point2,
    pub dir_s: Point2,
    pub dir_t: Point2,
    pub s_range: (f64, f64),
    pub t_range: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl SliceSpec {
    /// The complex line {(ζ, ζ)} sampled over a square window of ζ.
    pub fn diagonal(half_width: f64, resolution: usize) -> Self {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        Self {
            origin: Point2::zero(),
            dir_s: Point2::new(one, one),
            dir_t: Point2::new(i, i),
            s_range: (-half_width, half_width),
            t_range: (-half_width, half_width),
            width: resolution,
            height: resolution,
        }
    }

    pub fn coords(&self, col: usize, row: usize) -> (f64, f64) {
        let frac = |k: usize, n: usize| if n > 1 { k as f64 / (n - 1) as f64 } else { 0.5 };
        let s = self.s_range.0 + (self.s_range.1 - self.s_range.0) * frac(col, self.width);
        let t = self.t_range.1 - (self.t_range.1 - self.t_range.0) * frac(row, self.height);
        (s, t)
    }

    /// Point of ℂ² at pixel (col, row); row 0 is the top edge t = t_max.
    pub fn point_at(&self, col: usize, row: usize) -> Point2 {
        let (s, t) = self.coords(col, row);
        self.origin + self.dir_s.scale(C64::new(s, 0.0)) + self.dir_t.scale(C64::new(t, 0.0))
    }

    pub fn is_valid(&self) -> bool {
        let det = self.dir_s.z * self.dir_t.w - self.dir_s.w * self.dir_t.z;
        let real_independent = {
            // Real independence over ℝ⁴: the two directions must not be real multiples.
            let n = self.dir_s.norm() * self.dir_t.norm();
            let overlap = self.dir_s.z.conj() * self.dir_t.z + self.dir_s.w.conj() * self.dir_t.w;
            n > 0.0 && (overlap.re.abs() < n * (1.0 - 1e-12))
        };
        self.width > 0 && self.height > 0 && (det.norm() > 0.0 || real_independent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelClass {
    /// Both G⁺ and G⁻ below the threshold: a budgeted member of K.
    Bounded,
    /// Bounded forward orbit only.
    ForwardBounded,
    Escaped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// G⁺ per pixel, row-major.
    pub values: Vec<f64>,
    pub classes: Vec<PixelClass>,
}

impl Raster {
    pub fn class_at(&self, col: usize, row: usize) -> PixelClass {
        self.classes[row * self.width + col]
    }

    pub fn value_at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Shades a slice by G⁺ and tags K-membership.
pub fn render_julia_slice(map: &HenonMap, slice: &SliceSpec, escape_radius: f64, budget: usize) -> Raster {
    let rows: Vec<Vec<(f64, PixelClass)>> = (0..slice.height)
        .into_par_iter()
        .map(|row| {
            (0..slice.width)
                .map(|col| {
                    let x = slice.point_at(col, row);
                    let gp = green_plus(map, x, escape_radius, budget);
                    if gp.value >= BOUNDED_THRESHOLD {
                        return (gp.value, PixelClass::Escaped);
                    }
                    let gm = green_minus(map, x, escape_radius, budget);
                    let class = if gm.value < BOUNDED_THRESHOLD {
                        PixelClass::Bounded
                    } else {
                        PixelClass::ForwardBounded
                    };
                    (gp.value, class)
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(slice.width * slice.height);
    let mut classes = Vec::with_capacity(slice.width * slice.height);
    for row in rows {
        for (v, c) in row {
            values.push(v);
            classes.push(c);
        }
    }
    Raster { width: slice.width, height: slice.height, values, classes }
}

/// Scale recorded next to a PGM raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmScale {
    pub min: f64,
    pub max: f64,
    pub gamma: f64,
}

/// Binary PGM ("P5", maxval 255) of an affine, gamma-corrected rescale of the values.
pub fn encode_pgm(width: usize, height: usize, values: &[f64], gamma: f64) -> (Vec<u8>, PgmScale) {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let min = finite.clone().fold(f64::INFINITY, f64::min);
    let max = finite.fold(f64::NEG_INFINITY, f64::max);
    let (min, max) = if min.is_finite() { (min, max) } else { (0.0, 0.0) };
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let span = max - min;
    out.extend(values.iter().map(|v| {
        if !v.is_finite() || span <= 0.0 {
            return 0u8;
        }
        let t = ((v - min) / span).clamp(0.0, 1.0).powf(gamma);
        (t * 255.0).round() as u8
    }));
    (out, PgmScale { min, max, gamma })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HausdorffError {
    #[error("Hausdorff distance needs two nonempty sets")]
    EmptySet,
}

/// Symmetric Hausdorff distance with the Euclidean norm of ℂ².
pub fn hausdorff_distance(a: &[Point2], b: &[Point2]) -> Result<f64, HausdorffError> {
    if a.is_empty() || b.is_empty() {
        return Err(HausdorffError::EmptySet);
    }
    let directed = |from: &[Point2], to: &[Point2]| {
        from.iter()
            .map(|p| to.iter().map(|q| (*p - *q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
