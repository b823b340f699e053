//! Reduction of a semi-parabolic germ family to ρ_λx + x^{k+1} + O(x^{k+2}), b_λy + x·h.

use super::series::*;
use crate::jet::{Jet, Shape};
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficients below this are treated as zero when detecting k.
pub const DETECTION_TOL: f64 = 1e-9;
/// A change differing from the identity by less than this is not recorded; matches the
/// tolerance on killed coefficients, since rounding in long compositions reaches ~1e-14.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Factors of the a₁ product closer to 1 than this end the product.
pub const PRODUCT_TOL: f64 = 1e-16;
const BLOWUP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormalFormError {
    #[error("germ does not fix the origin for every λ")]
    NotFixed,
    #[error("multiplier at λ = 0 is {0}, not 1")]
    RhoNotOne(C64),
    #[error("k not determined within order {0}: all candidate terms vanish")]
    KUndetermined(usize),
    #[error("degenerate family at {0}: divisor vanishes identically in λ")]
    Degenerate(String),
    #[error("division blowup at {step}: coefficient {size:e}")]
    Blowup { step: String, size: f64 },
    #[error("k = {k} is not a multiple of q = {q}")]
    NotMultiple { k: usize, q: usize },
    #[error("jet error at {step}: {source}")]
    Jet { step: String, source: JetError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Diagonalize,
    StraightenStable,
    LinearizeStable,
    KillLinearY,
    KillTerm,
    Rescale,
}

/// One coordinate change: new = forward(old), old = inverse(new).
#[derive(Debug, Clone)]
pub struct ChangeStep {
    pub kind: StepKind,
    /// Power of x treated by a KillTerm step.
    pub power: usize,
    pub forward: (Jet, Jet),
    pub inverse: (Jet, Jet),
}

#[derive(Debug, Clone)]
pub struct NormalFormResult {
    pub k: usize,
    pub q: usize,
    pub nu: usize,
    pub chain: Vec<ChangeStep>,
    pub map: (Jet, Jet),
    pub rho: Jet,
    pub b: Jet,
    /// λ-orders that remain exact after divisions by series vanishing at λ = 0.
    pub lambda_order: usize,
    /// Largest coefficient that the normal form requires to vanish (or to equal 1).
    pub killed_max: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NormalFormOptions {
    /// Order of the root of unity absorbed before reduction (k must be a multiple of q).
    pub q: usize,
    pub detection_tol: f64,
}

impl Default for NormalFormOptions {
    fn default() -> Self {
        NormalFormOptions { q: 1, detection_tol: DETECTION_TOL }
    }
}

struct State {
    map: (Jet, Jet),
    chain: Vec<ChangeStep>,
    lost: usize,
}

fn jet_err(step: &str) -> impl Fn(JetError) -> NormalFormError + '_ {
    move |source| NormalFormError::Jet { step: step.to_string(), source }
}

fn is_identity(fx: &Jet, fy: &Jet) -> bool {
    let s = fx.shape;
    let dx = fx - &coordinate(s, 0);
    let dy = fy - &coordinate(s, 1);
    dx.max_abs() < IDENTITY_TOL && dy.max_abs() < IDENTITY_TOL
}

impl State {
    /// Conjugates by a change given through `forward` (new from old) and/or `inverse`.
    fn apply(
        &mut self,
        kind: StepKind,
        power: usize,
        forward: Option<(Jet, Jet)>,
        inverse: Option<(Jet, Jet)>,
    ) -> Result<(), NormalFormError> {
        let name = format!("{kind:?}");
        let (fwd, inv) = match (forward, inverse) {
            (Some(f), Some(i)) => (f, i),
            (Some(f), None) => {
                let i = invert_change(&f.0, &f.1).map_err(jet_err(&name))?;
                (f, i)
            }
            (None, Some(i)) => {
                let f = invert_change(&i.0, &i.1).map_err(jet_err(&name))?;
                (f, i)
            }
            (None, None) => return Ok(()),
        };
        if is_identity(&fwd.0, &fwd.1) {
            return Ok(());
        }
        let size = fwd.0.max_abs().max(fwd.1.max_abs()).max(inv.0.max_abs()).max(inv.1.max_abs());
        if !(size < BLOWUP) {
            return Err(NormalFormError::Blowup { step: name, size });
        }
        let (f1, f2) = &self.map;
        let a = compose(f1, &inv.0, &inv.1).map_err(jet_err(&name))?;
        let b = compose(f2, &inv.0, &inv.1).map_err(jet_err(&name))?;
        let g1 = compose(&fwd.0, &a, &b).map_err(jet_err(&name))?;
        let g2 = compose(&fwd.1, &a, &b).map_err(jet_err(&name))?;
        self.map = (g1, g2);
        self.chain.push(ChangeStep { kind, power, forward: fwd, inverse: inv });
        Ok(())
    }
}

/// Substitutes y ↦ s·y in a series of (y, λ).
fn scale_y(f: &Jet, s: &Jet) -> Jet {
    let shape = f.shape;
    let mut out = Jet::zero(shape);
    let mut pw = Jet::constant(shape, C64::new(1.0, 0.0));
    for j in 0..=shape.degs[1] {
        if j > 0 {
            pw = pw.mul_jet(s);
        }
        let mut slice = Jet::zero(shape);
        for m in 0..=shape.degs[2] {
            slice.set(0, 0, m, f.coeff(0, j, m));
        }
        if slice.max_abs() == 0.0 {
            continue;
        }
        let mut yj = Jet::zero(shape);
        yj.set(0, j, 0, C64::new(1.0, 0.0));
        out = &out + &slice.mul_jet(&pw).mul_jet(&yj);
    }
    out
}

/// Newton iteration for the root near ρ₀ of t² − tr·t + det over λ-series.
fn eigen_series(tr: &Jet, det: &Jet, rho0: C64) -> Result<Jet, JetError> {
    let mut rho = Jet::constant(tr.shape, rho0);
    for _ in 0..tr.shape.degs[2] + 3 {
        let chi = &(&rho.mul_jet(&rho) - &tr.mul_jet(&rho)) + det;
        let dchi = &rho.scale(C64::new(2.0, 0.0)) - tr;
        rho = &rho - &chi.mul_jet(&lambda_recip(&dchi)?);
    }
    Ok(rho)
}

struct Pass {
    k: usize,
    chain: Vec<ChangeStep>,
    map: (Jet, Jet),
    rho: Jet,
    b: Jet,
    lost: usize,
}

/// Maximum number of pipeline passes; later passes remove roundoff left by earlier ones.
pub const MAX_PASSES: usize = 4;
/// Numerators of the λ-division below this are treated as identically zero.
const ZERO_NUMERATOR: f64 = 1e-15;

/// Reduces a germ family (F₁, F₂) fixing the origin, with multiplier ρ(0) = 1, to normal form.
///
/// The pipeline is repeated on its own output until a pass changes nothing, so the
/// result is a fixed point of the reduction; every pass is recorded in the chain.
pub fn reduce_normal_form(f1: &Jet, f2: &Jet, opts: &NormalFormOptions) -> Result<NormalFormResult, NormalFormError> {
    let nl = f1.shape.degs[2];
    let mut valid = nl;
    let mut chain = Vec::new();
    let mut cur = (f1.clone(), f2.clone());
    let mut first_k = None;
    let mut last = None;
    for _ in 0..MAX_PASSES {
        let p = reduce_pass(&cur.0, &cur.1, opts, valid)?;
        if *first_k.get_or_insert(p.k) != p.k {
            return Err(NormalFormError::KUndetermined(f1.shape.xy_total));
        }
        valid = valid.saturating_sub(p.lost);
        let done = p.chain.is_empty();
        chain.extend(p.chain);
        cur = (truncate_lambda(&p.map.0, valid), truncate_lambda(&p.map.1, valid));
        last = Some((p.rho, p.b));
        if done {
            break;
        }
    }
    let k = first_k.expect("at least one pass");
    let (rho, b) = last.expect("at least one pass");
    let (rho, b) = (truncate_lambda(&rho, valid), truncate_lambda(&b, valid));
    let killed_max = normal_form_defect(&cur, &rho, &b, k, valid);
    let q = opts.q.max(1);
    Ok(NormalFormResult { k, q, nu: k / q, chain, map: cur, rho, b, lambda_order: valid, killed_max })
}

/// Zeroes every coefficient of λ-degree above `order`.
pub fn truncate_lambda(f: &Jet, order: usize) -> Jet {
    let mut out = f.clone();
    for (i, j, m) in f.shape.monomials() {
        if m > order {
            out.set(i, j, m, C64::new(0.0, 0.0));
        }
    }
    out
}

fn reduce_pass(f1: &Jet, f2: &Jet, opts: &NormalFormOptions, valid: usize) -> Result<Pass, NormalFormError> {
    let shape = f1.shape;
    if !vanishes_at_origin(f1) || !vanishes_at_origin(f2) {
        return Err(NormalFormError::NotFixed);
    }
    let n = shape.xy_total;
    let nl = shape.degs[2];
    let tol = opts.detection_tol;
    let (ex, ey) = (coordinate(shape, 0), coordinate(shape, 1));
    let mut st = State { map: (f1.clone(), f2.clone()), chain: Vec::new(), lost: 0 };

    // Diagonalize the linear part.
    let [a11, a12, a21, a22] = linear_part(f1, f2);
    let tr = &a11 + &a22;
    let det = &a11.mul_jet(&a22) - &a12.mul_jet(&a21);
    let (t0, d0) = (at_zero(&tr), at_zero(&det));
    let disc = (t0 * t0 - d0 * 4.0).sqrt();
    let cands = [(t0 + disc) * 0.5, (t0 - disc) * 0.5];
    let rho0 = if (cands[0] - 1.0).norm() <= (cands[1] - 1.0).norm() { cands[0] } else { cands[1] };
    if (rho0 - 1.0).norm() > 1e-12 {
        return Err(NormalFormError::RhoNotOne(rho0));
    }
    let rho = eigen_series(&tr, &det, rho0).map_err(jet_err("eigenvalues"))?;
    let b = det.mul_jet(&lambda_recip(&rho).map_err(jet_err("eigenvalues"))?);
    let vr = if a21.max_abs() == 0.0 {
        Jet::zero(shape)
    } else {
        a21.mul_jet(&lambda_recip(&(&rho - &a22)).map_err(jet_err("Diagonalize"))?)
    };
    let vb = if a12.max_abs() == 0.0 {
        Jet::zero(shape)
    } else {
        a12.mul_jet(&lambda_recip(&(&b - &a11)).map_err(jet_err("Diagonalize"))?)
    };
    let h = (&ex + &vb.mul_jet(&ey), &vr.mul_jet(&ex) + &ey);
    st.apply(StepKind::Diagonalize, 1, None, Some(h))?;

    // Straighten the strong stable manifold x = s(y) to {x = 0}.
    let mut s = Jet::zero(shape);
    for j in 2..=n {
        let (g1, g2) = &st.map;
        let on_curve2 = compose(g2, &s, &ey).map_err(jet_err("StraightenStable"))?;
        let lhs = compose(g1, &s, &ey).map_err(jet_err("StraightenStable"))?;
        let rhs = compose(&s, &Jet::zero(shape), &on_curve2).map_err(jet_err("StraightenStable"))?;
        let e = &lhs - &rhs;
        let ej = lambda_coeff(&e, 0, j);
        let den = &rho - &b.powu(j as u32);
        let sj = (-&ej).mul_jet(&lambda_recip(&den).map_err(jet_err("StraightenStable"))?);
        for m in 0..=nl {
            s.set(0, j, m, sj.coeff(0, 0, m));
        }
    }
    st.apply(StepKind::StraightenStable, 1, Some((&ex - &s, ey.clone())), Some((&ex + &s, ey.clone())))?;

    // Linearize the dynamics on {x = 0}: g(φ(y)) = φ(b·y).
    let g = {
        let g2 = &st.map.1;
        let mut g = Jet::zero(shape);
        for (i, j, m) in shape.monomials() {
            if i == 0 {
                g.set(0, j, m, g2.coeff(0, j, m));
            }
        }
        g
    };
    let mut phi = ey.clone();
    let by = b.mul_jet(&ey);
    for j in 2..=n {
        let lhs = compose(&g, &Jet::zero(shape), &phi).map_err(jet_err("LinearizeStable"))?;
        let rhs = compose(&phi, &Jet::zero(shape), &by).map_err(jet_err("LinearizeStable"))?;
        let e = lambda_coeff(&(&lhs - &rhs), 0, j);
        let den = &b.powu(j as u32) - &b;
        let pj = e.mul_jet(&lambda_recip(&den).map_err(jet_err("LinearizeStable"))?);
        for m in 0..=nl {
            phi.set(0, j, m, pj.coeff(0, 0, m));
        }
    }
    st.apply(StepKind::LinearizeStable, 1, None, Some((ex.clone(), phi)))?;

    // Remove the y-dependence of the linear coefficient: x·∏ a₁(bⁿy).
    let rho_inv = lambda_recip(&rho).map_err(jet_err("KillLinearY"))?;
    let mut a1 = x_slice(&st.map.0, 1).mul_jet(&rho_inv);
    // a₁(λ, 0) = 1 after diagonalization; pin it so roundoff does not enter the product.
    for m in 0..=nl {
        a1.set(0, 0, m, C64::new(if m == 0 { 1.0 } else { 0.0 }, 0.0));
    }
    let mut prod = Jet::constant(shape, C64::new(1.0, 0.0));
    let mut bn = Jet::constant(shape, C64::new(1.0, 0.0));
    for _ in 0..10_000 {
        let factor = scale_y(&a1, &bn);
        let dev = factor.add_const(C64::new(-1.0, 0.0)).max_abs();
        if dev < PRODUCT_TOL {
            break;
        }
        prod = prod.mul_jet(&factor);
        bn = bn.mul_jet(&b);
    }
    let prod_inv = prod.recip().ok_or(NormalFormError::Degenerate("KillLinearY".into()))?;
    st.apply(
        StepKind::KillLinearY,
        1,
        Some((ex.mul_jet(&prod), ey.clone())),
        Some((ex.mul_jet(&prod_inv), ey.clone())),
    )?;

    // Kill xʲ terms for 2 ≤ j ≤ k and the y-dependence of x^{k+1}.
    let mut k = None;
    for j in 2..=n {
        let aj = x_slice(&st.map.0, j);
        let mut beta = Jet::zero(shape);
        for m in 1..=shape.degs[1] {
            let am = lambda_coeff(&aj, 0, m);
            if am.max_abs() == 0.0 {
                continue;
            }
            let den = &rho - &rho.powu(j as u32).mul_jet(&b.powu(m as u32));
            let bm = am.mul_jet(&lambda_recip(&den).map_err(jet_err("KillTerm"))?);
            for l in 0..=nl {
                beta.set(0, m, l, bm.coeff(0, 0, l));
            }
        }
        let a0 = truncate_lambda(&lambda_coeff(&aj, 0, 0), valid);
        let found = at_zero(&a0).norm() > tol;
        if !found && a0.max_abs() > ZERO_NUMERATOR {
            let den = &rho - &rho.powu(j as u32);
            let (q, v) = lambda_div(&a0, &den, 1e-300).map_err(|e| match e {
                JetError::ZeroDivisor(_) => NormalFormError::Degenerate(format!("KillTerm x^{j}")),
                other => NormalFormError::Jet { step: format!("KillTerm x^{j}"), source: other },
            })?;
            st.lost += v;
            for l in 0..=nl {
                beta.set(0, 0, l, q.coeff(0, 0, l));
            }
        }
        let xj = ex.powu(j as u32);
        st.apply(StepKind::KillTerm, j, Some((&ex + &beta.mul_jet(&xj), ey.clone())), None)?;
        if found {
            k = Some(j - 1);
            break;
        }
    }
    let k = k.ok_or(NormalFormError::KUndetermined(n))?;
    if k % opts.q.max(1) != 0 {
        return Err(NormalFormError::NotMultiple { k, q: opts.q });
    }

    // Rescale so that the x^{k+1} coefficient is 1.
    let lead = lambda_coeff(&st.map.0, k + 1, 0);
    let c = lambda_root(&lead, k).map_err(jet_err("Rescale"))?;
    let c_inv = lambda_recip(&c).map_err(jet_err("Rescale"))?;
    st.apply(StepKind::Rescale, k + 1, Some((ex.mul_jet(&c), ey.clone())), Some((ex.mul_jet(&c_inv), ey.clone())))?;

    Ok(Pass { k, chain: st.chain, map: st.map, rho, b, lost: st.lost })
}

/// Largest deviation from the normal form among λ-orders ≤ lambda_order.
pub fn normal_form_defect(map: &(Jet, Jet), rho: &Jet, b: &Jet, k: usize, lambda_order: usize) -> f64 {
    let (f1, f2) = map;
    let shape = f1.shape;
    let mut worst: f64 = 0.0;
    for (i, j, m) in shape.monomials() {
        if m > lambda_order {
            continue;
        }
        let v1 = f1.coeff(i, j, m);
        let expect1 = match (i, j) {
            (1, 0) => rho.coeff(0, 0, m),
            (e, 0) if e == k + 1 => C64::new(if m == 0 { 1.0 } else { 0.0 }, 0.0),
            _ => C64::new(0.0, 0.0),
        };
        let constrained1 = i == 0 || (i == 1) || (i <= k) || (i == k + 1);
        if constrained1 {
            worst = worst.max((v1 - expect1).norm());
        }
        let v2 = f2.coeff(i, j, m);
        let expect2 = if (i, j) == (0, 1) { b.coeff(0, 0, m) } else { C64::new(0.0, 0.0) };
        let constrained2 = i == 0 || (i, j) == (1, 0);
        if constrained2 {
            worst = worst.max((v2 - expect2).norm());
        }
    }
    worst
}

/// Builds a graded jet from (i, j, m, coefficient) terms.
pub fn jet_from_terms(shape: Shape, terms: &[(usize, usize, usize, C64)]) -> Jet {
    let mut f = Jet::zero(shape);
    for &(i, j, m, c) in terms {
        f.set(i, j, m, f.coeff(i, j, m) + c);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn family(terms1: &[(usize, usize, usize, f64)], terms2: &[(usize, usize, usize, f64)]) -> (Jet, Jet) {
        let s = Shape::graded(8, 4);
        let t1: Vec<_> = terms1.iter().map(|&(i, j, m, v)| (i, j, m, c(v))).collect();
        let t2: Vec<_> = terms2.iter().map(|&(i, j, m, v)| (i, j, m, c(v))).collect();
        (jet_from_terms(s, &t1), jet_from_terms(s, &t2))
    }

    #[test]
    fn prenormalized_input_gives_empty_chain() {
        let (f, g) = family(&[(1, 0, 0, 1.0), (1, 0, 1, 1.0), (2, 0, 0, 1.0)], &[(0, 1, 0, 0.5)]);
        let r = reduce_normal_form(&f, &g, &NormalFormOptions::default()).unwrap();
        assert_eq!(r.k, 1);
        assert!(r.chain.is_empty(), "{:?}", r.chain.iter().map(|s| s.kind).collect::<Vec<_>>());
        assert!(r.killed_max < 1e-12);
    }

    #[test]
    fn mixed_term_is_removed() {
        let (f, g) = family(
            &[(1, 0, 0, 1.0), (1, 0, 1, 1.0), (1, 1, 0, 1.0), (1, 1, 1, 1.0), (2, 0, 0, 1.0)],
            &[(0, 1, 0, 0.5), (2, 0, 0, 1.0)],
        );
        let r = reduce_normal_form(&f, &g, &NormalFormOptions::default()).unwrap();
        assert_eq!(r.k, 1);
        assert!(r.killed_max < 1e-12, "{}", r.killed_max);
        for m in 0..=r.lambda_order {
            assert!(r.map.0.coeff(1, 1, m).norm() < 1e-12);
        }
        let again = reduce_normal_form(&r.map.0, &r.map.1, &NormalFormOptions::default()).unwrap();
        let sizes: Vec<_> = again.chain.iter().map(|s| (s.kind, s.power, (&s.forward.0 - &coordinate(s.forward.0.shape, 0)).max_abs(), (&s.forward.1 - &coordinate(s.forward.0.shape, 1)).max_abs())).collect();
        assert!(again.chain.is_empty(), "{sizes:?}");
    }

    #[test]
    fn cubic_tangency_has_k_two() {
        let (f, g) = family(&[(1, 0, 0, 1.0), (1, 0, 1, 1.0), (3, 0, 0, 1.0)], &[(0, 1, 0, 0.3)]);
        let r = reduce_normal_form(&f, &g, &NormalFormOptions::default()).unwrap();
        assert_eq!(r.k, 2);
        assert!(r.killed_max < 1e-12);
    }

    #[test]
    fn constant_multiplier_is_degenerate() {
        let (f, g) = family(&[(1, 0, 0, 1.0), (2, 0, 1, 1.0), (3, 0, 0, 1.0)], &[(0, 1, 0, 0.3)]);
        let e = reduce_normal_form(&f, &g, &NormalFormOptions::default()).unwrap_err();
        assert!(matches!(e, NormalFormError::Degenerate(_)), "{e}");
    }

    #[test]
    fn flat_germ_leaves_k_undetermined() {
        let (f, g) = family(&[(1, 0, 0, 1.0), (1, 0, 1, 1.0)], &[(0, 1, 0, 0.3)]);
        let e = reduce_normal_form(&f, &g, &NormalFormOptions::default()).unwrap_err();
        assert_eq!(e, NormalFormError::KUndetermined(8));
    }

    #[test]
    fn multiplier_away_from_one_is_rejected() {
        let (f, g) = family(&[(1, 0, 0, 0.9), (2, 0, 0, 1.0)], &[(0, 1, 0, 0.3)]);
        assert!(matches!(
            reduce_normal_form(&f, &g, &NormalFormOptions::default()),
            Err(NormalFormError::RhoNotOne(_))
        ));
    }
}
