//! Operations on (x, y, λ) jets used by the normal-form reduction.

use crate::jet::{Jet, Shape};
use crate::C64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("substituted series must vanish at x = y = 0 for every λ")]
    NonzeroConstant,
    #[error("linear part is not invertible at λ = 0")]
    SingularLinearPart,
    #[error("division by a λ-series vanishing to order {0}")]
    ZeroDivisor(usize),
    #[error("root of a λ-series with vanishing constant term")]
    RootOfZero,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// The (x, y, λ) jet equal to x (var 0) or y (var 1).
pub fn coordinate(shape: Shape, var: usize) -> Jet {
    Jet::variable(shape, var, zero())
}

/// True when f(0, 0, λ) ≡ 0.
pub fn vanishes_at_origin(f: &Jet) -> bool {
    (0..=f.shape.degs[2]).all(|m| f.coeff(0, 0, m).norm() == 0.0)
}

/// The coefficient of xⁱyʲ as a λ-series.
pub fn lambda_coeff(f: &Jet, i: usize, j: usize) -> Jet {
    let mut out = Jet::zero(f.shape);
    for m in 0..=f.shape.degs[2] {
        out.set(0, 0, m, f.coeff(i, j, m));
    }
    out
}

/// The coefficient of xⁱ as a series in (y, λ).
pub fn x_slice(f: &Jet, i: usize) -> Jet {
    let mut out = Jet::zero(f.shape);
    for (a, j, m) in f.shape.monomials() {
        if a == 0 {
            out.set(0, j, m, f.coeff(i, j, m));
        }
    }
    out
}

/// Value of a λ-series at λ = 0.
pub fn at_zero(l: &Jet) -> C64 {
    l.coeff(0, 0, 0)
}

/// Largest coefficient magnitude of a series.
pub fn sup(f: &Jet) -> f64 {
    f.max_abs()
}

/// f(X, Y, λ), exact on kept coefficients when X and Y vanish at x = y = 0.
pub fn compose(f: &Jet, x: &Jet, y: &Jet) -> Result<Jet, JetError> {
    if !vanishes_at_origin(x) || !vanishes_at_origin(y) {
        return Err(JetError::NonzeroConstant);
    }
    let shape = f.shape;
    let n = shape.xy_total.min(shape.degs[0].max(shape.degs[1]));
    let mut xp = vec![Jet::constant(shape, C64::new(1.0, 0.0))];
    for i in 1..=n {
        xp.push(xp[i - 1].mul_jet(x));
    }
    let mut out = Jet::zero(shape);
    let mut ypow = Jet::constant(shape, C64::new(1.0, 0.0));
    for j in 0..=shape.degs[1] {
        if j > 0 {
            ypow = ypow.mul_jet(y);
            if ypow.max_abs() == 0.0 {
                break;
            }
        }
        for (i, xpi) in xp.iter().enumerate() {
            let c = lambda_coeff(f, i, j);
            if c.max_abs() == 0.0 {
                continue;
            }
            out = &out + &c.mul_jet(&xpi.mul_jet(&ypow));
        }
    }
    Ok(out)
}

/// Reciprocal of a λ-series with nonzero constant term.
pub fn lambda_recip(l: &Jet) -> Result<Jet, JetError> {
    l.recip().ok_or(JetError::ZeroDivisor(0))
}

/// Order of vanishing at λ = 0 (None for the zero series), relative to `tol`.
pub fn lambda_valuation(l: &Jet, tol: f64) -> Option<usize> {
    (0..=l.shape.degs[2]).find(|&m| l.coeff(0, 0, m).norm() > tol)
}

fn shift_down(l: &Jet, by: usize) -> Jet {
    let mut out = Jet::zero(l.shape);
    for m in by..=l.shape.degs[2] {
        out.set(0, 0, m - by, l.coeff(0, 0, m));
    }
    out
}

/// a/b for λ-series (or series in (y, λ) divided by a λ-series). When b vanishes to order v at
/// λ = 0 the numerator must vanish to the same order; the top v λ-orders of the quotient are
/// then undetermined and returned as zero. The second value is v.
pub fn lambda_div(a: &Jet, b: &Jet, tol: f64) -> Result<(Jet, usize), JetError> {
    let v = lambda_valuation(b, tol).ok_or(JetError::ZeroDivisor(b.shape.degs[2] + 1))?;
    let shape = a.shape;
    let mut shifted = Jet::zero(shape);
    for (i, j, m) in shape.monomials() {
        if m < v {
            if a.coeff(i, j, m).norm() > tol {
                return Err(JetError::ZeroDivisor(v));
            }
            continue;
        }
        shifted.set(i, j, m - v, a.coeff(i, j, m));
    }
    let r = lambda_recip(&shift_down(b, v))?;
    let mut q = shifted.mul_jet(&r);
    if v > 0 {
        for (i, j, m) in shape.monomials() {
            if m + v > shape.degs[2] {
                q.set(i, j, m, zero());
            }
        }
    }
    Ok((q, v))
}

/// Principal k-th root of a λ-series with nonzero constant term, by the binomial series.
pub fn lambda_root(l: &Jet, k: usize) -> Result<Jet, JetError> {
    let a0 = at_zero(l);
    if a0.norm() == 0.0 {
        return Err(JetError::RootOfZero);
    }
    let h = l.add_const(-a0).scale(a0.inv());
    let e = 1.0 / k as f64;
    let mut term = Jet::constant(l.shape, C64::new(1.0, 0.0));
    let mut sum = term.clone();
    let mut coef = 1.0;
    for n in 1..=l.shape.degs[2] {
        coef *= (e - (n as f64 - 1.0)) / n as f64;
        term = term.mul_jet(&h);
        sum = &sum + &term.scale(C64::new(coef, 0.0));
    }
    Ok(sum.scale(a0.powf(e)))
}

/// Integer power of a series.
pub fn powi(l: &Jet, n: i32) -> Result<Jet, JetError> {
    if n >= 0 {
        Ok(l.powu(n as u32))
    } else {
        Ok(lambda_recip(l)?.powu((-n) as u32))
    }
}

/// Linear part [[∂ₓX, ∂ᵧX], [∂ₓY, ∂ᵧY]] as λ-series.
pub fn linear_part(x: &Jet, y: &Jet) -> [Jet; 4] {
    [lambda_coeff(x, 1, 0), lambda_coeff(x, 0, 1), lambda_coeff(y, 1, 0), lambda_coeff(y, 0, 1)]
}

/// Inverse of a change of coordinates (x, y) ↦ (X, Y) fixing the origin for every λ,
/// by the fixed point Ψ = L⁻¹(id − N∘Ψ), one (x, y)-order per pass.
pub fn invert_change(x: &Jet, y: &Jet) -> Result<(Jet, Jet), JetError> {
    if !vanishes_at_origin(x) || !vanishes_at_origin(y) {
        return Err(JetError::NonzeroConstant);
    }
    let shape = x.shape;
    let [a, b, c, d] = linear_part(x, y);
    let det = &a.mul_jet(&d) - &b.mul_jet(&c);
    if at_zero(&det).norm() < 1e-300 {
        return Err(JetError::SingularLinearPart);
    }
    let idet = lambda_recip(&det)?;
    let (ia, ib, ic, id) = (d.mul_jet(&idet), (-&b).mul_jet(&idet), (-&c).mul_jet(&idet), a.mul_jet(&idet));
    let ex = coordinate(shape, 0);
    let ey = coordinate(shape, 1);
    let lin = |p: &Jet, q: &Jet, r: &Jet, s: &Jet| -> (Jet, Jet) {
        (&p.mul_jet(&ex) + &q.mul_jet(&ey), &r.mul_jet(&ex) + &s.mul_jet(&ey))
    };
    let (lx, ly) = lin(&a, &b, &c, &d);
    let nx = x - &lx;
    let ny = y - &ly;
    let mut px = &ia.mul_jet(&ex) + &ib.mul_jet(&ey);
    let mut py = &ic.mul_jet(&ex) + &id.mul_jet(&ey);
    for _ in 0..shape.xy_total {
        let qx = compose(&nx, &px, &py)?;
        let qy = compose(&ny, &px, &py)?;
        let rx = &ex - &qx;
        let ry = &ey - &qy;
        px = &ia.mul_jet(&rx) + &ib.mul_jet(&ry);
        py = &ic.mul_jet(&rx) + &id.mul_jet(&ry);
    }
    Ok((px, py))
}

/// Inverse series λ(u) of a λ-series u(λ) with u(0) = 0 and u'(0) ≠ 0, as a λ-series in u.
pub fn invert_lambda_series(u: &Jet) -> Result<Jet, JetError> {
    let shape = u.shape;
    if at_zero(u).norm() > 1e-14 {
        return Err(JetError::NonzeroConstant);
    }
    let u1 = u.coeff(0, 0, 1);
    if u1.norm() == 0.0 {
        return Err(JetError::SingularLinearPart);
    }
    // λ = (t − N(λ))/u₁, iterated once per order.
    let mut lin = Jet::zero(shape);
    lin.set(0, 0, 1, u1);
    let nonlin = u - &lin;
    let mut t = Jet::zero(shape);
    t.set(0, 0, 1, C64::new(1.0, 0.0));
    let mut lam = t.scale(u1.inv());
    for _ in 0..shape.degs[2] {
        let mut acc = Jet::zero(shape);
        let mut pw = Jet::constant(shape, C64::new(1.0, 0.0));
        for m in 0..=shape.degs[2] {
            if m > 0 {
                pw = pw.mul_jet(&lam);
            }
            let c = nonlin.coeff(0, 0, m);
            if c.norm() != 0.0 {
                acc = &acc + &pw.scale(c);
            }
        }
        lam = (&t - &acc).scale(u1.inv());
    }
    Ok(lam)
}

/// Evaluates a λ-series at a point.
pub fn eval_lambda(l: &Jet, lambda: C64) -> C64 {
    l.eval(zero(), zero(), lambda)
}
