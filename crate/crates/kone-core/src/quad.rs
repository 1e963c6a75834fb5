//! Adaptive Simpson quadrature for the one-dimensional intensity integrals.

use crate::error::{KoneError, Result};
use crate::scalar::{real, Scalar};

const MAX_DEPTH: usize = 60;

fn simpson<S: Scalar>(a: S, b: S, fa: S, fm: S, fb: S) -> S {
    (b - a) / real::<S>(6.0) * (fa + real::<S>(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<S: Scalar, F: Fn(S) -> S>(
    f: &F,
    a: S,
    b: S,
    fa: S,
    fm: S,
    fb: S,
    whole: S,
    tol: S,
    depth: usize,
) -> Result<S> {
    let m = (a + b) / real::<S>(2.0);
    let lm = (a + m) / real::<S>(2.0);
    let rm = (m + b) / real::<S>(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(KoneError::QuadratureFailed(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    if delta.abs() <= real::<S>(15.0) * tol {
        return Ok(left + right + delta / real::<S>(15.0));
    }
    if depth >= MAX_DEPTH {
        return Err(KoneError::QuadratureFailed(format!(
            "max refinement depth reached on [{a}, {b}]"
        )));
    }
    let half_tol = tol / real::<S>(2.0);
    let l = adapt(f, a, m, fa, flm, fm, left, half_tol, depth + 1)?;
    let r = adapt(f, m, b, fm, frm, fb, right, half_tol, depth + 1)?;
    Ok(l + r)
}

/// Integrate `f` over `[a, b]` with relative tolerance `rel_tol`
/// (floored by a small absolute tolerance for near-zero integrals).
pub fn integrate<S: Scalar, F: Fn(S) -> S>(f: F, a: S, b: S, rel_tol: S) -> Result<S> {
    if !(b > a) {
        return Ok(S::zero());
    }
    let m = (a + b) / real::<S>(2.0);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    // magnitude scale from a coarse |f| scan, so near-cancelling integrals
    // do not drive the tolerance to zero
    let mut sup = S::zero();
    for i in 0..=32 {
        let x = a + (b - a) * real::<S>(i as f64 / 32.0);
        let v = f(x).abs();
        if v.is_finite() {
            sup = sup.max(v);
        }
    }
    let scale = whole.abs().max(sup * (b - a) / real(16.0)).max(real(1e-300));
    let tol = (rel_tol * scale).max(real(1e-300));
    adapt(&f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Integrate `f` over `[a, ∞)` via the substitution `s = a + t/(1-t)`.
pub fn integrate_tail<S: Scalar, F: Fn(S) -> S>(f: F, a: S, rel_tol: S) -> Result<S> {
    let one = S::one();
    let g = move |t: S| {
        if t >= one {
            return S::zero();
        }
        let u = one - t;
        f(a + t / u) / (u * u)
    };
    integrate(g, S::zero(), one - real(1e-14), rel_tol)
}

/// Default relative tolerance for intensity-mass integrals.
pub fn default_tol<S: Scalar>() -> S {
    real(1e-9)
}
