//! One-dimensional adaptive quadrature helpers.
//!
//! All integrands handled here are smooth, light-tailed functions (densities
//! and exponentially weighted moments), so adaptive Simpson panels with
//! geometric tail extension are accurate and cheap.

/// Composite Simpson estimate on `[a, b]` with the midpoint `c`.
#[inline]
fn simpson(fa: f64, fc: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fc + fb)
}

fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let lm = 0.5 * (a + c);
    let rm = 0.5 * (c + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fc, a, c);
    let right = simpson(fc, frm, fb, c, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, c, fa, flm, fc, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, c, b, fc, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]` with absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    // Split into a few seed panels so narrow features away from the midpoint
    // are not missed by the first Simpson estimate.
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = lo + h;
        let mid = 0.5 * (lo + hi);
        let (fa, fc, fb) = (f(lo), f(mid), f(hi));
        let whole = simpson(fa, fc, fb, lo, hi);
        total += adaptive_step(f, lo, hi, fa, fc, fb, whole, tol / panels as f64, 48);
    }
    total
}

/// Integrates `f` over `[a, +inf)` by extending panels of width `step`
/// until the panel contribution drops below `tol` (absolute) or the panel
/// count cap is hit.
pub fn integrate_right_tail<F: Fn(f64) -> f64>(f: &F, a: f64, step: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    for _ in 0..10_000 {
        let hi = lo + step;
        let piece = adaptive_simpson(f, lo, hi, tol);
        total += piece;
        if piece.abs() < tol && total.abs() * f64::EPSILON < tol {
            break;
        }
        lo = hi;
    }
    total
}

/// Integrates `f` over `(-inf, b]`; mirror of [`integrate_right_tail`].
pub fn integrate_left_tail<F: Fn(f64) -> f64>(f: &F, b: f64, step: f64, tol: f64) -> f64 {
    integrate_right_tail(&|u: f64| f(-u), -b, step, tol)
}
