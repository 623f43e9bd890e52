//! Scalar root finding for F(A0 + tB) = kappa along a ray.

use crate::error::{input, Result};
use crate::hermitian::{trace_pairing, HermitianMatrix};
use crate::operator::OperatorContext;

/// Largest t probed before declaring that no root exists.
const T_MAX: f64 = 1e14;

/// The smallest t >= 0 with F(A0 + tB) = kappa, or None when the ray never
/// reaches kappa. Roots are bracketed by a geometric scan, bisected and then
/// polished with Newton steps.
pub fn solve_ray(a0: &HermitianMatrix, b: &HermitianMatrix, ctx: &OperatorContext) -> Result<Option<f64>> {
    if a0.dim() != b.dim() || a0.dim() != ctx.dim() {
        return input("dimension mismatch in ray solve");
    }
    if b.frobenius() == 0.0 || !b.is_psd() {
        return input("ray direction must be a nonzero PSD matrix");
    }
    let kappa = ctx.kappa;
    let g = |t: f64| -> Result<f64> { Ok(ctx.f(&a0.axpy(t, b))? - kappa) };
    let tol = 1e-12 * kappa.max(1.0);
    let g0 = g(0.0)?;
    if g0.abs() <= tol {
        return Ok(Some(0.0));
    }
    // geometric scan for the first sign change
    let mut lo = 0.0;
    let mut glo = g0;
    let mut t = 1e-3 * (1.0 + a0.frobenius()) / b.frobenius();
    let mut hi = loop {
        let gt = g(t)?;
        if gt.signum() != glo.signum() {
            break t;
        }
        if t > T_MAX {
            return Ok(None);
        }
        lo = t;
        glo = gt;
        t *= 2.0;
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-10 * hi.max(1e-300) {
            break;
        }
    }
    // Newton polish kept inside the bracket
    let mut t = 0.5 * (lo + hi);
    for _ in 0..20 {
        let a = a0.axpy(t, b);
        let gt = ctx.f(&a)? - kappa;
        if gt.abs() <= tol {
            return Ok(Some(t));
        }
        let slope = trace_pairing(ctx.grad(&a)?.matrix(), &b.matrix().transpose()).re;
        let next = t - gt / slope;
        t = if slope != 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        let gn = ctx.f(&a0.axpy(t, b))? - kappa;
        if gn.signum() == glo.signum() {
            lo = t;
        } else {
            hi = t;
        }
    }
    Ok(Some(t))
}
