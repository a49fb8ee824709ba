//! Argument reduction for large carrier phases.
//!
//! Carrier phases such as `2E·τ/ε^{α+1}` reach 10⁵–10⁸ rad. The product
//! `rate·τ` is formed exactly as a double-double and reduced against a
//! double-double 2π before it is rounded back to a single `f64`.

use crate::math;

pub const TWO_PI: f64 = core::f64::consts::TAU;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Returns `rate·tau + offset` reduced into `[-π, π]`.
///
/// `rate` and `tau` are taken as exact binary values; only the rounding of
/// the final reduced value is incurred.
pub fn reduced_phase(rate: f64, tau: f64, offset: f64) -> f64 {
    let p = rate * tau;
    let p_err = math::fma(rate, tau, -p);
    let (s, s_err) = two_sum(p, offset);
    let lo = s_err + p_err;
    let k = math::round(s / TWO_PI);
    if k == 0.0 {
        return s + lo;
    }
    let q = k * TWO_PI;
    let q_err = math::fma(k, TWO_PI, -q);
    // s and q agree to within 2π, so the subtraction is exact for |s| > 4π.
    let d = s - q;
    d + (lo - q_err - k * TWO_PI_LO)
}

/// Reduces an already-formed phase into `[-π, π]`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    reduced_phase(x, 1.0, 0.0)
}
