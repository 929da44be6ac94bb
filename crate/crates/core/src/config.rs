//! Central numeric tolerances.
//!
//! Every comparison helper takes an explicit tolerance; these are the
//! defaults used by constructors and self-checks.

use num_complex::Complex64;

/// Determinant / multiplier-square invariant tolerance on construction.
pub const INVARIANT_TOL: f64 = 1e-12;

/// Coordinate round-trip tolerance.
pub const ROUNDTRIP_TOL: f64 = 1e-10;

/// Agreement tolerance between the two lift formulas.
pub const LIFT_TOL: f64 = 1e-10;

/// Points with `Im(z)` below this are rejected as degenerate rather than
/// evaluated: the series and multiplier formulas lose all accuracy there.
pub const DEGENERATE_IM: f64 = 1e-12;

/// Default truncation tolerance for the theta series tail.
pub const THETA_TOL: f64 = 1e-12;

/// Default target for relative series truncation error.
pub const SERIES_REL_TOL: f64 = 1e-6;

/// Relative-or-absolute comparison: `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (a.abs().max(b.abs())).max(1.0)
}

/// Complex variant of [`close`].
pub fn close_c(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (a.norm().max(b.norm())).max(1.0)
}

/// Relative distance `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn rel_err_c(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Real variant of [`rel_err_c`].
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
