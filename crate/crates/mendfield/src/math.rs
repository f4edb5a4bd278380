//! Small vector/scalar helpers shared across the crate.

pub use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;

/// Fallback direction reported where a normal is genuinely undefined
/// (degenerate gradient, center of a sphere, ...). Using a fixed sentinel
/// keeps every field output a unit vector and keeps runs reproducible.
pub const DEGENERATE_NORMAL: [f64; 3] = [0.0, 0.0, 1.0];

pub fn degenerate_normal() -> Vec3 {
    Vec3::new(
        DEGENERATE_NORMAL[0],
        DEGENERATE_NORMAL[1],
        DEGENERATE_NORMAL[2],
    )
}

/// Normalize `v`, falling back to the degenerate sentinel when the norm
/// is too small to divide by.
pub fn normalize_or_default(v: Vec3, eps: f64) -> Vec3 {
    let n = v.norm();
    if n < eps {
        degenerate_normal()
    } else {
        v / n
    }
}

/// Numerically stable sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)) without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// log(1 - e^x) for x < 0, accurate across both the `x → 0⁻` regime
/// (where `1 - e^x` cancels) and the `x → -∞` regime (where `e^x`
/// vanishes). Split at `-ln 2` following the usual two-branch scheme.
pub fn log1mexp(x: f64) -> f64 {
    debug_assert!(x < 0.0, "log1mexp needs a negative argument, got {x}");
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}
