//! Loss terms for joint field learning.
//!
//! Two networks predict the complete shape `C` and the break shape `B`; the
//! fractured and restoration shapes are never predicted directly but
//! *composed* from the two heads, and the losses mirror that composition:
//!
//! * [`loss_cb`] supervises each network against its own shape's labels.
//! * [`loss_f`] supervises the composed fractured shape: occupancy is the
//!   product `o_C·o_B`, while the SDF/normal terms compare whichever network
//!   the intersection rule says is authoritative at the point.
//! * [`loss_r`] does the same for the restoration, with the break SDF and
//!   normal negated because the restoration lies on the far side of the
//!   break surface.
//! * [`loss_reg`] is the L1 prior on the latent codes.
//!
//! Branch predicates (is the point inside the predicted break shape? which
//! SDF is larger?) are evaluated on the predictions but treated as constants
//! for differentiation, so each point's compare-term sends gradient to
//! exactly one network. All sums are sequential; every term returns its
//! value together with head-output gradients for both networks, scaled by
//! `1/n` so terms from different losses accumulate directly.

use crate::fields::OCC_THRESHOLD;
use crate::math::{log1mexp, log_sigmoid, sigmoid};
use crate::neural::{Forward, HeadGrads};
use crate::sampling::{ProbePoint, ShapeKind};

/// Most negative log-probability treated as distinguishable from certainty;
/// product occupancies beyond it are saturated and clamp the gradient.
const SATURATION_EPS: f64 = 1e-12;

/// Normal residuals shorter than this get zero gradient instead of an
/// ill-conditioned `v/‖v‖`.
const NF_RESIDUAL_EPS: f64 = 1e-12;

/// Term coefficients shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// SDF term weight.
    pub lambda_s: f64,
    /// Normal term weight.
    pub lambda_n: f64,
    /// Latent-code L1 weight.
    pub lambda_reg: f64,
    /// Occupancy threshold deciding "inside the predicted break shape".
    pub mu: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_s: 1.0,
            lambda_n: 0.1,
            lambda_reg: 1e-4,
            mu: OCC_THRESHOLD,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> crate::Result<()> {
        if self.lambda_s < 0.0 || self.lambda_n < 0.0 || self.lambda_reg < 0.0 {
            return Err(crate::Error::InvalidConfig(format!(
                "loss weights must be non-negative, got {self:?}"
            )));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(crate::Error::InvalidConfig(format!(
                "occupancy threshold must lie in (0,1), got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Binary cross-entropy of `σ(u)` against `y`, expressed on the logit so it
/// is exact for saturated predictions. Returns (value, d/du).
fn logit_bce(u: f64, y: f64) -> (f64, f64) {
    let value = u.max(0.0) - u * y + (-u.abs()).exp().ln_1p();
    (value, sigmoid(u) - y)
}

/// Binary cross-entropy of the product `σ(u1)·σ(u2)` against `y`, computed
/// through log-probabilities so a saturated product never produces `ln 0`.
/// Returns (value, d/du1, d/du2).
fn product_bce(u1: f64, u2: f64, y: f64) -> (f64, f64, f64) {
    let log_p = (log_sigmoid(u1) + log_sigmoid(u2)).min(-SATURATION_EPS);
    let log_q = log1mexp(log_p); // log(1 - p)
    let value = -(y * log_p + (1.0 - y) * log_q);
    let p = log_p.exp();
    let q = (-log_p.exp_m1()).max(SATURATION_EPS);
    let d_log_p = -y + (1.0 - y) * p / q;
    (value, d_log_p * sigmoid(-u1), d_log_p * sigmoid(-u2))
}

/// Absolute error and its subgradient (zero at the kink).
fn l1(pred: f64, label: f64) -> (f64, f64) {
    let d = pred - label;
    (d.abs(), if d == 0.0 { 0.0 } else { d.signum() })
}

/// Euclidean length of `pred − label` over one normal row and its gradient
/// with respect to `pred`; both zero when the residual vanishes.
fn nf_l2(pred: &[f64], label: [f32; 3]) -> (f64, [f64; 3]) {
    let v = [
        pred[0] - f64::from(label[0]),
        pred[1] - f64::from(label[1]),
        pred[2] - f64::from(label[2]),
    ];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm < NF_RESIDUAL_EPS {
        (norm, [0.0; 3])
    } else {
        (norm, [v[0] / norm, v[1] / norm, v[2] / norm])
    }
}

fn check_aligned(fwd_c: &Forward, fwd_b: &Forward, points: &[ProbePoint]) {
    assert_eq!(fwd_c.len(), points.len(), "C predictions misaligned");
    assert_eq!(fwd_b.len(), points.len(), "B predictions misaligned");
    assert_eq!(fwd_c.mask(), fwd_b.mask(), "networks disagree on heads");
}

/// Per-shape reconstruction loss: each network against its own labels,
/// summed over the two shapes and averaged over points.
pub fn loss_cb(
    fwd_c: &Forward,
    fwd_b: &Forward,
    points: &[ProbePoint],
    w: &LossWeights,
) -> (f64, HeadGrads, HeadGrads) {
    check_aligned(fwd_c, fwd_b, points);
    let n = points.len();
    let inv = 1.0 / n as f64;
    let mask = fwd_c.mask();
    let mut total = 0.0;
    let mut grad_c = HeadGrads::zeros(n);
    let mut grad_b = HeadGrads::zeros(n);

    for (fwd, grad, kind) in [
        (fwd_c, &mut grad_c, ShapeKind::Complete),
        (fwd_b, &mut grad_b, ShapeKind::Break),
    ] {
        for (i, point) in points.iter().enumerate() {
            let label = point.label(kind);
            if mask.occ {
                let (v, du) = logit_bce(fwd.occ_logit[i], f64::from(label.occ));
                total += v * inv;
                grad.d_occ_logit[i] += du * inv;
            }
            if mask.sdf {
                let (v, ds) = l1(fwd.sdf[i], f64::from(label.sdf));
                total += w.lambda_s * v * inv;
                grad.d_sdf[i] += w.lambda_s * ds * inv;
            }
            if mask.nf {
                let (v, dn) = nf_l2(&fwd.nf[3 * i..3 * i + 3], label.nf);
                total += w.lambda_n * v * inv;
                for k in 0..3 {
                    grad.d_nf[3 * i + k] += w.lambda_n * dn[k] * inv;
                }
            }
        }
    }
    (total, grad_c, grad_b)
}

/// Fractured-shape loss: the composed intersection against `F` labels.
/// The SDF/normal terms follow the break network wherever the point is
/// predicted outside the break shape (`o_B ≤ μ`) or the break SDF dominates,
/// and the complete network otherwise.
pub fn loss_f(
    fwd_c: &Forward,
    fwd_b: &Forward,
    points: &[ProbePoint],
    w: &LossWeights,
) -> (f64, HeadGrads, HeadGrads) {
    check_aligned(fwd_c, fwd_b, points);
    let n = points.len();
    let inv = 1.0 / n as f64;
    let mask = fwd_c.mask();
    let mut total = 0.0;
    let mut grad_c = HeadGrads::zeros(n);
    let mut grad_b = HeadGrads::zeros(n);

    for (i, point) in points.iter().enumerate() {
        let label = point.label(ShapeKind::Fractured);
        if mask.occ {
            let (v, du_c, du_b) = product_bce(
                fwd_c.occ_logit[i],
                fwd_b.occ_logit[i],
                f64::from(label.occ),
            );
            total += v * inv;
            grad_c.d_occ_logit[i] += du_c * inv;
            grad_b.d_occ_logit[i] += du_b * inv;
        }
        let break_branch = fwd_b.occ[i] <= w.mu || fwd_b.sdf[i] > fwd_c.sdf[i];
        let (fwd, grad) = if break_branch {
            (fwd_b, &mut grad_b)
        } else {
            (fwd_c, &mut grad_c)
        };
        if mask.sdf {
            let (v, ds) = l1(fwd.sdf[i], f64::from(label.sdf));
            total += w.lambda_s * v * inv;
            grad.d_sdf[i] += w.lambda_s * ds * inv;
        }
        if mask.nf {
            let (v, dn) = nf_l2(&fwd.nf[3 * i..3 * i + 3], label.nf);
            total += w.lambda_n * v * inv;
            for k in 0..3 {
                grad.d_nf[3 * i + k] += w.lambda_n * dn[k] * inv;
            }
        }
    }
    (total, grad_c, grad_b)
}

/// Restoration-shape loss: the composed complement against `R` labels.
/// Occupancy is `o_C·(1−o_B)`; the SDF/normal terms follow the *negated*
/// break network wherever the point is predicted inside the break shape
/// (`o_B > μ`) or the negated break SDF dominates, and the complete network
/// otherwise.
pub fn loss_r(
    fwd_c: &Forward,
    fwd_b: &Forward,
    points: &[ProbePoint],
    w: &LossWeights,
) -> (f64, HeadGrads, HeadGrads) {
    check_aligned(fwd_c, fwd_b, points);
    let n = points.len();
    let inv = 1.0 / n as f64;
    let mask = fwd_c.mask();
    let mut total = 0.0;
    let mut grad_c = HeadGrads::zeros(n);
    let mut grad_b = HeadGrads::zeros(n);

    for (i, point) in points.iter().enumerate() {
        let label = point.label(ShapeKind::Restoration);
        if mask.occ {
            // σ(u_C)·(1−σ(u_B)) = σ(u_C)·σ(−u_B), so the product form applies
            // with the break logit negated.
            let (v, du_c, du_negb) = product_bce(
                fwd_c.occ_logit[i],
                -fwd_b.occ_logit[i],
                f64::from(label.occ),
            );
            total += v * inv;
            grad_c.d_occ_logit[i] += du_c * inv;
            grad_b.d_occ_logit[i] -= du_negb * inv;
        }
        let break_branch = fwd_b.occ[i] > w.mu || -fwd_b.sdf[i] > fwd_c.sdf[i];
        if mask.sdf {
            if break_branch {
                let (v, ds) = l1(-fwd_b.sdf[i], f64::from(label.sdf));
                total += w.lambda_s * v * inv;
                grad_b.d_sdf[i] -= w.lambda_s * ds * inv;
            } else {
                let (v, ds) = l1(fwd_c.sdf[i], f64::from(label.sdf));
                total += w.lambda_s * v * inv;
                grad_c.d_sdf[i] += w.lambda_s * ds * inv;
            }
        }
        if mask.nf {
            if break_branch {
                let neg = [-fwd_b.nf[3 * i], -fwd_b.nf[3 * i + 1], -fwd_b.nf[3 * i + 2]];
                let (v, dn) = nf_l2(&neg, label.nf);
                total += w.lambda_n * v * inv;
                for k in 0..3 {
                    grad_b.d_nf[3 * i + k] -= w.lambda_n * dn[k] * inv;
                }
            } else {
                let (v, dn) = nf_l2(&fwd_c.nf[3 * i..3 * i + 3], label.nf);
                total += w.lambda_n * v * inv;
                for k in 0..3 {
                    grad_c.d_nf[3 * i + k] += w.lambda_n * dn[k] * inv;
                }
            }
        }
    }
    (total, grad_c, grad_b)
}

/// L1 prior on both latent codes: `λ·(‖z_C‖₁ + ‖z_B‖₁)` with its
/// subgradients (zero at exact zeros).
pub fn loss_reg(z_c: &[f64], z_b: &[f64], lambda_reg: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let mut total = 0.0;
    let grad = |z: &[f64], total: &mut f64| -> Vec<f64> {
        z.iter()
            .map(|&x| {
                *total += lambda_reg * x.abs();
                if x == 0.0 {
                    0.0
                } else {
                    lambda_reg * x.signum()
                }
            })
            .collect()
    };
    let g_c = grad(z_c, &mut total);
    let g_b = grad(z_b, &mut total);
    (total, g_c, g_b)
}
