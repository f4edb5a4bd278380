//! Repairing an unseen fractured shape: recover latent codes from its
//! fractured-shape labels alone, then pull the restoration out of the
//! learned fields.
//!
//! Code recovery minimizes the fractured-shape loss plus the code prior —
//! no complete, break, or restoration labels are consulted. Extraction runs
//! marching cubes over `max(f^C_s, −f^B_s)`, the signed distance of
//! "complete minus break", which avoids the surface artifacts of composing
//! occupancies directly; occupancy-only configurations march the composed
//! occupancy at its 0.5 level instead. An empty mesh is a legitimate
//! outcome and is flagged rather than treated as an error.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{subtract_sdf, OCC_THRESHOLD};
use crate::geometry::marching_cubes::marching_cubes_batched;
use crate::geometry::TriangleMesh;
use crate::learn::loss::{loss_f, loss_reg, LossWeights};
use crate::learn::train::{init_code, Model, DEFAULT_LR_CODES};
use crate::math::Vec3;
use crate::neural::AdamState;
use crate::sampling::ProbeSet;

/// Points per network evaluation when sweeping an extraction grid.
pub const EVAL_CHUNK: usize = 16384;

/// Grid resolution for desk-scale extraction.
pub const DEFAULT_EXTRACT_RESOLUTION: usize = 128;

/// Optimization schedule for code recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferConfig {
    pub steps: usize,
    /// Points drawn per step; `0` means the full probe set every step.
    pub points_per_step: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            steps: 800,
            points_per_step: 0,
            lr: DEFAULT_LR_CODES,
            seed: 0,
        }
    }
}

/// One repaired shape: the recovered codes, the extracted restoration, the
/// predicted complete shape (kept as a fallback for downstream mesh
/// subtraction), and the per-step loss trace.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub z_c: Vec<f64>,
    pub z_b: Vec<f64>,
    pub restoration: TriangleMesh,
    pub complete: TriangleMesh,
    pub trace: Vec<f64>,
    /// Marching cubes produced no triangles for the restoration.
    pub empty: bool,
}

/// Recovers latent codes for a fractured shape from its probe set by
/// minimizing the fractured-shape loss plus the code prior. Returns the
/// codes and the loss value at the start of every step.
pub fn infer_codes(
    model: &Model,
    probes: &ProbeSet,
    w: &LossWeights,
    cfg: &InferConfig,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    w.validate()?;
    if probes.is_empty() {
        return Err(Error::InvalidConfig(
            "inference needs a nonempty probe set".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut z_c = init_code(model.net_c.arch().code_dim, &mut rng);
    let mut z_b = init_code(model.net_b.arch().code_dim, &mut rng);
    let mut adam_c = AdamState::new(z_c.len(), cfg.lr);
    let mut adam_b = AdamState::new(z_b.len(), cfg.lr);
    let mut trace = Vec::with_capacity(cfg.steps);

    let all = &probes.points;
    for step in 1..=cfg.steps {
        let batch: Vec<_> = if cfg.points_per_step == 0 || cfg.points_per_step >= all.len() {
            all.clone()
        } else {
            rand::seq::index::sample(&mut rng, all.len(), cfg.points_per_step)
                .iter()
                .map(|i| all[i])
                .collect()
        };
        let positions: Vec<_> = batch.iter().map(|p| p.position()).collect();

        let fwd_c = model.net_c.forward_batch(&z_c, &positions, model.mask)?;
        let fwd_b = model.net_b.forward_batch(&z_b, &positions, model.mask)?;
        let (l_f, head_c, head_b) = loss_f(&fwd_c, &fwd_b, &batch, w);
        let (l_reg, reg_c, reg_b) = loss_reg(&z_c, &z_b, w.lambda_reg);

        let total = l_f + l_reg;
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: step,
                shape: "inference".into(),
                detail: format!("L_F {l_f}, L_reg {l_reg} over {} points", batch.len()),
            });
        }
        trace.push(total);

        let grads_c = model.net_c.backward(&fwd_c, &head_c);
        let grads_b = model.net_b.backward(&fwd_b, &head_b);
        let g_c: Vec<f64> = grads_c.code.iter().zip(&reg_c).map(|(a, b)| a + b).collect();
        let g_b: Vec<f64> = grads_b.code.iter().zip(&reg_b).map(|(a, b)| a + b).collect();
        adam_c.step(&mut z_c, &g_c)?;
        adam_b.step(&mut z_b, &g_b)?;
    }

    Ok((z_c, z_b, trace))
}

/// Marching cubes over `max(s_C, −s_B)` for any pair of SDF evaluators;
/// the callback receives a chunk of grid points and returns the two
/// predicted SDFs for each.
pub fn extract_restoration_from<F>(mut sdf_pair: F, resolution: usize) -> TriangleMesh
where
    F: FnMut(&[Vec3]) -> (Vec<f64>, Vec<f64>),
{
    marching_cubes_batched(
        |points| {
            let mut values = Vec::with_capacity(points.len());
            for chunk in points.chunks(EVAL_CHUNK) {
                let (s_c, s_b) = sdf_pair(chunk);
                values.extend(
                    s_c.iter()
                        .zip(&s_b)
                        .map(|(&c, &b)| subtract_sdf(c, b)),
                );
            }
            values
        },
        resolution,
        0.0,
    )
}

/// Extracts the restoration predicted by the trained networks for one code
/// pair. An empty mesh means the fields place the restoration nowhere.
///
/// With the SDF head active this marches `max(s_C, −s_B)` at zero; for
/// occupancy-only configurations it falls back to the composed restoration
/// occupancy `o_C·(1−o_B)` at the [`OCC_THRESHOLD`] level.
pub fn extract_restoration(
    model: &Model,
    z_c: &[f64],
    z_b: &[f64],
    resolution: usize,
) -> Result<TriangleMesh> {
    check_code_dims(model, z_c, z_b)?;
    if model.mask.sdf {
        return Ok(extract_restoration_from(
            |chunk| {
                let fwd_c = model
                    .net_c
                    .forward_eval(z_c, chunk, model.mask)
                    .expect("code validated");
                let fwd_b = model
                    .net_b
                    .forward_eval(z_b, chunk, model.mask)
                    .expect("code validated");
                (fwd_c.sdf, fwd_b.sdf)
            },
            resolution,
        ));
    }
    Ok(marching_cubes_batched(
        |points| {
            let mut values = Vec::with_capacity(points.len());
            for chunk in points.chunks(EVAL_CHUNK) {
                let fwd_c = model
                    .net_c
                    .forward_eval(z_c, chunk, model.mask)
                    .expect("code validated");
                let fwd_b = model
                    .net_b
                    .forward_eval(z_b, chunk, model.mask)
                    .expect("code validated");
                values.extend(
                    fwd_c
                        .occ
                        .iter()
                        .zip(&fwd_b.occ)
                        .map(|(&oc, &ob)| OCC_THRESHOLD - oc * (1.0 - ob)),
                );
            }
            values
        },
        resolution,
        0.0,
    ))
}

/// Extracts the predicted complete shape for a code, with the same
/// occupancy fallback as [`extract_restoration`].
pub fn extract_complete(model: &Model, z_c: &[f64], resolution: usize) -> Result<TriangleMesh> {
    check_code_dims(model, z_c, &vec![0.0; model.net_b.arch().code_dim])?;
    Ok(marching_cubes_batched(
        |points| {
            let mut values = Vec::with_capacity(points.len());
            for chunk in points.chunks(EVAL_CHUNK) {
                let fwd = model
                    .net_c
                    .forward_eval(z_c, chunk, model.mask)
                    .expect("code validated");
                if model.mask.sdf {
                    values.extend(fwd.sdf);
                } else {
                    values.extend(fwd.occ.iter().map(|&o| OCC_THRESHOLD - o));
                }
            }
            values
        },
        resolution,
        0.0,
    ))
}

fn check_code_dims(model: &Model, z_c: &[f64], z_b: &[f64]) -> Result<()> {
    for (z, dim, which) in [
        (z_c, model.net_c.arch().code_dim, "complete"),
        (z_b, model.net_b.arch().code_dim, "break"),
    ] {
        if z.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: z.len(),
                context: format!("{which} latent code"),
            });
        }
    }
    Ok(())
}

/// Full repair of one fractured shape: code recovery, restoration
/// extraction, and the predicted complete shape as a fallback.
pub fn repair(
    model: &Model,
    probes: &ProbeSet,
    w: &LossWeights,
    cfg: &InferConfig,
    resolution: usize,
) -> Result<InferenceResult> {
    let (z_c, z_b, trace) = infer_codes(model, probes, w, cfg)?;
    let restoration = extract_restoration(model, &z_c, &z_b, resolution)?;
    let complete = extract_complete(model, &z_c, resolution)?;
    let empty = restoration.is_empty();
    Ok(InferenceResult {
        z_c,
        z_b,
        restoration,
        complete,
        trace,
        empty,
    })
}
