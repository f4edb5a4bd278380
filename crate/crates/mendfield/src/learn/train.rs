//! Joint optimization of the two networks and all per-shape latent codes.
//!
//! Each epoch walks the dataset in a fixed order, subsamples a point batch
//! per shape, and accumulates gradients of `L_CB + L_F + L_R + λ_reg·L_reg`
//! through both networks. Parameters and codes step together under Adam.
//! All reductions are sequential and the only randomness flows from the
//! seeded generator, so runs are bit-reproducible.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::loss::{loss_cb, loss_f, loss_r, loss_reg, LossWeights};
use crate::neural::{AdamState, Architecture, Checkpoint, FeatureMask, Network, RngSnapshot};
use crate::sampling::ProbeSet;

/// Spread of the latent-code initialization.
pub const CODE_INIT_STD: f64 = 0.01;

/// Network learning rate.
pub const DEFAULT_LR_NET: f64 = 5e-4;

/// Latent-code learning rate.
pub const DEFAULT_LR_CODES: f64 = 1e-3;

/// Everything a training run needs beyond the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub arch_c: Architecture,
    pub arch_b: Architecture,
    pub epochs: usize,
    /// Points drawn per shape per epoch; `0` or more than the probe set
    /// holds means the full set.
    pub points_per_shape: usize,
    /// Shapes whose gradients accumulate into one optimizer step; `0` means
    /// the whole dataset (one step per epoch).
    pub shapes_per_batch: usize,
    pub lr_net: f64,
    pub lr_codes: f64,
    pub weights: LossWeights,
    pub mask: FeatureMask,
    pub seed: u64,
    /// Epochs between checkpoint writes; `0` disables periodic snapshots.
    pub snapshot_every: usize,
    /// Skip the network update and optimize codes only.
    pub freeze_net: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch_c: Architecture::complete_default(),
            arch_b: Architecture::break_default(),
            epochs: 2000,
            points_per_shape: 8192,
            shapes_per_batch: 0,
            lr_net: DEFAULT_LR_NET,
            lr_codes: DEFAULT_LR_CODES,
            weights: LossWeights::default(),
            mask: FeatureMask::all(),
            seed: 0,
            snapshot_every: 250,
            freeze_net: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch_c.validate()?;
        self.arch_b.validate()?;
        self.weights.validate()?;
        self.mask.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.lr_net <= 0.0 || self.lr_codes <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rates must be positive, got net {} / codes {}",
                self.lr_net, self.lr_codes
            )));
        }
        Ok(())
    }
}

/// The trained state: both networks plus the per-shape code tables, with
/// the head mask and loss weights they were fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net_c: Network,
    pub net_b: Network,
    pub codes_c: Vec<Vec<f64>>,
    pub codes_b: Vec<Vec<f64>>,
    pub mask: FeatureMask,
    pub weights: LossWeights,
}

impl Model {
    /// Rebuilds the usable model half of a checkpoint; `weights` are run
    /// configuration, not checkpoint state.
    pub fn from_checkpoint(ckpt: &Checkpoint, weights: LossWeights) -> Result<Model> {
        Ok(Model {
            net_c: Network::from_params(ckpt.arch_c, ckpt.net_c.clone())?,
            net_b: Network::from_params(ckpt.arch_b, ckpt.net_b.clone())?,
            codes_c: ckpt.codes_c.clone(),
            codes_b: ckpt.codes_b.clone(),
            mask: ckpt.mask,
            weights,
        })
    }
}

/// One epoch's mean per-shape losses, serialized as a JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(rename = "L_CB")]
    pub l_cb: f64,
    #[serde(rename = "L_F")]
    pub l_f: f64,
    #[serde(rename = "L_R")]
    pub l_r: f64,
    #[serde(rename = "L_reg")]
    pub l_reg: f64,
    /// Seconds spent in this epoch.
    pub wall_time: f64,
}

impl EpochRecord {
    pub fn total(&self) -> f64 {
        self.l_cb + self.l_f + self.l_r + self.l_reg
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<EpochRecord>,
    /// Final resumable state (also what periodic snapshots contain).
    pub checkpoint: Checkpoint,
}

pub fn init_code(dim: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let dist = Normal::new(0.0, CODE_INIT_STD).expect("valid normal");
    (0..dim).map(|_| rng.sample(dist)).collect()
}

/// Fits the networks and one code pair per dataset entry. Writes a JSON
/// line per epoch to `log_out` and a checkpoint to `snapshot_path` at the
/// configured cadence (and always at the final epoch when a path is given).
pub fn train(
    dataset: &[ProbeSet],
    cfg: &TrainConfig,
    mut log_out: Option<&mut dyn Write>,
    snapshot_path: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }
    if let Some(empty) = dataset.iter().position(|s| s.is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "probe set {empty} holds no points"
        )));
    }

    let n_shapes = dataset.len();
    let dim_c = cfg.arch_c.code_dim;
    let dim_b = cfg.arch_b.code_dim;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    let mut net_c = Network::init(cfg.arch_c, &mut rng)?;
    let mut net_b = Network::init(cfg.arch_b, &mut rng)?;
    let mut codes_c: Vec<Vec<f64>> = (0..n_shapes).map(|_| init_code(dim_c, &mut rng)).collect();
    let mut codes_b: Vec<Vec<f64>> = (0..n_shapes).map(|_| init_code(dim_b, &mut rng)).collect();

    let mut adam_net_c = AdamState::new(net_c.param_count(), cfg.lr_net);
    let mut adam_net_b = AdamState::new(net_b.param_count(), cfg.lr_net);
    let mut adam_codes_c = AdamState::new(n_shapes * dim_c, cfg.lr_codes);
    let mut adam_codes_b = AdamState::new(n_shapes * dim_b, cfg.lr_codes);

    let batch_shapes = if cfg.shapes_per_batch == 0 {
        n_shapes
    } else {
        cfg.shapes_per_batch.min(n_shapes)
    };

    let mut grad_net_c = vec![0.0; net_c.param_count()];
    let mut grad_net_b = vec![0.0; net_b.param_count()];
    let mut grad_codes_c = vec![0.0; n_shapes * dim_c];
    let mut grad_codes_b = vec![0.0; n_shapes * dim_b];

    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut sums = [0.0; 4]; // L_CB, L_F, L_R, L_reg
        let mut in_batch = 0usize;

        for (shape, probes) in dataset.iter().enumerate() {
            let all = &probes.points;
            let batch: Vec<_> = if cfg.points_per_shape == 0 || cfg.points_per_shape >= all.len() {
                all.clone()
            } else {
                rand::seq::index::sample(&mut rng, all.len(), cfg.points_per_shape)
                    .iter()
                    .map(|i| all[i])
                    .collect()
            };
            let positions: Vec<_> = batch.iter().map(|p| p.position()).collect();

            let fwd_c = net_c.forward_batch(&codes_c[shape], &positions, cfg.mask)?;
            let fwd_b = net_b.forward_batch(&codes_b[shape], &positions, cfg.mask)?;

            let (l_cb, mut head_c, head_cb_b) = loss_cb(&fwd_c, &fwd_b, &batch, &cfg.weights);
            let (l_f, head_f_c, head_f_b) = loss_f(&fwd_c, &fwd_b, &batch, &cfg.weights);
            let (l_r, head_r_c, head_r_b) = loss_r(&fwd_c, &fwd_b, &batch, &cfg.weights);
            let (l_reg, reg_c, reg_b) =
                loss_reg(&codes_c[shape], &codes_b[shape], cfg.weights.lambda_reg);

            let total = l_cb + l_f + l_r + l_reg;
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    shape: shape.to_string(),
                    detail: format!(
                        "L_CB {l_cb}, L_F {l_f}, L_R {l_r}, L_reg {l_reg} over {} points",
                        batch.len()
                    ),
                });
            }
            sums[0] += l_cb;
            sums[1] += l_f;
            sums[2] += l_r;
            sums[3] += l_reg;

            head_c.add(&head_f_c);
            head_c.add(&head_r_c);
            let mut head_b = head_cb_b;
            head_b.add(&head_f_b);
            head_b.add(&head_r_b);

            let grads_c = net_c.backward(&fwd_c, &head_c);
            let grads_b = net_b.backward(&fwd_b, &head_b);

            for (acc, g) in grad_net_c.iter_mut().zip(&grads_c.params) {
                *acc += g;
            }
            for (acc, g) in grad_net_b.iter_mut().zip(&grads_b.params) {
                *acc += g;
            }
            let slot_c = &mut grad_codes_c[shape * dim_c..(shape + 1) * dim_c];
            for k in 0..dim_c {
                slot_c[k] += grads_c.code[k] + reg_c[k];
            }
            let slot_b = &mut grad_codes_b[shape * dim_b..(shape + 1) * dim_b];
            for k in 0..dim_b {
                slot_b[k] += grads_b.code[k] + reg_b[k];
            }

            in_batch += 1;
            if in_batch == batch_shapes || shape + 1 == n_shapes {
                if !cfg.freeze_net {
                    adam_net_c.step(net_c.params_mut(), &grad_net_c)?;
                    adam_net_b.step(net_b.params_mut(), &grad_net_b)?;
                }
                step_codes(&mut adam_codes_c, &mut codes_c, &grad_codes_c, dim_c)?;
                step_codes(&mut adam_codes_b, &mut codes_b, &grad_codes_b, dim_b)?;
                grad_net_c.iter_mut().for_each(|g| *g = 0.0);
                grad_net_b.iter_mut().for_each(|g| *g = 0.0);
                grad_codes_c.iter_mut().for_each(|g| *g = 0.0);
                grad_codes_b.iter_mut().for_each(|g| *g = 0.0);
                in_batch = 0;
            }
        }

        let inv = 1.0 / n_shapes as f64;
        let record = EpochRecord {
            epoch,
            l_cb: sums[0] * inv,
            l_f: sums[1] * inv,
            l_r: sums[2] * inv,
            l_reg: sums[3] * inv,
            wall_time: started.elapsed().as_secs_f64(),
        };
        if let Some(out) = log_out.as_deref_mut() {
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::InvalidConfig(format!("log serialization failed: {e}")))?;
            writeln!(out, "{line}").map_err(|e| Error::io("training log", e))?;
        }
        log.push(record);

        let final_epoch = epoch == cfg.epochs;
        let due = cfg.snapshot_every != 0 && epoch % cfg.snapshot_every == 0;
        if let Some(path) = snapshot_path {
            if due || final_epoch {
                let ckpt = snapshot(
                    epoch as u64,
                    cfg,
                    &net_c,
                    &net_b,
                    &codes_c,
                    &codes_b,
                    &adam_net_c,
                    &adam_net_b,
                    &adam_codes_c,
                    &adam_codes_b,
                    &rng,
                );
                ckpt.write_to(path)?;
            }
        }
    }

    let checkpoint = snapshot(
        cfg.epochs as u64,
        cfg,
        &net_c,
        &net_b,
        &codes_c,
        &codes_b,
        &adam_net_c,
        &adam_net_b,
        &adam_codes_c,
        &adam_codes_b,
        &rng,
    );
    Ok(TrainOutcome {
        model: Model {
            net_c,
            net_b,
            codes_c,
            codes_b,
            mask: cfg.mask,
            weights: cfg.weights,
        },
        log,
        checkpoint,
    })
}

/// Adam over the flattened code table.
fn step_codes(
    adam: &mut AdamState,
    codes: &mut [Vec<f64>],
    grads: &[f64],
    dim: usize,
) -> Result<()> {
    let mut flat: Vec<f64> = codes.iter().flatten().copied().collect();
    adam.step(&mut flat, grads)?;
    for (i, code) in codes.iter_mut().enumerate() {
        code.copy_from_slice(&flat[i * dim..(i + 1) * dim]);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn snapshot(
    epoch: u64,
    cfg: &TrainConfig,
    net_c: &Network,
    net_b: &Network,
    codes_c: &[Vec<f64>],
    codes_b: &[Vec<f64>],
    adam_net_c: &AdamState,
    adam_net_b: &AdamState,
    adam_codes_c: &AdamState,
    adam_codes_b: &AdamState,
    rng: &ChaCha20Rng,
) -> Checkpoint {
    Checkpoint {
        epoch,
        arch_c: cfg.arch_c,
        arch_b: cfg.arch_b,
        mask: cfg.mask,
        net_c: net_c.params().to_vec(),
        net_b: net_b.params().to_vec(),
        codes_c: codes_c.to_vec(),
        codes_b: codes_b.to_vec(),
        adam_net_c: adam_net_c.clone(),
        adam_net_b: adam_net_b.clone(),
        adam_codes_c: adam_codes_c.clone(),
        adam_codes_b: adam_codes_b.clone(),
        rng: RngSnapshot::capture(rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::loss::test_support::analytic_probe_set;

    fn tiny_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            arch_c: Architecture {
                code_dim: 8,
                hidden_width: 24,
                depth: 3,
                skip_layer: 1,
            },
            arch_b: Architecture {
                code_dim: 4,
                hidden_width: 24,
                depth: 3,
                skip_layer: 1,
            },
            epochs,
            points_per_shape: 0,
            shapes_per_batch: 0,
            seed: 3,
            snapshot_every: 0,
            ..TrainConfig::default()
        }
    }

    fn one_shape_dataset(n_points: usize, seed: u64) -> Vec<ProbeSet> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        vec![analytic_probe_set(n_points, 0.4, &mut rng)]
    }

    #[test]
    fn loss_drops_tenfold_on_one_shape() {
        let dataset = one_shape_dataset(800, 1);
        let cfg = TrainConfig {
            lr_net: 1e-3,
            ..tiny_config(800)
        };
        let out = train(&dataset, &cfg, None, None).unwrap();
        let first = out.log.first().unwrap().total();
        let last = out.log.last().unwrap().total();
        assert!(
            last * 10.0 <= first,
            "loss {first} → {last}, less than 10× decrease"
        );
    }

    #[test]
    fn frozen_net_code_descent_is_monotone() {
        let dataset = one_shape_dataset(400, 2);
        let cfg = TrainConfig {
            weights: LossWeights {
                lambda_s: 0.0,
                lambda_n: 0.0,
                lambda_reg: 0.0,
                ..Default::default()
            },
            freeze_net: true,
            lr_codes: 1e-3,
            ..tiny_config(40)
        };
        let out = train(&dataset, &cfg, None, None).unwrap();
        for pair in out.log.windows(2) {
            assert!(
                pair[1].total() <= pair[0].total() + 1e-9,
                "BCE rose between epochs {} and {}: {} → {}",
                pair[0].epoch,
                pair[1].epoch,
                pair[0].total(),
                pair[1].total()
            );
        }
    }

    #[test]
    fn training_is_bit_reproducible() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let dataset = vec![
            analytic_probe_set(300, 0.4, &mut rng),
            analytic_probe_set(300, 0.3, &mut rng),
        ];
        let cfg = TrainConfig {
            points_per_shape: 128, // exercise the subsampling path
            shapes_per_batch: 1,
            ..tiny_config(20)
        };
        let a = train(&dataset, &cfg, None, None).unwrap();
        let b = train(&dataset, &cfg, None, None).unwrap();
        assert_eq!(a.model.net_c.params(), b.model.net_c.params());
        assert_eq!(a.model.net_b.params(), b.model.net_b.params());
        assert_eq!(a.model.codes_c, b.model.codes_c);
        assert_eq!(a.model.codes_b, b.model.codes_b);
        for (ra, rb) in a.log.iter().zip(&b.log) {
            assert_eq!(
                (ra.l_cb, ra.l_f, ra.l_r, ra.l_reg),
                (rb.l_cb, rb.l_f, rb.l_r, rb.l_reg)
            );
        }
    }

    #[test]
    fn log_and_snapshot_artifacts_are_written() {
        let dataset = one_shape_dataset(200, 7);
        let dir = tempfile::tempdir().unwrap();
        let ckpt_path = dir.path().join("latest.ckpt");
        let mut log_buf = Vec::new();
        let cfg = TrainConfig {
            snapshot_every: 2,
            ..tiny_config(4)
        };
        let out = train(&dataset, &cfg, Some(&mut log_buf), Some(&ckpt_path)).unwrap();

        let text = String::from_utf8(log_buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let parsed: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(parsed["epoch"], 3);
        for key in ["L_CB", "L_F", "L_R", "L_reg", "wall_time"] {
            assert!(parsed[key].is_number(), "missing {key} in {parsed}");
        }

        let ckpt = Checkpoint::read_from(&ckpt_path).unwrap();
        assert_eq!(ckpt.epoch, 4);
        assert_eq!(ckpt.codes_c.len(), 1);
        ckpt.expect_arch(&cfg.arch_c, &cfg.arch_b).unwrap();
        // The returned checkpoint carries full precision; the reloaded one
        // was narrowed to f32, so compare shapes rather than bits.
        assert_eq!(out.checkpoint.epoch, ckpt.epoch);
        assert_eq!(out.checkpoint.net_c.len(), ckpt.net_c.len());

        let model = Model::from_checkpoint(&ckpt, cfg.weights).unwrap();
        assert_eq!(model.net_c.param_count(), cfg.arch_c.param_count());
    }

    #[test]
    fn poisoned_labels_abort_with_diagnostics() {
        let mut dataset = one_shape_dataset(50, 9);
        dataset[0].points[13].f.sdf = f32::NAN;
        let err = train(&dataset, &tiny_config(3), None, None).unwrap_err();
        match err {
            Error::NonFiniteLoss { epoch, shape, detail } => {
                assert_eq!(epoch, 1);
                assert_eq!(shape, "0");
                assert!(detail.contains("L_F"), "{detail}");
            }
            other => panic!("expected NonFiniteLoss, got {other}"),
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dataset = one_shape_dataset(10, 11);
        let mut cfg = tiny_config(0);
        assert!(train(&dataset, &cfg, None, None).is_err());
        cfg.epochs = 1;
        cfg.lr_net = 0.0;
        assert!(train(&dataset, &cfg, None, None).is_err());
        cfg.lr_net = 1e-4;
        assert!(train(&[], &cfg, None, None).is_err());
    }
}
