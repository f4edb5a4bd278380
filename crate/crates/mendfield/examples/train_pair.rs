//! Training the autodecoder on a small set of shapes.
//!
//! Two networks (complete and break) share nothing but the training loop;
//! every shape owns one latent code per network, optimized jointly with the
//! weights. The checkpoint written at the end restores the exact model.

use std::error::Error;
use std::fs;
use std::path::Path;

use mendfield::fracture::{
    attempt_fracture, FractureOutcome, FractureParams, FracturePrimitiveSpec,
};
use mendfield::geometry::marching_cubes;
use mendfield::learn::{train, Model, TrainConfig};
use mendfield::neural::{Architecture, Checkpoint};
use mendfield::pipeline::{Family, ShapeRecipe};
use mendfield::sampling::{label_points, sample_points, DEFAULT_NOISE_SIGMAS};

fn main() -> Result<(), Box<dyn Error>> {
    // Build a tiny dataset: two fractured spheres.
    let params = FractureParams {
        mesh_resolution: 48,
        ..FractureParams::default()
    };
    let spec = FracturePrimitiveSpec::default();
    let mut dataset = Vec::new();
    for shape_seed in 0..2u64 {
        let recipe = ShapeRecipe {
            family: Family::Spheres,
            seed: 100 + shape_seed,
        };
        let field = recipe.field();
        let mesh = marching_cubes(|p| field.sdf(p), params.mesh_resolution, 0.0);
        let tuple = (0..10)
            .find_map(|s| {
                match attempt_fracture(field.clone(), &mesh, &spec, s, &params).ok()? {
                    FractureOutcome::Accepted(tuple) => Some(tuple),
                    FractureOutcome::Rejected { .. } => None,
                }
            })
            .expect("some seed fractures a sphere");
        let points = sample_points(&tuple, 2000, 0.9, DEFAULT_NOISE_SIGMAS, shape_seed)?;
        dataset.push(label_points(&tuple, &points));
    }
    println!("dataset: {} shapes, {} probes each", dataset.len(), dataset[0].len());

    let small = |code_dim| Architecture {
        code_dim,
        hidden_width: 32,
        depth: 3,
        skip_layer: 1,
    };
    let cfg = TrainConfig {
        arch_c: small(8),
        arch_b: small(6),
        epochs: 200,
        points_per_shape: 512,
        snapshot_every: 0,
        ..TrainConfig::default()
    };

    let out = Path::new("target/examples/train_pair");
    fs::create_dir_all(out)?;
    let ckpt_path = out.join("checkpoint.bin");
    let outcome = train(&dataset, &cfg, None, Some(&ckpt_path))?;

    println!("\nloss trajectory (every 40 epochs):");
    for record in outcome.log.iter().step_by(40).chain(outcome.log.last()) {
        println!(
            "  epoch {:>4}: L_CB {:.4}  L_F {:.4}  L_R {:.4}  L_reg {:.6}",
            record.epoch, record.l_cb, record.l_f, record.l_r, record.l_reg
        );
    }

    // The checkpoint stores parameters in f32; the restored model predicts
    // the same fields to that precision.
    let restored = Model::from_checkpoint(&Checkpoint::read_from(&ckpt_path)?, cfg.weights)?;
    let z = &outcome.model.codes_c[0];
    let p = mendfield::math::Vec3::new(0.1, -0.05, 0.2);
    let (occ_a, sdf_a, _) = outcome.model.net_c.forward_one(z, p, cfg.mask)?;
    let (occ_b, sdf_b, _) = restored.net_c.forward_one(&restored.codes_c[0], p, cfg.mask)?;
    assert!((occ_a - occ_b).abs() < 1e-6 && (sdf_a - sdf_b).abs() < 1e-6);
    println!("\ncheckpoint round trip: occ {occ_a:.4}, sdf {sdf_a:+.4} reproduced");
    Ok(())
}
