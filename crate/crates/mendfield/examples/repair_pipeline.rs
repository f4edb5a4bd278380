//! The whole repair pipeline, end to end, in one process.
//!
//! The five stages — fracture, sample, train, infer, eval — communicate
//! only through files in one output directory, exactly as the `mendfield`
//! binary runs them. This example drives them through the library API on a
//! deliberately tiny dataset.

use std::error::Error;
use std::fs;
use std::path::Path;

use mendfield::neural::Architecture;
use mendfield::pipeline::{
    cmd_eval, cmd_fracture, cmd_infer, cmd_sample, cmd_train, Family, PipelineConfig, Split,
};

fn main() -> Result<(), Box<dyn Error>> {
    let mut config = PipelineConfig::default();
    config.dataset.classes = vec![Family::Spheres, Family::Boxes];
    config.dataset.shapes_per_class = 4;
    config.dataset.fracture_params.mesh_resolution = 48;
    config.sampling.n_points = 3000;
    config.train.arch_c = Architecture {
        code_dim: 8,
        hidden_width: 32,
        depth: 3,
        skip_layer: 1,
    };
    config.train.arch_b = Architecture {
        code_dim: 6,
        hidden_width: 32,
        depth: 3,
        skip_layer: 1,
    };
    config.train.epochs = 250;
    config.train.points_per_shape = 512;
    config.train.snapshot_every = 0;
    config.infer.steps = 150;
    config.infer.resolution = 48;
    config.eval.n_samples = 4000;

    let out = Path::new("target/examples/repair_pipeline");
    if out.exists() {
        fs::remove_dir_all(out)?;
    }

    let manifest = cmd_fracture(&config, out)?;
    println!(
        "fracture: {} accepted ({} train / {} test), {} rejected",
        manifest.shapes.len(),
        manifest.split_shapes(Split::Train).len(),
        manifest.split_shapes(Split::Test).len(),
        manifest.rejected.len()
    );

    let sampled = cmd_sample(&config, out)?;
    println!("sample: {} probes per shape", sampled.points_per_shape);

    let outcome = cmd_train(&config, out)?;
    let last = outcome.log.last().expect("trained at least one epoch");
    println!(
        "train: {} epochs, final L_CB {:.4} L_F {:.4} L_R {:.4}",
        last.epoch, last.l_cb, last.l_f, last.l_r
    );

    let inferred = cmd_infer(&config, out)?;
    for shape in &inferred.shapes {
        println!(
            "infer: {} -> {}",
            shape.name,
            if shape.empty { "empty restoration" } else { "restoration extracted" }
        );
    }

    let report = cmd_eval(&config, out)?;
    println!("\neval report ({} shapes):", report.shapes.len());
    print!("{}", report.to_csv());
    println!("\nartifacts live under {}", out.display());
    Ok(())
}
