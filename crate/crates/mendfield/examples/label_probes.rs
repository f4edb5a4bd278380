//! Turning a fractured shape into labeled training probes.
//!
//! Points are drawn mostly near the fractured surface (two noise scales)
//! plus a uniform remainder, then labeled against all four shapes at once:
//! complete, break, fractured, and restoration. The binary probe file
//! round-trips exactly.

use std::error::Error;
use std::fs;
use std::path::Path;

use mendfield::fracture::{
    attempt_fracture, FractureOutcome, FractureParams, FracturePrimitiveSpec,
};
use mendfield::geometry::marching_cubes;
use mendfield::pipeline::{Family, ShapeRecipe};
use mendfield::sampling::{
    label_points, sample_points, ProbeSet, ShapeKind, DEFAULT_NOISE_SIGMAS,
};

fn main() -> Result<(), Box<dyn Error>> {
    let recipe = ShapeRecipe {
        family: Family::Bowls,
        seed: 4,
    };
    let field = recipe.field();
    let params = FractureParams::default();
    let mesh = marching_cubes(|p| field.sdf(p), params.mesh_resolution, 0.0);

    let spec = FracturePrimitiveSpec::default();
    let tuple = (0..10)
        .find_map(|seed| {
            match attempt_fracture(field.clone(), &mesh, &spec, seed, &params).ok()? {
                FractureOutcome::Accepted(tuple) => Some(tuple),
                FractureOutcome::Rejected { .. } => None,
            }
        })
        .expect("some seed fractures the bowl");
    println!(
        "fractured a bowl: removed {:.1}% of vertices",
        100.0 * tuple.removed_fraction
    );

    let n = 20_000;
    let points = sample_points(&tuple, n, 0.9, DEFAULT_NOISE_SIGMAS, 7)?;
    let probes = label_points(&tuple, &points);

    println!("\nlabel statistics over {n} probes:");
    for kind in ShapeKind::ALL {
        let inside = probes
            .points
            .iter()
            .filter(|p| p.label(kind).occ == 1)
            .count();
        let mean_abs_sdf: f64 = probes
            .points
            .iter()
            .map(|p| f64::from(p.label(kind).sdf).abs())
            .sum::<f64>()
            / n as f64;
        println!(
            "  {kind:?}: {:5.1}% inside, mean |sdf| {:.4}",
            100.0 * inside as f64 / n as f64,
            mean_abs_sdf
        );
    }

    let out = Path::new("target/examples/label_probes");
    fs::create_dir_all(out)?;
    let path = out.join("samples.bin");
    probes.write_to(&path)?;
    let back = ProbeSet::read_from(&path)?;
    assert_eq!(back.points.len(), probes.points.len());
    println!("\nwrote and re-read {} probes at {}", back.len(), path.display());
    Ok(())
}
