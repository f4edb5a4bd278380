//! Scoring a predicted restoration against ground truth.
//!
//! Chamfer distance (squared-distance, so units are cube-lengths²) and
//! normal consistency compare two meshes as sampled surfaces; the
//! non-fractured region error (NFRE) instead asks how much predicted
//! material leans on parts of the fractured shape that were never broken.

use std::error::Error;

use mendfield::geometry::TriangleMesh;
use mendfield::math::Vec3;
use mendfield::metrics::{chamfer_distance, nfre, normal_consistency};

fn main() -> Result<(), Box<dyn Error>> {
    let sphere = TriangleMesh::icosphere(0.3, 3);
    let mut shifted = sphere.clone();
    for v in &mut shifted.vertices {
        v.x += 0.02;
    }

    println!("icosphere vs itself:");
    println!("  CD {:.6}", chamfer_distance(&sphere, &sphere, 20_000, 1)?);
    println!("  NC {:.4}", normal_consistency(&sphere, &sphere, 20_000, 1)?);
    println!("icosphere vs copy shifted by 0.02:");
    println!("  CD {:.6}", chamfer_distance(&sphere, &shifted, 20_000, 1)?);
    println!("  NC {:.4}", normal_consistency(&sphere, &shifted, 20_000, 1)?);

    // NFRE setup: a cube lost its top slab. The fracture region is the
    // exposed cut at z = 0.3; everything else is original surface.
    let fractured = TriangleMesh::cuboid(Vec3::new(-0.3, -0.3, -0.3), Vec3::new(0.3, 0.3, 0.3));
    let gt_restoration =
        TriangleMesh::cuboid(Vec3::new(-0.3, -0.3, 0.3), Vec3::new(0.3, 0.3, 0.4));
    let region = |p: Vec3| p.z > 0.3 - 1e-6;

    // A perfect prediction never encroaches on the intact surface.
    let eta = 0.02;
    let perfect = nfre(&fractured, region, &gt_restoration, &gt_restoration, 20_000, eta, 9)?;
    println!("\nNFRE of the exact restoration: {perfect:.4}");

    // A bad prediction hugging a side face trips the metric there.
    let artifact =
        TriangleMesh::cuboid(Vec3::new(0.3, -0.3, -0.3), Vec3::new(0.35, 0.3, 0.3));
    let bad = nfre(&fractured, region, &artifact, &gt_restoration, 20_000, eta, 9)?;
    println!("NFRE of a slab stuck to an intact face: {bad:.4}");
    Ok(())
}
