//! Evaluation metrics for repaired shapes — chamfer distance, normal
//! consistency, non-fractured region error, non-empty percentage — and
//! report aggregation.
//!
//! All mesh metrics work on area-weighted surface samples and exact
//! nearest-neighbor queries. Each mesh is sampled with a fresh generator
//! seeded only by the metric's seed argument, so identical meshes always
//! produce identical sample clouds and self-comparisons are exact.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::learn::InferenceResult;
use crate::math::Vec3;
use crate::spatial::KdTree;

/// Surface samples drawn per mesh for the mesh-to-mesh metrics.
pub const DEFAULT_EVAL_SAMPLES: usize = 30_000;

/// Distance threshold for the non-fractured region error predicate.
pub const DEFAULT_NFRE_ETA: f64 = 0.02;

/// Area-weighted surface samples of `mesh` as parallel point and normal
/// clouds, drawn from a generator seeded with `seed` alone.
fn surface_clouds(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let samples = mesh.sample_surface(n, &mut rng);
    if samples.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(samples.into_iter().unzip())
}

/// Mean squared nearest-neighbor distance from every point in `from` to
/// the cloud indexed by `to`.
fn mean_sq_nearest(from: &[Vec3], to: &KdTree) -> f64 {
    let total: f64 = from.iter().map(|&p| to.nearest(p).1).sum();
    total / from.len() as f64
}

/// Chamfer distance between two point clouds: the sum of the two mean
/// squared nearest-neighbor distances. Symmetric, zero for identical
/// clouds, and in squared length units.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> f64 {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "chamfer distance of an empty cloud"
    );
    let tree_a = KdTree::build(a.to_vec());
    let tree_b = KdTree::build(b.to_vec());
    mean_sq_nearest(a, &tree_b) + mean_sq_nearest(b, &tree_a)
}

/// Chamfer distance between two mesh surfaces over `n_samples`
/// area-weighted samples per mesh.
pub fn chamfer_distance(
    a: &TriangleMesh,
    b: &TriangleMesh,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let (cloud_a, _) = surface_clouds(a, n_samples, seed)?;
    let (cloud_b, _) = surface_clouds(b, n_samples, seed)?;
    Ok(chamfer_points(&cloud_a, &cloud_b))
}

/// Normal consistency between two mesh surfaces: the symmetrized mean
/// absolute dot product between each sample's normal and the normal of
/// its nearest neighbor on the other surface. In [0, 1], 1 for identical
/// meshes regardless of orientation.
pub fn normal_consistency(
    a: &TriangleMesh,
    b: &TriangleMesh,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let (points_a, normals_a) = surface_clouds(a, n_samples, seed)?;
    let (points_b, normals_b) = surface_clouds(b, n_samples, seed)?;
    let tree_a = KdTree::build(points_a.clone());
    let tree_b = KdTree::build(points_b.clone());
    let one_way = |points: &[Vec3], normals: &[Vec3], tree: &KdTree, other: &[Vec3]| -> f64 {
        let total: f64 = points
            .iter()
            .zip(normals)
            .map(|(&p, n)| n.dot(&other[tree.nearest(p).0]).abs())
            .sum();
        total / points.len() as f64
    };
    let forward = one_way(&points_a, &normals_a, &tree_b, &normals_b);
    let backward = one_way(&points_b, &normals_b, &tree_a, &normals_a);
    Ok(0.5 * (forward + backward))
}

/// Non-fractured region error: the fraction of points sampled on the
/// non-fractured part of the fractured surface whose nearest neighbor on
/// the predicted restoration is closer than `eta` while their nearest
/// neighbor on the ground-truth restoration is farther than `eta` — i.e.
/// how much of the intact surface the prediction wrongly coats.
///
/// `fracture_region` returns true for points on the fracture surface;
/// samples where it holds are rejected. An empty prediction scores 0.
pub fn nfre<M: Fn(Vec3) -> bool>(
    fractured: &TriangleMesh,
    fracture_region: M,
    predicted_r: &TriangleMesh,
    gt_r: &TriangleMesh,
    n_samples: usize,
    eta: f64,
    seed: u64,
) -> Result<f64> {
    assert!(n_samples > 0, "nfre needs at least one sample");
    if fractured.is_empty() || gt_r.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if predicted_r.is_empty() {
        return Ok(0.0);
    }

    // Rejection-sample the non-fractured region of the fractured surface.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut kept: Vec<Vec3> = Vec::with_capacity(n_samples);
    let mut draws = 0usize;
    let max_draws = n_samples.saturating_mul(64);
    while kept.len() < n_samples && draws < max_draws {
        let batch = fractured.sample_surface(n_samples, &mut rng);
        if batch.is_empty() {
            break;
        }
        for (p, _) in batch {
            draws += 1;
            if !fracture_region(p) {
                kept.push(p);
                if kept.len() == n_samples {
                    break;
                }
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::DegenerateInput(
            "fracture region mask rejected every surface sample".into(),
        ));
    }

    let predicted_cloud = match surface_clouds(predicted_r, n_samples, seed.wrapping_add(1)) {
        Ok((points, _)) => points,
        Err(_) => return Ok(0.0),
    };
    let (gt_cloud, _) = surface_clouds(gt_r, n_samples, seed.wrapping_add(1))?;
    let predicted_tree = KdTree::build(predicted_cloud);
    let gt_tree = KdTree::build(gt_cloud);

    let eta_sq = eta * eta;
    let hits = kept
        .iter()
        .filter(|&&p| predicted_tree.nearest(p).1 < eta_sq && gt_tree.nearest(p).1 > eta_sq)
        .count();
    Ok(hits as f64 / kept.len() as f64)
}

/// Percentage of inference results whose restoration mesh has triangles.
pub fn non_empty_pct(results: &[InferenceResult]) -> f64 {
    assert!(!results.is_empty(), "non_empty_pct of an empty result list");
    let non_empty = results
        .iter()
        .filter(|r| !r.restoration.is_empty())
        .count();
    100.0 * non_empty as f64 / results.len() as f64
}

/// Metrics for one evaluated shape. Mesh metrics are `None` when they
/// could not be computed (an empty restoration has no chamfer distance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEval {
    pub name: String,
    pub class: String,
    #[serde(rename = "CD")]
    pub cd: Option<f64>,
    #[serde(rename = "NC")]
    pub nc: Option<f64>,
    #[serde(rename = "NFRE")]
    pub nfre: Option<f64>,
    pub empty: bool,
}

/// Per-class metric means. Means cover non-empty restorations only;
/// `ne_pct` covers every attempt in the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: String,
    pub shapes: usize,
    #[serde(rename = "CD")]
    pub cd: Option<f64>,
    #[serde(rename = "NC")]
    pub nc: Option<f64>,
    #[serde(rename = "NFRE")]
    pub nfre: Option<f64>,
    #[serde(rename = "NE_pct")]
    pub ne_pct: f64,
}

/// Full evaluation report: one record per shape, per-class means over
/// non-empty restorations, and the overall non-empty percentage over all
/// attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub shapes: Vec<ShapeEval>,
    pub classes: Vec<ClassSummary>,
    #[serde(rename = "NE_pct")]
    pub ne_pct: f64,
}

impl EvalReport {
    /// Groups shape records by class (in first-appearance order) and
    /// computes the summary means.
    pub fn aggregate(shapes: Vec<ShapeEval>) -> EvalReport {
        let mut order: Vec<&str> = Vec::new();
        for s in &shapes {
            if !order.contains(&s.class.as_str()) {
                order.push(&s.class);
            }
        }
        let classes = order
            .iter()
            .map(|&class| {
                let members: Vec<&ShapeEval> =
                    shapes.iter().filter(|s| s.class == class).collect();
                let solid: Vec<&ShapeEval> =
                    members.iter().copied().filter(|s| !s.empty).collect();
                let mean_of = |field: fn(&ShapeEval) -> Option<f64>| -> Option<f64> {
                    let values: Vec<f64> = solid.iter().filter_map(|s| field(s)).collect();
                    (!values.is_empty())
                        .then(|| values.iter().sum::<f64>() / values.len() as f64)
                };
                ClassSummary {
                    class: class.to_string(),
                    shapes: members.len(),
                    cd: mean_of(|s| s.cd),
                    nc: mean_of(|s| s.nc),
                    nfre: mean_of(|s| s.nfre),
                    ne_pct: 100.0 * solid.len() as f64 / members.len() as f64,
                }
            })
            .collect();
        let non_empty = shapes.iter().filter(|s| !s.empty).count();
        let ne_pct = if shapes.is_empty() {
            0.0
        } else {
            100.0 * non_empty as f64 / shapes.len() as f64
        };
        EvalReport {
            shapes,
            classes,
            ne_pct,
        }
    }

    /// CSV rendering with one column per class and one row per metric;
    /// unavailable means render as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for c in &self.classes {
            write!(out, ",{}", c.class).unwrap();
        }
        out.push('\n');
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for (label, field) in [
            ("CD", (|c: &ClassSummary| c.cd) as fn(&ClassSummary) -> Option<f64>),
            ("NC", |c| c.nc),
            ("NFRE", |c| c.nfre),
        ] {
            out.push_str(label);
            for c in &self.classes {
                write!(out, ",{}", cell(field(c))).unwrap();
            }
            out.push('\n');
        }
        out.push_str("NE%");
        for c in &self.classes {
            write!(out, ",{:.2}", c.ne_pct).unwrap();
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn translated(mesh: &TriangleMesh, delta: Vec3) -> TriangleMesh {
        TriangleMesh::new(
            mesh.vertices.iter().map(|&p| p + delta).collect(),
            mesh.triangles.clone(),
        )
        .unwrap()
    }

    /// Single quad in the z = `z` plane; `flip` reverses its winding.
    fn quad_at(z: f64, flip: bool) -> TriangleMesh {
        let vertices = vec![
            v(-1.0, -1.0, z),
            v(1.0, -1.0, z),
            v(1.0, 1.0, z),
            v(-1.0, 1.0, z),
        ];
        let triangles = if flip {
            vec![[0, 2, 1], [0, 3, 2]]
        } else {
            vec![[0, 1, 2], [0, 2, 3]]
        };
        TriangleMesh::new(vertices, triangles).unwrap()
    }

    fn unit_cube() -> TriangleMesh {
        TriangleMesh::cuboid(v(-0.5, -0.5, -0.5), v(0.5, 0.5, 0.5))
    }

    #[test]
    fn chamfer_of_identical_meshes_is_exactly_zero() {
        let a = TriangleMesh::icosphere(0.4, 2);
        let b = TriangleMesh::icosphere(0.4, 2);
        assert_eq!(chamfer_distance(&a, &b, 2000, 9).unwrap(), 0.0);
    }

    #[test]
    fn single_point_clouds_sum_their_squared_distances() {
        let a = [v(0.0, 0.0, 0.0)];
        let b = [v(1.0, 0.0, 0.0)];
        assert_eq!(chamfer_points(&a, &b), 2.0);
    }

    #[test]
    fn offset_cubes_match_a_brute_force_oracle() {
        let a = unit_cube();
        let b = translated(&a, v(0.1, 0.0, 0.0));
        let got = chamfer_distance(&a, &b, 8000, 11).unwrap();

        // Independent sampling, independent nearest-neighbor search.
        let mut rng_a = ChaCha20Rng::seed_from_u64(9701);
        let mut rng_b = ChaCha20Rng::seed_from_u64(9702);
        let cloud_a: Vec<Vec3> = a.sample_surface(8000, &mut rng_a).into_iter().map(|s| s.0).collect();
        let cloud_b: Vec<Vec3> = b.sample_surface(8000, &mut rng_b).into_iter().map(|s| s.0).collect();
        let brute = |from: &[Vec3], to: &[Vec3]| -> f64 {
            let total: f64 = from
                .iter()
                .map(|p| {
                    to.iter()
                        .map(|q| (p - q).norm_squared())
                        .fold(f64::INFINITY, f64::min)
                })
                .sum();
            total / from.len() as f64
        };
        let oracle = brute(&cloud_a, &cloud_b) + brute(&cloud_b, &cloud_a);
        assert_relative_eq!(got, oracle, max_relative = 0.02);
    }

    #[test]
    fn chamfer_is_symmetric() {
        let a = unit_cube();
        let b = TriangleMesh::icosphere(0.45, 2);
        let ab = chamfer_distance(&a, &b, 3000, 5).unwrap();
        let ba = chamfer_distance(&b, &a, 3000, 5).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn normal_consistency_of_identical_meshes_is_one() {
        let a = TriangleMesh::icosphere(0.5, 2);
        let b = TriangleMesh::icosphere(0.5, 2);
        let nc = normal_consistency(&a, &b, 2000, 3).unwrap();
        assert_relative_eq!(nc, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn opposite_parallel_planes_are_fully_consistent() {
        let a = quad_at(0.0, false);
        let b = quad_at(0.3, true);
        assert_eq!(normal_consistency(&a, &b, 1500, 3).unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_planes_have_zero_consistency() {
        let a = quad_at(0.0, false);
        // Same quad rotated onto the xz plane: normals are ±y.
        let b = TriangleMesh::new(
            vec![
                v(-1.0, 0.0, -1.0),
                v(1.0, 0.0, -1.0),
                v(1.0, 0.0, 1.0),
                v(-1.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        assert_eq!(normal_consistency(&a, &b, 1500, 3).unwrap(), 0.0);
    }

    #[test]
    fn normal_consistency_matches_a_brute_force_oracle() {
        let a = unit_cube();
        let b = translated(&TriangleMesh::icosphere(0.55, 1), v(0.05, 0.02, 0.0));
        let n = 600;
        let seed = 21;
        let got = normal_consistency(&a, &b, n, seed).unwrap();

        // Same clouds, brute-force nearest neighbors.
        let mut rng_a = ChaCha20Rng::seed_from_u64(seed);
        let mut rng_b = ChaCha20Rng::seed_from_u64(seed);
        let sa = a.sample_surface(n, &mut rng_a);
        let sb = b.sample_surface(n, &mut rng_b);
        let one_way = |from: &[(Vec3, Vec3)], to: &[(Vec3, Vec3)]| -> f64 {
            let total: f64 = from
                .iter()
                .map(|&(p, n)| {
                    let nearest = to
                        .iter()
                        .min_by(|x, y| {
                            (x.0 - p)
                                .norm_squared()
                                .total_cmp(&(y.0 - p).norm_squared())
                        })
                        .unwrap();
                    n.dot(&nearest.1).abs()
                })
                .sum();
            total / from.len() as f64
        };
        let oracle = 0.5 * (one_way(&sa, &sb) + one_way(&sb, &sa));
        assert_relative_eq!(got, oracle, epsilon = 1e-12);
    }

    /// Fixture for the region metric: a unit cube standing in for the
    /// fractured shape, its +++ corner octant declared the fracture
    /// region, a corner block as the true restoration, and a slab on the
    /// -x face as a spurious component coating intact surface.
    struct CornerCase {
        fractured: TriangleMesh,
        gt: TriangleMesh,
        slab: TriangleMesh,
    }

    fn corner_case() -> CornerCase {
        let fractured = unit_cube();
        let gt = TriangleMesh::cuboid(v(0.2, 0.2, 0.2), v(0.5, 0.5, 0.5));
        let slab = TriangleMesh::cuboid(v(-0.52, -0.3, -0.3), v(-0.5, 0.3, 0.3));
        CornerCase { fractured, gt, slab }
    }

    fn in_corner(p: Vec3) -> bool {
        p.x > 0.2 && p.y > 0.2 && p.z > 0.2
    }

    fn merged(a: &TriangleMesh, b: &TriangleMesh) -> TriangleMesh {
        let mut vertices = a.vertices.clone();
        let mut triangles = a.triangles.clone();
        let offset = vertices.len();
        vertices.extend_from_slice(&b.vertices);
        triangles.extend(
            b.triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        TriangleMesh::new(vertices, triangles).unwrap()
    }

    #[test]
    fn perfect_prediction_scores_zero() {
        let case = corner_case();
        let score = nfre(
            &case.fractured,
            in_corner,
            &case.gt,
            &case.gt,
            2000,
            DEFAULT_NFRE_ETA,
            7,
        )
        .unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn coating_the_whole_intact_surface_scores_one() {
        // η comfortably above the sample spacing, so every intact-surface
        // point finds a predicted neighbor and the predicate always fires.
        let cube = unit_cube();
        let far_gt = translated(&cube, v(10.0, 0.0, 0.0));
        let score = nfre(&cube, |_| false, &cube, &far_gt, 4000, 0.12, 7).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let case = corner_case();
        let score = nfre(
            &case.fractured,
            in_corner,
            &TriangleMesh::empty(),
            &case.gt,
            500,
            DEFAULT_NFRE_ETA,
            7,
        )
        .unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn region_error_matches_a_direct_predicate_oracle() {
        let case = corner_case();
        let predicted = merged(&case.gt, &case.slab);
        let n = 2500;
        let seed = 13;
        let eta = DEFAULT_NFRE_ETA;
        let got = nfre(&case.fractured, in_corner, &predicted, &case.gt, n, eta, seed).unwrap();
        assert!(got > 0.0, "slab on an intact face must register");

        // Mirror the sampling procedure, then evaluate the predicate by
        // brute force.
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut kept: Vec<Vec3> = Vec::new();
        while kept.len() < n {
            for (p, _) in case.fractured.sample_surface(n, &mut rng) {
                if !in_corner(p) {
                    kept.push(p);
                    if kept.len() == n {
                        break;
                    }
                }
            }
        }
        let cloud = |mesh: &TriangleMesh| -> Vec<Vec3> {
            let mut rng = ChaCha20Rng::seed_from_u64(seed + 1);
            mesh.sample_surface(n, &mut rng).into_iter().map(|s| s.0).collect()
        };
        let predicted_cloud = cloud(&predicted);
        let gt_cloud = cloud(&case.gt);
        let nearest = |p: Vec3, cloud: &[Vec3]| -> f64 {
            cloud
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        };
        let hits = kept
            .iter()
            .filter(|&&p| nearest(p, &predicted_cloud) < eta && nearest(p, &gt_cloud) > eta)
            .count();
        let oracle = hits as f64 / kept.len() as f64;
        assert_eq!(got, oracle);
    }

    #[test]
    fn adding_an_artifact_never_lowers_the_region_error() {
        let case = corner_case();
        let clean = nfre(
            &case.fractured,
            in_corner,
            &case.gt,
            &case.gt,
            2000,
            DEFAULT_NFRE_ETA,
            7,
        )
        .unwrap();
        let with_slab = nfre(
            &case.fractured,
            in_corner,
            &merged(&case.gt, &case.slab),
            &case.gt,
            2000,
            DEFAULT_NFRE_ETA,
            7,
        )
        .unwrap();
        assert!(with_slab >= clean);
        assert!(with_slab > 0.0);
    }

    #[test]
    fn empty_meshes_are_rejected() {
        let sphere = TriangleMesh::icosphere(0.4, 1);
        let empty = TriangleMesh::empty();
        assert!(matches!(
            chamfer_distance(&empty, &sphere, 100, 0),
            Err(Error::EmptyMesh)
        ));
        assert!(matches!(
            normal_consistency(&sphere, &empty, 100, 0),
            Err(Error::EmptyMesh)
        ));
        assert!(matches!(
            nfre(&empty, |_| false, &sphere, &sphere, 100, 0.02, 0),
            Err(Error::EmptyMesh)
        ));
        assert!(matches!(
            nfre(&sphere, |_| false, &sphere, &empty, 100, 0.02, 0),
            Err(Error::EmptyMesh)
        ));
    }

    fn result_with(restoration: TriangleMesh) -> InferenceResult {
        let empty = restoration.is_empty();
        InferenceResult {
            z_c: vec![0.0],
            z_b: vec![0.0],
            restoration,
            complete: TriangleMesh::empty(),
            trace: Vec::new(),
            empty,
        }
    }

    #[test]
    fn non_empty_percentage_is_plain_arithmetic() {
        let solid = TriangleMesh::icosphere(0.3, 0);
        let all: Vec<InferenceResult> =
            (0..4).map(|_| result_with(solid.clone())).collect();
        assert_eq!(non_empty_pct(&all), 100.0);

        let none: Vec<InferenceResult> =
            (0..4).map(|_| result_with(TriangleMesh::empty())).collect();
        assert_eq!(non_empty_pct(&none), 0.0);

        let mut mixed: Vec<InferenceResult> =
            (0..79).map(|_| result_with(solid.clone())).collect();
        mixed.push(result_with(TriangleMesh::empty()));
        assert_eq!(non_empty_pct(&mixed), 98.75);
    }

    fn shape_eval(name: &str, class: &str, cd: f64, empty: bool) -> ShapeEval {
        ShapeEval {
            name: name.into(),
            class: class.into(),
            cd: (!empty).then_some(cd),
            nc: (!empty).then_some(0.9),
            nfre: (!empty).then_some(0.01),
            empty,
        }
    }

    #[test]
    fn report_means_skip_empty_restorations_but_count_them() {
        let report = EvalReport::aggregate(vec![
            shape_eval("a0", "boxes", 0.02, false),
            shape_eval("a1", "boxes", 0.04, false),
            shape_eval("a2", "boxes", 99.0, true),
            shape_eval("b0", "bowls", 0.10, false),
        ]);
        assert_eq!(report.classes.len(), 2);
        let boxes = &report.classes[0];
        assert_eq!(boxes.class, "boxes");
        assert_eq!(boxes.shapes, 3);
        assert_relative_eq!(boxes.cd.unwrap(), 0.03, epsilon = 1e-12);
        assert_relative_eq!(boxes.ne_pct, 200.0 / 3.0, epsilon = 1e-12);
        assert_eq!(report.classes[1].cd, Some(0.10));
        assert_relative_eq!(report.ne_pct, 75.0, epsilon = 1e-12);
    }

    #[test]
    fn all_empty_classes_report_null_means() {
        let report = EvalReport::aggregate(vec![
            shape_eval("a0", "boxes", 0.0, true),
            shape_eval("a1", "boxes", 0.0, true),
        ]);
        assert_eq!(report.ne_pct, 0.0);
        let boxes = &report.classes[0];
        assert_eq!(boxes.cd, None);
        assert_eq!(boxes.nc, None);
        assert_eq!(boxes.nfre, None);
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["classes"][0]["CD"].is_null());
        assert_eq!(json["NE_pct"], 0.0);
    }

    #[test]
    fn csv_lays_out_one_class_per_column() {
        let report = EvalReport::aggregate(vec![
            shape_eval("a0", "boxes", 0.02, false),
            shape_eval("b0", "bowls", 0.10, true),
        ]);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,boxes,bowls");
        assert_eq!(lines[1], "CD,0.020000,");
        assert!(lines[2].starts_with("NC,"));
        assert!(lines[3].starts_with("NFRE,"));
        assert_eq!(lines[4], "NE%,100.00,0.00");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = EvalReport::aggregate(vec![
            shape_eval("a0", "boxes", 0.02, false),
            shape_eval("a1", "boxes", 0.0, true),
        ]);
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn metric_ranges_hold_for_random_mesh_pairs(
            radius in 0.2f64..0.6,
            dx in -0.3f64..0.3,
            dy in -0.3f64..0.3,
            seed in 0u64..1000,
        ) {
            let a = unit_cube();
            let b = translated(&TriangleMesh::icosphere(radius, 1), v(dx, dy, 0.0));
            let cd = chamfer_distance(&a, &b, 400, seed).unwrap();
            prop_assert!(cd >= 0.0);
            let nc = normal_consistency(&a, &b, 400, seed).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&nc));
            let region = nfre(&a, |p| p.x > 0.0, &b, &a, 400, 0.05, seed).unwrap();
            prop_assert!((0.0..=1.0).contains(&region));
        }
    }
}
