//! Isosurface extraction on a regular grid over the padded unit cube.

use std::collections::HashMap;

use crate::geometry::mc_tables::{EDGE_CORNERS, EDGE_TABLE, TRIANGLE_TABLE};
use crate::geometry::mesh::TriangleMesh;
use crate::math::Vec3;

/// Fraction of the unit cube added on every side of the extraction grid, so
/// surfaces touching the cube boundary are not clipped.
pub const GRID_PADDING: f64 = 0.1;

/// Half-extent of the extraction grid: the cube [-0.6, 0.6]³.
pub const GRID_HALF_EXTENT: f64 = 0.5 + GRID_PADDING;

/// Grid values exactly equal to the iso-level are nudged above it by this
/// amount so every crossing is strict and cell classification is consistent
/// across neighboring cells.
const ISO_NUDGE: f64 = 1e-12;

/// For each cube edge, the (low, high) corner indices in the positive axis
/// direction. Interpolating always low → high makes a shared edge produce a
/// bit-identical vertex in both adjacent cells.
const CANONICAL_EDGE: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (3, 2),
    (0, 3),
    (4, 5),
    (5, 6),
    (7, 6),
    (4, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Axis (0=x, 1=y, 2=z) of each cube edge.
const EDGE_AXIS: [usize; 12] = [0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2];

/// 1D grid coordinates: `resolution` evenly spaced points spanning
/// [-GRID_HALF_EXTENT, GRID_HALF_EXTENT].
pub fn grid_coords(resolution: usize) -> Vec<f64> {
    assert!(resolution >= 2, "resolution must be at least 2");
    let step = 2.0 * GRID_HALF_EXTENT / (resolution - 1) as f64;
    (0..resolution)
        .map(|i| -GRID_HALF_EXTENT + step * i as f64)
        .collect()
}

/// Grid spacing for a given resolution.
pub fn cell_size(resolution: usize) -> f64 {
    2.0 * GRID_HALF_EXTENT / (resolution - 1) as f64
}

/// All grid points in index order `(ix * resolution + iy) * resolution + iz`.
pub fn grid_points(resolution: usize) -> Vec<Vec3> {
    let coords = grid_coords(resolution);
    let mut pts = Vec::with_capacity(resolution * resolution * resolution);
    for &x in &coords {
        for &y in &coords {
            for &z in &coords {
                pts.push(Vec3::new(x, y, z));
            }
        }
    }
    pts
}

/// Extract the iso-level set of a scalar field sampled pointwise.
pub fn marching_cubes<F: Fn(Vec3) -> f64>(field: F, resolution: usize, iso: f64) -> TriangleMesh {
    let values: Vec<f64> = grid_points(resolution).into_iter().map(field).collect();
    marching_cubes_on_grid(&values, resolution, iso)
}

/// Like [`marching_cubes`], but the field is evaluated on all grid points at
/// once. This is the entry point for learned fields, where batching queries
/// is far cheaper than pointwise calls.
pub fn marching_cubes_batched<F: FnOnce(&[Vec3]) -> Vec<f64>>(
    eval: F,
    resolution: usize,
    iso: f64,
) -> TriangleMesh {
    let pts = grid_points(resolution);
    let values = eval(&pts);
    assert_eq!(values.len(), pts.len(), "evaluator returned wrong count");
    marching_cubes_on_grid(&values, resolution, iso)
}

/// Core extraction from precomputed grid values, indexed as
/// `(ix * resolution + iy) * resolution + iz`. Vertices on shared cell edges
/// are deduplicated globally, so a level set that closes inside the grid
/// yields a watertight mesh.
pub fn marching_cubes_on_grid(values: &[f64], resolution: usize, iso: f64) -> TriangleMesh {
    assert!(resolution >= 2, "resolution must be at least 2");
    assert_eq!(values.len(), resolution.pow(3), "grid value count mismatch");
    let coords = grid_coords(resolution);
    let n = resolution;
    let value = |ix: usize, iy: usize, iz: usize| -> f64 {
        let v = values[(ix * n + iy) * n + iz];
        if v == iso {
            iso + ISO_NUDGE
        } else {
            v
        }
    };

    // Global edge key: lower grid corner of the edge plus its axis.
    let mut edge_vertex: HashMap<(usize, usize, usize, usize), usize> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    // Corner offsets in the table's numbering.
    const CORNER_OFFSET: [(usize, usize, usize); 8] = [
        (0, 0, 0),
        (1, 0, 0),
        (1, 1, 0),
        (0, 1, 0),
        (0, 0, 1),
        (1, 0, 1),
        (1, 1, 1),
        (0, 1, 1),
    ];

    for ix in 0..n - 1 {
        for iy in 0..n - 1 {
            for iz in 0..n - 1 {
                let mut corner_values = [0.0f64; 8];
                let mut case = 0usize;
                for (i, &(dx, dy, dz)) in CORNER_OFFSET.iter().enumerate() {
                    let v = value(ix + dx, iy + dy, iz + dz);
                    corner_values[i] = v;
                    if v < iso {
                        case |= 1 << i;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }

                let crossed = EDGE_TABLE[case];
                let mut cell_edge_vertex = [usize::MAX; 12];
                for edge in 0..12 {
                    if crossed & (1 << edge) == 0 {
                        continue;
                    }
                    let (lo, hi) = CANONICAL_EDGE[edge];
                    let (lx, ly, lz) = CORNER_OFFSET[lo];
                    let axis = EDGE_AXIS[edge];
                    let key = (ix + lx, iy + ly, iz + lz, axis);
                    let idx = *edge_vertex.entry(key).or_insert_with(|| {
                        let v0 = corner_values[lo];
                        let v1 = corner_values[hi];
                        let t = (iso - v0) / (v1 - v0);
                        let mut p = Vec3::new(
                            coords[ix + lx],
                            coords[iy + ly],
                            coords[iz + lz],
                        );
                        p[axis] += t * cell_size(resolution);
                        vertices.push(p);
                        vertices.len() - 1
                    });
                    cell_edge_vertex[edge] = idx;
                }

                let row = &TRIANGLE_TABLE[case];
                let mut i = 0;
                while i < row.len() && row[i] != -1 {
                    let a = cell_edge_vertex[row[i] as usize];
                    let b = cell_edge_vertex[row[i + 1] as usize];
                    let c = cell_edge_vertex[row[i + 2] as usize];
                    debug_assert!(a != usize::MAX && b != usize::MAX && c != usize::MAX);
                    // The tables wind triangles toward the below-iso side;
                    // reverse to get outward normals (toward values > iso).
                    triangles.push([a, c, b]);
                    i += 3;
                }
            }
        }
    }

    // Sanity check both the tables and the edge bookkeeping.
    debug_assert!(EDGE_CORNERS
        .iter()
        .zip(CANONICAL_EDGE.iter())
        .all(|(ec, &(lo, hi))| (ec[0] == lo && ec[1] == hi) || (ec[0] == hi && ec[1] == lo)));

    TriangleMesh {
        vertices,
        triangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere_sdf(r: f64) -> impl Fn(Vec3) -> f64 {
        move |p: Vec3| p.norm() - r
    }

    #[test]
    fn sphere_vertices_near_analytic_radius() {
        let res = 64;
        let mesh = marching_cubes(sphere_sdf(0.3), res, 0.0);
        assert!(!mesh.is_empty());
        let tol = 1.5 * cell_size(res);
        for v in &mesh.vertices {
            assert!(
                (v.norm() - 0.3).abs() <= tol,
                "vertex radius {} off by more than {tol}",
                v.norm()
            );
        }
    }

    #[test]
    fn sphere_mesh_is_closed_with_outward_orientation() {
        let mesh = marching_cubes(sphere_sdf(0.3), 32, 0.0);
        mesh.check_closed().unwrap();
        let vol = mesh.signed_volume();
        let exact = 4.0 / 3.0 * PI * 0.3f64.powi(3);
        assert!(vol > 0.0, "inward-facing mesh, volume {vol}");
        assert!(
            (vol - exact).abs() / exact < 0.05,
            "volume {vol} vs analytic {exact}"
        );
    }

    #[test]
    fn constant_field_yields_empty_mesh() {
        let mesh = marching_cubes(|_| 1.0, 16, 0.0);
        assert!(mesh.is_empty());
        assert!(mesh.vertices.is_empty());
    }

    #[test]
    fn half_space_yields_planar_sheet() {
        let res = 32;
        let mesh = marching_cubes(|p: Vec3| p.z, res, 0.0);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!(v.z.abs() <= cell_size(res), "vertex z = {}", v.z);
        }
    }

    #[test]
    fn union_of_spheres_is_closed() {
        let f = |p: Vec3| {
            let a = (p - Vec3::new(0.15, 0.0, 0.05)).norm() - 0.22;
            let b = (p - Vec3::new(-0.12, 0.08, -0.03)).norm() - 0.27;
            a.min(b)
        };
        let mesh = marching_cubes(f, 48, 0.0);
        mesh.check_closed().unwrap();
        assert!(mesh.signed_volume() > 0.0);
    }

    #[test]
    fn nonzero_iso_level_shifts_extracted_radius() {
        // The 0.1 level set of |p| - 0.3 is the sphere of radius 0.4.
        let res = 64;
        let mesh = marching_cubes(sphere_sdf(0.3), res, 0.1);
        let tol = 1.5 * cell_size(res);
        for v in &mesh.vertices {
            assert!((v.norm() - 0.4).abs() <= tol);
        }
    }

    #[test]
    fn values_exactly_at_iso_are_handled() {
        // Plane through grid points: z coordinate 0 exists in even grids...
        // resolution 17 puts a coordinate exactly at 0. The nudge pushes
        // those values above iso, producing a sheet just below z = 0.
        let res = 17;
        assert!(grid_coords(res).iter().any(|&c| c == 0.0));
        let mesh = marching_cubes(|p: Vec3| p.z, res, 0.0);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!(v.z.abs() <= cell_size(res));
        }
        // No degenerate (zero-area) triangles from on-iso corners.
        for i in 0..mesh.triangles.len() {
            assert!(mesh.face_area(i) > 0.0);
        }
    }

    #[test]
    fn shared_edge_vertices_are_deduplicated() {
        let mesh = marching_cubes(sphere_sdf(0.3), 24, 0.0);
        let mut seen = std::collections::HashSet::new();
        for v in &mesh.vertices {
            let key = (v.x.to_bits(), v.y.to_bits(), v.z.to_bits());
            assert!(seen.insert(key), "duplicate vertex at {v:?}");
        }
    }

    #[test]
    fn batched_and_pointwise_agree() {
        let f = sphere_sdf(0.25);
        let a = marching_cubes(&f, 20, 0.0);
        let b = marching_cubes_batched(
            |pts| pts.iter().map(|&p| f(p)).collect(),
            20,
            0.0,
        );
        assert_eq!(a, b);
    }
}
