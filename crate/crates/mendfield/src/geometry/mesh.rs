//! Indexed triangle meshes and the unit-cube normalization used by the
//! whole pipeline.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Indexed triangle mesh. Triangles store counter-clockwise vertex indices
/// (outward-facing normals by the right-hand rule).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= n {
                    return Err(Error::DegenerateInput(format!(
                        "triangle {i} references vertex {v} but mesh has {n} vertices"
                    )));
                }
            }
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
        })
    }

    pub fn empty() -> Self {
        TriangleMesh {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_vertices(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = self.triangle_vertices(i);
        crate::math::normalize_or_default((b - a).cross(&(c - a)), 1e-18)
    }

    pub fn face_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.face_area(i)).sum()
    }

    /// Signed volume by the divergence theorem; positive when triangles are
    /// wound counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle_vertices(i);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Axis-aligned bounding box as (min, max). Errors on an empty mesh.
    pub fn bounding_box(&self) -> Result<(Vec3, Vec3)> {
        if self.vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Ok((lo, hi))
    }

    /// Every edge must be shared by exactly two triangles, once in each
    /// direction. That is the watertightness requirement for inside/outside
    /// queries and for the extraction targets.
    pub fn check_closed(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        // Count directed edges; closed orientable manifold ⟺ every directed
        // edge appears exactly once and its reverse exactly once.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if e.0 == e.1 {
                    return Err(Error::OpenMesh(format!(
                        "degenerate edge at vertex {}",
                        e.0
                    )));
                }
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(Error::OpenMesh(format!(
                    "edge ({a},{b}) used by {count} triangles in the same direction"
                )));
            }
            if !directed.contains_key(&(b, a)) {
                return Err(Error::OpenMesh(format!(
                    "edge ({a},{b}) has no opposing half-edge"
                )));
            }
        }
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.check_closed().is_ok()
    }

    /// Draw `n` points uniformly by area from the surface, with the outward
    /// face normal at each point. Deterministic given the RNG state; faces
    /// are chosen by inverse-CDF over cumulative areas so the result does
    /// not depend on thread count.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<(Vec3, Vec3)> {
        if self.triangles.is_empty() || n == 0 {
            return Vec::new();
        }
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            total += self.face_area(i);
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.gen::<f64>() * total;
            let face = match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) => i,
                Err(i) => i.min(self.triangles.len() - 1),
            };
            let [a, b, c] = self.triangle_vertices(face);
            // Uniform barycentric sample via square-root warp.
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let s = r1.sqrt();
            let p = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
            out.push((p, self.face_normal(face)));
        }
        out
    }

    /// Unit icosphere of the given radius, centered at the origin. Used by
    /// tests and examples as a cheap closed smooth mesh.
    pub fn icosphere(radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = vec![
            Vec3::new(-1.0, t, 0.0),
            Vec3::new(1.0, t, 0.0),
            Vec3::new(-1.0, -t, 0.0),
            Vec3::new(1.0, -t, 0.0),
            Vec3::new(0.0, -1.0, t),
            Vec3::new(0.0, 1.0, t),
            Vec3::new(0.0, -1.0, -t),
            Vec3::new(0.0, 1.0, -t),
            Vec3::new(t, 0.0, -1.0),
            Vec3::new(t, 0.0, 1.0),
            Vec3::new(-t, 0.0, -1.0),
            Vec3::new(-t, 0.0, 1.0),
        ];
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for t in &triangles {
                let mut mid = [0usize; 3];
                for (k, (a, b)) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
                    .into_iter()
                    .enumerate()
                {
                    let key = (a.min(b), a.max(b));
                    mid[k] = *midpoint.entry(key).or_insert_with(|| {
                        vertices.push((vertices[a] + vertices[b]) * 0.5);
                        vertices.len() - 1
                    });
                }
                next.push([t[0], mid[0], mid[2]]);
                next.push([t[1], mid[1], mid[0]]);
                next.push([t[2], mid[2], mid[1]]);
                next.push([mid[0], mid[1], mid[2]]);
            }
            triangles = next;
        }
        for v in &mut vertices {
            *v = v.normalize() * radius;
        }
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Axis-aligned box mesh spanning [lo, hi], two triangles per face,
    /// outward CCW winding.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> Self {
        let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let vertices = vec![
            v(lo.x, lo.y, lo.z), // 0
            v(hi.x, lo.y, lo.z), // 1
            v(hi.x, hi.y, lo.z), // 2
            v(lo.x, hi.y, lo.z), // 3
            v(lo.x, lo.y, hi.z), // 4
            v(hi.x, lo.y, hi.z), // 5
            v(hi.x, hi.y, hi.z), // 6
            v(lo.x, hi.y, hi.z), // 7
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2], // z = lo (normal -z)
            [4, 5, 6],
            [4, 6, 7], // z = hi (normal +z)
            [0, 1, 5],
            [0, 5, 4], // y = lo (normal -y)
            [3, 7, 6],
            [3, 6, 2], // y = hi (normal +y)
            [0, 4, 7],
            [0, 7, 3], // x = lo (normal -x)
            [1, 2, 6],
            [1, 6, 5], // x = hi (normal +x)
        ];
        TriangleMesh {
            vertices,
            triangles,
        }
    }
}

/// Uniformly scale and translate so the bounding box fits inside
/// [-0.5, 0.5]³, centered at the origin. Returns the transform as
/// `normalized = (original - offset) * scale`; invert with
/// `original = normalized / scale + offset`.
pub fn normalize_to_unit_cube(mesh: &TriangleMesh) -> Result<(TriangleMesh, f64, Vec3)> {
    let (lo, hi) = mesh.bounding_box()?;
    let center = (lo + hi) * 0.5;
    let extent = hi - lo;
    let max_extent = extent.x.max(extent.y).max(extent.z);
    let scale = if max_extent > 0.0 {
        1.0 / max_extent
    } else {
        1.0
    };
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| (v - center) * scale)
        .collect();
    Ok((
        TriangleMesh {
            vertices,
            triangles: mesh.triangles.clone(),
        },
        scale,
        center,
    ))
}
