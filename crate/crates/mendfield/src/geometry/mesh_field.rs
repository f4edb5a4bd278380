//! Joint field queries against a closed triangle mesh: signed distance,
//! occupancy, and surface normals.
//!
//! Sign comes from the generalized winding number (a point is inside when
//! the mesh winds around it at least half a turn), which degrades gracefully
//! on meshes with small defects. Normals use the angle-weighted pseudo-normal
//! of the nearest surface feature, the standard choice that makes the sign
//! of `(p − nearest)·n` agree with inside/outside even at edges and vertices.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::Result;
use crate::geometry::bvh::TriangleBvh;
use crate::geometry::mesh::TriangleMesh;
use crate::math::{normalize_or_default, Vec3};

/// Barycentric weights below this are treated as zero when classifying the
/// nearest feature as face, edge, or vertex.
const FEATURE_EPS: f64 = 1e-9;

/// Query points closer to the surface than this count as boundary points
/// and get occupancy 0.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MeshField {
    mesh: TriangleMesh,
    bvh: TriangleBvh,
    face_normals: Vec<Vec3>,
    vertex_normals: Vec<Vec3>,
    edge_normals: HashMap<(usize, usize), Vec3>,
}

impl MeshField {
    /// Builds the acceleration structures. The mesh must be closed.
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        mesh.check_closed()?;

        let face_normals: Vec<Vec3> = (0..mesh.triangles.len())
            .map(|i| mesh.face_normal(i))
            .collect();

        // Angle-weighted vertex pseudo-normals.
        let mut vertex_normals = vec![Vec3::zeros(); mesh.vertices.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = mesh.triangle_vertices(t);
            let corners = [(tri[0], a, b, c), (tri[1], b, c, a), (tri[2], c, a, b)];
            for (v, at, next, prev) in corners {
                let e1 = next - at;
                let e2 = prev - at;
                let cos = e1.dot(&e2) / (e1.norm() * e2.norm());
                let angle = cos.clamp(-1.0, 1.0).acos();
                vertex_normals[v] += face_normals[t] * angle;
            }
        }
        for n in &mut vertex_normals {
            *n = normalize_or_default(*n, 1e-12);
        }

        // Edge pseudo-normals: mean of the two adjacent face normals.
        let mut edge_normals: HashMap<(usize, usize), Vec3> = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                let key = (a.min(b), a.max(b));
                *edge_normals.entry(key).or_insert_with(Vec3::zeros) += face_normals[t];
            }
        }
        for n in edge_normals.values_mut() {
            *n = normalize_or_default(*n, 1e-12);
        }

        let bvh = TriangleBvh::build(&mesh);
        Ok(MeshField {
            mesh,
            bvh,
            face_normals,
            vertex_normals,
            edge_normals,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Generalized winding number of the mesh around `p`: 1 deep inside a
    /// closed mesh, 0 outside, fractional near the surface or on defects.
    pub fn winding_number(&self, p: Vec3) -> f64 {
        let mut total = 0.0;
        for t in 0..self.mesh.triangles.len() {
            let [va, vb, vc] = self.mesh.triangle_vertices(t);
            total += solid_angle(va - p, vb - p, vc - p);
        }
        total / (4.0 * PI)
    }

    /// Signed distance: negative inside (winding ≥ ½), magnitude from the
    /// nearest triangle.
    pub fn sdf(&self, p: Vec3) -> f64 {
        let d = self.bvh.nearest(p).distance_squared.sqrt();
        if self.winding_number(p) >= 0.5 {
            -d
        } else {
            d
        }
    }

    /// Occupancy, signed distance, and the pseudo-normal of the nearest
    /// surface feature.
    pub fn field(&self, p: Vec3) -> (u8, f64, Vec3) {
        let nearest = self.bvh.nearest(p);
        let d = nearest.distance_squared.sqrt();
        let inside = self.winding_number(p) >= 0.5;
        let sdf = if inside { -d } else { d };
        let occ = u8::from(inside && d > BOUNDARY_EPS);

        let tri = self.mesh.triangles[nearest.triangle];
        let bary = nearest.barycentric;
        let zero = [
            bary[0] <= FEATURE_EPS,
            bary[1] <= FEATURE_EPS,
            bary[2] <= FEATURE_EPS,
        ];
        let nf = match zero.iter().filter(|&&z| z).count() {
            // Face interior.
            0 => self.face_normals[nearest.triangle],
            // Edge between the two nonzero corners.
            1 => {
                let k = zero.iter().position(|&z| z).unwrap();
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                self.edge_normals[&(a.min(b), a.max(b))]
            }
            // Vertex with the single nonzero weight.
            _ => {
                let k = (0..3).max_by(|&i, &j| bary[i].partial_cmp(&bary[j]).unwrap());
                self.vertex_normals[tri[k.unwrap()]]
            }
        };
        (occ, sdf, nf)
    }
}

/// Signed solid angle subtended at the origin by the triangle (a, b, c).
fn solid_angle(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let la = a.norm();
    let lb = b.norm();
    let lc = c.norm();
    let numerator = a.dot(&b.cross(&c));
    let denominator = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
    2.0 * numerator.atan2(denominator)
}
