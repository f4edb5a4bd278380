//! Axis-aligned bounding-box tree over mesh triangles for nearest-point
//! queries.

use crate::geometry::mesh::TriangleMesh;
use crate::math::Vec3;

const LEAF_SIZE: usize = 4;

/// Closest point on triangle `abc` to `p`, with barycentric coordinates of
/// the result (weights for `a`, `b`, `c`).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: index into `order`; internal: index of the left child
    /// (right child is `left + 1` is wrong for our layout, so both stored).
    first: u32,
    /// Leaf: triangle count; internal: 0.
    count: u32,
    /// Internal nodes only: child node indices.
    left: u32,
    right: u32,
}

/// Result of a nearest-triangle query.
#[derive(Debug, Clone, Copy)]
pub struct Nearest {
    pub triangle: usize,
    pub point: Vec3,
    pub barycentric: [f64; 3],
    pub distance_squared: f64,
}

#[derive(Debug, Clone)]
pub struct TriangleBvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleBvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let centroids: Vec<Vec3> = (0..mesh.triangles.len())
            .map(|i| {
                let [a, b, c] = mesh.triangle_vertices(i);
                (a + b + c) / 3.0
            })
            .collect();
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let mut bvh = TriangleBvh {
            nodes: Vec::new(),
            order: Vec::new(),
            vertices: mesh.vertices.clone(),
            triangles: mesh.triangles.clone(),
        };
        if !order.is_empty() {
            bvh.split(&mut order, 0, mesh.triangles.len(), &centroids);
        }
        bvh.order = order;
        bvh
    }

    fn triangle_bounds(&self, tri: u32) -> (Vec3, Vec3) {
        let [a, b, c] = self.triangles[tri as usize];
        let (va, vb, vc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let mut lo = va;
        let mut hi = va;
        for v in [vb, vc] {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Recursively builds the subtree over `order[start..end]`; returns the
    /// node index.
    fn split(&mut self, order: &mut [u32], start: usize, end: usize, centroids: &[Vec3]) -> u32 {
        let (mut lo, mut hi) = self.triangle_bounds(order[start]);
        let mut c_lo = centroids[order[start] as usize];
        let mut c_hi = c_lo;
        for &t in &order[start + 1..end] {
            let (tlo, thi) = self.triangle_bounds(t);
            let c = centroids[t as usize];
            for k in 0..3 {
                lo[k] = lo[k].min(tlo[k]);
                hi[k] = hi[k].max(thi[k]);
                c_lo[k] = c_lo[k].min(c[k]);
                c_hi[k] = c_hi[k].max(c[k]);
            }
        }

        let node_index = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            first: start as u32,
            count: (end - start) as u32,
            left: 0,
            right: 0,
        });

        let extent = c_hi - c_lo;
        let spread = extent.x.max(extent.y).max(extent.z);
        if end - start <= LEAF_SIZE || spread == 0.0 {
            return node_index;
        }

        let mut axis = 0;
        for k in 1..3 {
            if extent[k] > extent[axis] {
                axis = k;
            }
        }
        let mid = (start + end) / 2;
        order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            centroids[x as usize][axis]
                .partial_cmp(&centroids[y as usize][axis])
                .unwrap()
                .then(x.cmp(&y))
        });

        let left = self.split(order, start, mid, centroids);
        let right = self.split(order, mid, end, centroids);
        let node = &mut self.nodes[node_index as usize];
        node.count = 0;
        node.left = left;
        node.right = right;
        node_index
    }

    fn aabb_distance_squared(lo: Vec3, hi: Vec3, p: Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let d = if p[k] < lo[k] {
                lo[k] - p[k]
            } else if p[k] > hi[k] {
                p[k] - hi[k]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    /// Nearest triangle to `p` by branch-and-bound descent. Panics on an
    /// empty mesh.
    pub fn nearest(&self, p: Vec3) -> Nearest {
        assert!(!self.triangles.is_empty(), "nearest query on empty mesh");
        let mut best = Nearest {
            triangle: usize::MAX,
            point: Vec3::zeros(),
            barycentric: [0.0; 3],
            distance_squared: f64::INFINITY,
        };
        let mut stack: Vec<(u32, f64)> = vec![(0, 0.0)];
        while let Some((node_index, lower_bound)) = stack.pop() {
            if lower_bound >= best.distance_squared {
                continue;
            }
            let node = self.nodes[node_index as usize];
            if node.count > 0 {
                for i in node.first..node.first + node.count {
                    let tri = self.order[i as usize] as usize;
                    let [ia, ib, ic] = self.triangles[tri];
                    let (point, barycentric) = closest_point_on_triangle(
                        p,
                        self.vertices[ia],
                        self.vertices[ib],
                        self.vertices[ic],
                    );
                    let d2 = (p - point).norm_squared();
                    // Strict improvement keeps the winner independent of
                    // traversal order: ties go to the lowest triangle index.
                    if d2 < best.distance_squared
                        || (d2 == best.distance_squared && tri < best.triangle)
                    {
                        best = Nearest {
                            triangle: tri,
                            point,
                            barycentric,
                            distance_squared: d2,
                        };
                    }
                }
                continue;
            }
            let l = node.left as usize;
            let r = node.right as usize;
            let dl = Self::aabb_distance_squared(self.nodes[l].lo, self.nodes[l].hi, p);
            let dr = Self::aabb_distance_squared(self.nodes[r].lo, self.nodes[r].hi, p);
            // Push the farther child first so the nearer is explored next.
            if dl <= dr {
                stack.push((node.right, dr));
                stack.push((node.left, dl));
            } else {
                stack.push((node.left, dl));
                stack.push((node.right, dr));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn closest_point_covers_all_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        // Interior projection.
        let (q, bary) = closest_point_on_triangle(Vec3::new(0.25, 0.25, 1.0), a, b, c);
        assert_relative_eq!((q - Vec3::new(0.25, 0.25, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(bary[0] + bary[1] + bary[2], 1.0, epsilon = 1e-12);
        // Vertex region.
        let (q, bary) = closest_point_on_triangle(Vec3::new(-1.0, -1.0, 0.0), a, b, c);
        assert_eq!(q, a);
        assert_eq!(bary, [1.0, 0.0, 0.0]);
        // Edge ab region.
        let (q, bary) = closest_point_on_triangle(Vec3::new(0.5, -1.0, 0.0), a, b, c);
        assert_relative_eq!((q - Vec3::new(0.5, 0.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(bary[2], 0.0);
        // Hypotenuse region.
        let (q, _) = closest_point_on_triangle(Vec3::new(1.0, 1.0, 0.0), a, b, c);
        assert_relative_eq!((q - Vec3::new(0.5, 0.5, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bvh_matches_brute_force() {
        let mesh = TriangleMesh::icosphere(0.4, 2);
        let bvh = TriangleBvh::build(&mesh);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..300 {
            let p = Vec3::new(
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
            );
            let got = bvh.nearest(p);
            let mut best = f64::INFINITY;
            for i in 0..mesh.triangles.len() {
                let [a, b, c] = mesh.triangle_vertices(i);
                let (q, _) = closest_point_on_triangle(p, a, b, c);
                best = best.min((p - q).norm_squared());
            }
            assert_relative_eq!(got.distance_squared, best, epsilon = 1e-12);
        }
    }

    #[test]
    fn bvh_on_sphere_distance_is_analytic() {
        // On a fine icosphere the faceting error is tiny; the BVH distance
        // must track |‖p‖ − r| closely.
        let mesh = TriangleMesh::icosphere(0.4, 3);
        let bvh = TriangleBvh::build(&mesh);
        for p in [
            Vec3::new(0.6, 0.0, 0.0),
            Vec3::new(0.0, 0.1, 0.0),
            Vec3::new(0.3, 0.3, 0.3),
        ] {
            let d = bvh.nearest(p).distance_squared.sqrt();
            let analytic = (p.norm() - 0.4).abs();
            assert!((d - analytic).abs() < 2e-3, "d={d} analytic={analytic}");
        }
    }

    #[test]
    fn single_triangle_bvh() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = TriangleBvh::build(&mesh);
        let n = bvh.nearest(Vec3::new(0.2, 0.2, 0.5));
        assert_eq!(n.triangle, 0);
        assert_relative_eq!(n.distance_squared, 0.25, epsilon = 1e-12);
    }
}
