//! A kd-tree over 3D points for nearest-neighbor queries.
//!
//! Construction and queries are fully deterministic: splits choose the
//! widest axis, coordinate ties fall back to point index order.

use crate::math::Vec3;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Permutation of point indices laid out as an implicit median tree.
    order: Vec<u32>,
    /// Split axis for every tree position (median slot).
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: Vec<Vec3>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        let mut tree = KdTree {
            points,
            order: Vec::new(),
            axes: Vec::new(),
        };
        let n = tree.points.len();
        if n > 0 {
            tree.split(&mut order, &mut axes, 0, n);
        }
        tree.order = order;
        tree.axes = axes;
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn split(&self, order: &mut [u32], axes: &mut [u8], lo: usize, hi: usize) {
        if hi - lo <= 1 {
            return;
        }
        let mut min = self.points[order[lo] as usize];
        let mut max = min;
        for &i in &order[lo + 1..hi] {
            let p = self.points[i as usize];
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        let extent = max - min;
        let mut axis = 0;
        for k in 1..3 {
            if extent[k] > extent[axis] {
                axis = k;
            }
        }
        let mid = (lo + hi) / 2;
        order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            self.points[a as usize][axis]
                .partial_cmp(&self.points[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        axes[mid] = axis as u8;
        self.split(order, axes, lo, mid);
        self.split(order, axes, mid + 1, hi);
    }

    /// Index of the nearest stored point and the squared distance to it.
    /// Panics when the tree is empty.
    pub fn nearest(&self, p: Vec3) -> (usize, f64) {
        assert!(!self.points.is_empty(), "nearest query on empty tree");
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(p, 0, self.points.len(), &mut best);
        best
    }

    fn search(&self, p: Vec3, lo: usize, hi: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid] as usize;
        let d2 = (self.points[idx] - p).norm_squared();
        if d2 < best.1 || (d2 == best.1 && idx < best.0) {
            *best = (idx, d2);
        }
        if hi - lo == 1 {
            return;
        }
        let axis = self.axes[mid] as usize;
        let delta = p[axis] - self.points[idx][axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(p, near.0, near.1, best);
        // Non-strict so exact-tie candidates across the plane are still
        // visited; among equal distances the lowest index wins.
        if delta * delta <= best.1 {
            self.search(p, far.0, far.1, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                    rng.gen_range(-0.6..0.6),
                )
            })
            .collect();
        let tree = KdTree::build(pts.clone());
        for _ in 0..500 {
            let q = Vec3::new(
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
                rng.gen_range(-0.7..0.7),
            );
            let (idx, d2) = tree.nearest(q);
            let brute = pts
                .iter()
                .map(|p| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d2, brute);
            assert_eq!((pts[idx] - q).norm_squared(), brute);
        }
    }

    #[test]
    fn single_point_tree() {
        let tree = KdTree::build(vec![Vec3::new(0.1, 0.2, 0.3)]);
        let (idx, d2) = tree.nearest(Vec3::zeros());
        assert_eq!(idx, 0);
        assert!((d2 - 0.14).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_pick_lowest_index() {
        let p = Vec3::new(0.5, 0.5, 0.5);
        let tree = KdTree::build(vec![p, p, p]);
        let (idx, d2) = tree.nearest(p);
        assert_eq!(d2, 0.0);
        assert_eq!(idx, 0);
    }

    #[test]
    fn query_on_stored_point_returns_zero() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.3, 0.0, 0.0),
            Vec3::new(0.0, 0.4, 0.0),
        ];
        let tree = KdTree::build(pts.clone());
        for (i, p) in pts.iter().enumerate() {
            let (idx, d2) = tree.nearest(*p);
            assert_eq!((idx, d2), (i, 0.0));
        }
    }
}
