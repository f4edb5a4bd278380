//! Thin-plate-spline break surfaces.
//!
//! A break surface is a height field over a base plane fitted to the
//! fracture-region points: the plane comes from a principal-component fit
//! (smallest component as normal), heights are interpolated with the TPS
//! kernel `U(r) = r² log r` plus an affine part, optionally ridge-stabilized
//! by `λ_tps`. The side function `g(p)` is the height of `p` above the
//! spline along the plane normal: positive on the restoration side once the
//! surface is oriented, negative on the fractured side.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GRID_PADDING;
use crate::math::Vec3;

/// Default ridge regularization, enough to stabilize near-degenerate
/// control-point layouts without visibly moving the surface.
pub const DEFAULT_LAMBDA_TPS: f64 = 1e-6;

/// Control points are thinned to at most this many before solving; the
/// dense linear system is cubic in their count.
pub const MAX_CONTROL_POINTS: usize = 400;

/// Duplicate control points closer than this in the plane domain are
/// dropped to keep the kernel matrix nonsingular at λ_tps = 0.
const DUPLICATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakSurface {
    /// Base-plane origin (centroid of the control points).
    pub origin: Vec3,
    /// Orthonormal frame: `u`, `v` span the plane, `w` is its normal.
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
    /// Plane-domain coordinates of the control points.
    pub control_uv: Vec<[f64; 2]>,
    /// Measured heights of the control points above the base plane.
    pub control_heights: Vec<f64>,
    /// TPS kernel weights, one per control point.
    pub kernel_weights: Vec<f64>,
    /// Affine part: `a0 + a1·u + a2·v`.
    pub affine: [f64; 3],
    pub lambda: f64,
}

fn kernel(r2: f64) -> f64 {
    // U(r) = r² log r = ½ r² log r²; zero at r = 0.
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

impl BreakSurface {
    /// Fits plane and spline to the fracture-region points.
    ///
    /// Needs at least 4 points spanning a genuine 2D domain; collinear (or
    /// coincident) input is rejected. The normal orientation after fitting
    /// is arbitrary — call [`BreakSurface::orient_toward`] with a point on
    /// the restoration side.
    pub fn fit(points: &[Vec3], lambda: f64) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::DegenerateInput(format!(
                "break-surface fit needs at least 4 points, got {}",
                points.len()
            )));
        }

        // Thin evenly (points come ordered along the extraction sweep, so a
        // stride keeps spatial coverage) to bound the solve cost.
        let stride = points.len().div_ceil(MAX_CONTROL_POINTS);
        let kept: Vec<Vec3> = points.iter().copied().step_by(stride).collect();

        let centroid = kept.iter().sum::<Vec3>() / kept.len() as f64;
        let mut cov = nalgebra::Matrix3::<f64>::zeros();
        for p in &kept {
            let d = p - centroid;
            cov += d * d.transpose();
        }
        cov /= kept.len() as f64;

        let eig = nalgebra::SymmetricEigen::new(cov);
        // Ascending order of eigenvalues by index.
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let [smallest, middle, largest] = idx;
        if eig.eigenvalues[middle] <= 1e-12 * eig.eigenvalues[largest].max(1e-300) {
            return Err(Error::DegenerateInput(
                "fracture-region points are collinear; cannot span a base plane".into(),
            ));
        }

        let w = normalize_sign(eig.eigenvectors.column(smallest).into());
        let u = normalize_sign(eig.eigenvectors.column(largest).into());
        // Right-handed orthonormal frame.
        let u = (u - w * u.dot(&w)).normalize();
        let v = w.cross(&u);

        let mut control_uv: Vec<[f64; 2]> = Vec::with_capacity(kept.len());
        let mut heights: Vec<f64> = Vec::with_capacity(kept.len());
        'next: for p in &kept {
            let d = p - centroid;
            let uv = [d.dot(&u), d.dot(&v)];
            for existing in &control_uv {
                let du = uv[0] - existing[0];
                let dv = uv[1] - existing[1];
                if du * du + dv * dv < DUPLICATE_EPS * DUPLICATE_EPS {
                    continue 'next;
                }
            }
            control_uv.push(uv);
            heights.push(d.dot(&w));
        }
        let n = control_uv.len();
        if n < 4 {
            return Err(Error::DegenerateInput(
                "fewer than 4 distinct plane-domain control points".into(),
            ));
        }

        // [K + λI  P] [k]   [h]
        // [Pᵀ      0] [a] = [0]     P rows: (1, u, v)
        let dim = n + 3;
        let mut system = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                let du = control_uv[i][0] - control_uv[j][0];
                let dv = control_uv[i][1] - control_uv[j][1];
                system[(i, j)] = kernel(du * du + dv * dv);
            }
            system[(i, i)] += lambda;
            system[(i, n)] = 1.0;
            system[(i, n + 1)] = control_uv[i][0];
            system[(i, n + 2)] = control_uv[i][1];
            system[(n, i)] = 1.0;
            system[(n + 1, i)] = control_uv[i][0];
            system[(n + 2, i)] = control_uv[i][1];
            rhs[i] = heights[i];
        }

        let solution = system.lu().solve(&rhs).ok_or_else(|| {
            Error::Numerical("thin-plate-spline system is singular".into())
        })?;

        Ok(BreakSurface {
            origin: centroid,
            u,
            v,
            w,
            control_uv,
            control_heights: heights,
            kernel_weights: solution.as_slice()[..n].to_vec(),
            affine: [solution[n], solution[n + 1], solution[n + 2]],
            lambda,
        })
    }

    /// Spline height above the base plane at plane coordinates (u, v).
    pub fn height(&self, pu: f64, pv: f64) -> f64 {
        let mut h = self.affine[0] + self.affine[1] * pu + self.affine[2] * pv;
        for (c, k) in self.control_uv.iter().zip(&self.kernel_weights) {
            let du = pu - c[0];
            let dv = pv - c[1];
            h += k * kernel(du * du + dv * dv);
        }
        h
    }

    /// Height gradient (∂h/∂u, ∂h/∂v).
    pub fn height_gradient(&self, pu: f64, pv: f64) -> (f64, f64) {
        let mut gu = self.affine[1];
        let mut gv = self.affine[2];
        for (c, k) in self.control_uv.iter().zip(&self.kernel_weights) {
            let du = pu - c[0];
            let dv = pv - c[1];
            let r2 = du * du + dv * dv;
            if r2 > 0.0 {
                // dU/d(uv) = (u − uᵢ)(log r² + 1)
                let s = r2.ln() + 1.0;
                gu += k * du * s;
                gv += k * dv * s;
            }
        }
        (gu, gv)
    }

    /// Plane-domain coordinates and height of a world point.
    pub fn to_plane(&self, p: Vec3) -> (f64, f64, f64) {
        let d = p - self.origin;
        (d.dot(&self.u), d.dot(&self.v), d.dot(&self.w))
    }

    /// Side function: height of `p` above the spline surface along `w`.
    /// Positive on the restoration side after orientation.
    pub fn g(&self, p: Vec3) -> f64 {
        let (pu, pv, h) = self.to_plane(p);
        h - self.height(pu, pv)
    }

    /// Flips the frame so `g(hint) > 0`, i.e. the hint lies on the positive
    /// (restoration) side. Keeps the frame right-handed.
    pub fn orient_toward(&mut self, hint: Vec3) {
        if self.g(hint) >= 0.0 {
            return;
        }
        // Mirror (u, v, w) → (u, −v, −w): still right-handed. A surface
        // point with old coordinates (cu, cv, h) gets new coordinates
        // (cu, −cv, −h), so the new height function is −h(u, −v): control v
        // coordinates and heights negate, kernel weights and (a0, a1)
        // negate, and a2 picks up two sign flips that cancel.
        self.w = -self.w;
        self.v = -self.v;
        for c in &mut self.control_uv {
            c[1] = -c[1];
        }
        for h in &mut self.control_heights {
            *h = -*h;
        }
        for k in &mut self.kernel_weights {
            *k = -*k;
        }
        self.affine = [-self.affine[0], -self.affine[1], self.affine[2]];
    }

    /// World position and unit normal of the spline surface at (u, v). The
    /// normal points toward the positive-g side.
    pub fn surface_point(&self, pu: f64, pv: f64) -> (Vec3, Vec3) {
        let h = self.height(pu, pv);
        let point = self.origin + self.u * pu + self.v * pv + self.w * h;
        let (gu, gv) = self.height_gradient(pu, pv);
        let normal = (self.w - self.u * gu - self.v * gv).normalize();
        (point, normal)
    }

    /// Dense samples of the surface patch clipped to the padded unit cube:
    /// a `grid × grid` sweep of the plane domain wide enough to cover the
    /// cube's diagonal, keeping samples that land inside the cube.
    pub fn sample_patch(&self, grid: usize) -> Vec<(Vec3, Vec3)> {
        // Plane coordinates of padded-cube points are bounded by its
        // half-diagonal.
        let half = (0.5 + GRID_PADDING) * 3.0f64.sqrt();
        let bound = 0.5 + GRID_PADDING;
        let mut out = Vec::new();
        for i in 0..grid {
            for j in 0..grid {
                let pu = -half + 2.0 * half * i as f64 / (grid - 1) as f64;
                let pv = -half + 2.0 * half * j as f64 / (grid - 1) as f64;
                let (p, n) = self.surface_point(pu, pv);
                if p.x.abs() <= bound && p.y.abs() <= bound && p.z.abs() <= bound {
                    out.push((p, n));
                }
            }
        }
        out
    }

    /// Spacing between adjacent patch samples in the plane domain for the
    /// given grid size.
    pub fn patch_spacing(grid: usize) -> f64 {
        2.0 * (0.5 + GRID_PADDING) * 3.0f64.sqrt() / (grid - 1) as f64
    }

    /// Largest interpolation residual |h_i − height(u_i, v_i)| over the
    /// control points; ≤ 1e-6 for an unregularized fit.
    pub fn control_residual(&self) -> f64 {
        self.control_uv
            .iter()
            .zip(&self.control_heights)
            .map(|(c, h)| (h - self.height(c[0], c[1])).abs())
            .fold(0.0f64, f64::max)
    }

    pub fn frame_orthonormality_error(&self) -> f64 {
        let mut e = 0.0f64;
        for (a, b) in [(self.u, self.v), (self.v, self.w), (self.w, self.u)] {
            e = e.max(a.dot(&b).abs());
        }
        for a in [self.u, self.v, self.w] {
            e = e.max((a.norm() - 1.0).abs());
        }
        e
    }
}

/// Deterministic eigenvector sign: first nonzero component positive.
fn normalize_sign(v: Vec3) -> Vec3 {
    let v = v.normalize();
    for k in 0..3 {
        if v[k] != 0.0 {
            return if v[k] < 0.0 { -v } else { v };
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn grid_points<F: Fn(f64, f64) -> f64>(n: usize, span: f64, f: F) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let u = -span + 2.0 * span * i as f64 / (n - 1) as f64;
                let v = -span + 2.0 * span * j as f64 / (n - 1) as f64;
                pts.push(Vec3::new(u, v, f(u, v)));
            }
        }
        pts
    }

    #[test]
    fn coplanar_points_reduce_to_the_plane() {
        let pts = grid_points(7, 0.4, |_, _| 0.25);
        let bs = BreakSurface::fit(&pts, 0.0).unwrap();
        assert!(bs.frame_orthonormality_error() < 1e-9);
        // g is the signed plane distance: plane is z = 0.25.
        for p in [
            Vec3::new(0.1, -0.2, 0.5),
            Vec3::new(-0.3, 0.1, 0.0),
            Vec3::new(0.0, 0.0, 0.25),
        ] {
            assert_relative_eq!(bs.g(p).abs(), (p.z - 0.25).abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn interpolates_sine_heights_exactly_without_ridge() {
        let pts = grid_points(9, 0.4, |u, _| 0.1 * (5.0 * u).sin());
        let bs = BreakSurface::fit(&pts, 0.0).unwrap();
        for p in &pts {
            assert!(bs.g(*p).abs() <= 1e-6, "residual {} at {p:?}", bs.g(*p));
        }
    }

    #[test]
    fn ridge_keeps_residual_small() {
        let pts = grid_points(9, 0.4, |u, v| 0.05 * (4.0 * u).sin() * (3.0 * v).cos());
        let bs = BreakSurface::fit(&pts, DEFAULT_LAMBDA_TPS).unwrap();
        for p in &pts {
            assert!(bs.g(*p).abs() <= 1e-4, "residual {}", bs.g(*p));
        }
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts: Vec<Vec3> = (0..10)
            .map(|i| Vec3::new(i as f64 * 0.05, 0.0, 0.0))
            .collect();
        assert!(matches!(
            BreakSurface::fit(&pts, 0.0),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            BreakSurface::fit(&pts[..3], 0.0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn orientation_flips_g_sign_globally() {
        let pts = grid_points(8, 0.3, |u, v| 0.03 * u * v);
        let mut bs = BreakSurface::fit(&pts, 0.0).unwrap();
        let probe = Vec3::new(0.05, -0.1, 0.4);
        let before = bs.g(probe);
        bs.orient_toward(probe);
        assert!(bs.g(probe) > 0.0);
        assert_relative_eq!(bs.g(probe).abs(), before.abs(), epsilon = 1e-12);
        assert!(bs.frame_orthonormality_error() < 1e-9);
        assert!(bs.control_residual() <= 1e-6);
        // Orienting toward a point already on the positive side is a no-op.
        let snapshot = bs.clone();
        bs.orient_toward(probe);
        assert_eq!(bs.w, snapshot.w);
    }

    #[test]
    fn orient_toward_preserves_surface_geometry() {
        let pts = grid_points(8, 0.3, |u, v| 0.04 * (3.0 * u + 2.0 * v).sin());
        let bs0 = BreakSurface::fit(&pts, 0.0).unwrap();
        let mut bs1 = bs0.clone();
        // One length unit below the base plane: g ≈ −1 regardless of which
        // way the fitted normal happens to point.
        let hint = bs0.origin - bs0.w;
        assert!(bs0.g(hint) < 0.0);
        bs1.orient_toward(hint);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = Vec3::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            assert_relative_eq!(bs1.g(p), -bs0.g(p), epsilon = 1e-9);
        }
    }

    #[test]
    fn surface_normals_are_unit_and_face_positive_side() {
        let pts = grid_points(9, 0.35, |u, v| 0.05 * u * u - 0.03 * v);
        let bs = BreakSurface::fit(&pts, 0.0).unwrap();
        for (p, n) in bs.sample_patch(24) {
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-9);
            // Stepping along the normal increases g.
            assert!(bs.g(p + n * 1e-4) > bs.g(p - n * 1e-4));
        }
    }

    #[test]
    fn patch_covers_the_padded_cube() {
        // A planar surface through the origin: its patch must reach every
        // face of the padded cube so distance queries near the boundary
        // stay accurate.
        let pts = grid_points(6, 0.3, |_, _| 0.0);
        let bs = BreakSurface::fit(&pts, 0.0).unwrap();
        let samples = bs.sample_patch(120);
        // Plane-domain sweep is the cube half-diagonal wide; roughly a third
        // of a through-plane's sweep survives the clip.
        assert!(samples.len() > 4_000, "only {} samples", samples.len());
        let max_u = samples
            .iter()
            .map(|(p, _)| p.x.abs().max(p.y.abs()))
            .fold(0.0f64, f64::max);
        // Samples approach each face to within one plane-domain step.
        let reach = 0.6 - BreakSurface::patch_spacing(120);
        assert!(max_u > reach, "patch too small: {max_u} < {reach}");
        for (p, _) in &samples {
            assert!(p.x.abs() <= 0.6 && p.y.abs() <= 0.6 && p.z.abs() <= 0.6);
        }
    }

    #[test]
    fn duplicated_points_are_deduplicated_not_fatal() {
        let mut pts = grid_points(5, 0.3, |u, v| 0.02 * (u + v));
        let dup = pts[3];
        pts.push(dup);
        pts.push(dup);
        let bs = BreakSurface::fit(&pts, 0.0).unwrap();
        assert_eq!(bs.control_uv.len(), 25);
    }
}
