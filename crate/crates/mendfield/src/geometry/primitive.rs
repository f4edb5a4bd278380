//! Analytic solid primitives with exact signed distance fields.
//!
//! Conventions, fixed for reproducibility:
//! * occupancy is 1 iff sdf < 0 — boundary points count as outside;
//! * wherever the normal is genuinely undefined (sphere center, box center
//!   ties, the spine of a torus) the reported direction falls back to a
//!   deterministic choice, ultimately [`crate::math::DEGENERATE_NORMAL`];
//! * inside a box, face ties break in x, y, z axis order;
//! * on a cylinder axis the radial direction defaults to +x, and an inside
//!   tie between wall and cap resolves to the wall.
//!
//! All kinds except `Superellipsoid` have exact (metric) SDFs. The
//! superellipsoid uses the standard scaled implicit-function approximation
//! `‖q‖·(1 − 1/F(q))`, which has the right sign and zero set but is not a
//! true distance except in the sphere case; its normals come from central
//! finite differences of that field.

use serde::{Deserialize, Serialize};

use crate::math::{normalize_or_default, Matrix3, Vec3};

/// Step for finite-difference normals on the superellipsoid field.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveShape {
    Sphere {
        radius: f64,
    },
    Cuboid {
        half_extents: [f64; 3],
    },
    /// Axis along local z.
    Cylinder {
        radius: f64,
        half_height: f64,
    },
    /// Ring in the local xy plane.
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    /// Inside–outside exponents: `e1` blends along z, `e2` in the xy plane;
    /// (1, 1) is an ellipsoid, values → 0 approach a box.
    Superellipsoid {
        half_extents: [f64; 3],
        e1: f64,
        e2: f64,
    },
    /// Local z ≤ 0 is inside.
    HalfSpace,
}

/// A primitive under a rigid pose. World points are pulled into the local
/// frame with `q = Rᵀ(p − t)`; normals push forward with `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: PrimitiveShape,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Primitive {
    pub fn new(shape: PrimitiveShape) -> Self {
        Primitive {
            shape,
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn with_pose(shape: PrimitiveShape, rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Primitive {
            shape,
            rotation,
            translation,
        }
    }

    /// True when the SDF is an exact Euclidean distance.
    pub fn is_metric(&self) -> bool {
        !matches!(self.shape, PrimitiveShape::Superellipsoid { .. })
    }

    fn to_local(&self, p: Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn sdf(&self, p: Vec3) -> f64 {
        self.shape.sdf_local(self.to_local(p))
    }

    pub fn occupancy(&self, p: Vec3) -> u8 {
        u8::from(self.sdf(p) < 0.0)
    }

    pub fn normal(&self, p: Vec3) -> Vec3 {
        self.rotation * self.shape.normal_local(self.to_local(p))
    }

    pub fn field(&self, p: Vec3) -> (u8, f64, Vec3) {
        let q = self.to_local(p);
        let sdf = self.shape.sdf_local(q);
        (
            u8::from(sdf < 0.0),
            sdf,
            self.rotation * self.shape.normal_local(q),
        )
    }
}

impl PrimitiveShape {
    pub fn sdf_local(&self, q: Vec3) -> f64 {
        match *self {
            PrimitiveShape::Sphere { radius } => q.norm() - radius,
            PrimitiveShape::Cuboid { half_extents } => {
                let b = Vec3::new(half_extents[0], half_extents[1], half_extents[2]);
                let d = q.abs() - b;
                let outside = Vec3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
                let inside = d.x.max(d.y).max(d.z).min(0.0);
                outside + inside
            }
            PrimitiveShape::Cylinder {
                radius,
                half_height,
            } => {
                let radial = (q.x * q.x + q.y * q.y).sqrt() - radius;
                let axial = q.z.abs() - half_height;
                let outside =
                    (radial.max(0.0).powi(2) + axial.max(0.0).powi(2)).sqrt();
                let inside = radial.max(axial).min(0.0);
                outside + inside
            }
            PrimitiveShape::Torus {
                major_radius,
                minor_radius,
            } => {
                let ring = (q.x * q.x + q.y * q.y).sqrt() - major_radius;
                (ring * ring + q.z * q.z).sqrt() - minor_radius
            }
            PrimitiveShape::Superellipsoid { half_extents, .. } => {
                let f = self.superellipsoid_f(q);
                let n = q.norm();
                if n < 1e-12 {
                    // Center: direction-dependent limit; report the depth
                    // along the shallowest axis.
                    -half_extents[0].min(half_extents[1]).min(half_extents[2])
                } else {
                    n * (1.0 - 1.0 / f)
                }
            }
            PrimitiveShape::HalfSpace => q.z,
        }
    }

    pub fn normal_local(&self, q: Vec3) -> Vec3 {
        match *self {
            PrimitiveShape::Sphere { .. } => normalize_or_default(q, 1e-12),
            PrimitiveShape::Cuboid { half_extents } => {
                let b = Vec3::new(half_extents[0], half_extents[1], half_extents[2]);
                let clamped = Vec3::new(
                    q.x.clamp(-b.x, b.x),
                    q.y.clamp(-b.y, b.y),
                    q.z.clamp(-b.z, b.z),
                );
                let to_surface = q - clamped;
                if to_surface.norm() > 0.0 {
                    return to_surface.normalize();
                }
                // Inside or on a face: nearest face wins, x before y before z.
                let depth = b - q.abs();
                let mut axis = 0;
                for k in 1..3 {
                    if depth[k] < depth[axis] {
                        axis = k;
                    }
                }
                let mut n = Vec3::zeros();
                n[axis] = if q[axis] >= 0.0 { 1.0 } else { -1.0 };
                n
            }
            PrimitiveShape::Cylinder {
                radius,
                half_height,
            } => {
                let rho = (q.x * q.x + q.y * q.y).sqrt();
                let radial_dir = if rho > 1e-12 {
                    Vec3::new(q.x / rho, q.y / rho, 0.0)
                } else {
                    Vec3::new(1.0, 0.0, 0.0)
                };
                let d_radial = rho - radius;
                let d_axial = q.z.abs() - half_height;
                if d_radial > 0.0 && d_axial > 0.0 {
                    // Nearest feature is the cap rim.
                    let n = radial_dir * d_radial
                        + Vec3::new(0.0, 0.0, q.z.signum()) * d_axial;
                    return n.normalize();
                }
                if d_radial > 0.0 {
                    return radial_dir;
                }
                if d_axial > 0.0 {
                    return Vec3::new(0.0, 0.0, q.z.signum());
                }
                // Inside: wall vs cap by depth, wall on ties.
                if -d_radial <= -d_axial {
                    radial_dir
                } else {
                    Vec3::new(0.0, 0.0, if q.z >= 0.0 { 1.0 } else { -1.0 })
                }
            }
            PrimitiveShape::Torus { major_radius, .. } => {
                let rho = (q.x * q.x + q.y * q.y).sqrt();
                let ring_point = if rho > 1e-12 {
                    Vec3::new(q.x / rho * major_radius, q.y / rho * major_radius, 0.0)
                } else {
                    Vec3::new(major_radius, 0.0, 0.0)
                };
                normalize_or_default(q - ring_point, 1e-12)
            }
            PrimitiveShape::Superellipsoid { .. } => {
                let h = FD_STEP;
                let dx = self.sdf_local(q + Vec3::new(h, 0.0, 0.0))
                    - self.sdf_local(q - Vec3::new(h, 0.0, 0.0));
                let dy = self.sdf_local(q + Vec3::new(0.0, h, 0.0))
                    - self.sdf_local(q - Vec3::new(0.0, h, 0.0));
                let dz = self.sdf_local(q + Vec3::new(0.0, 0.0, h))
                    - self.sdf_local(q - Vec3::new(0.0, 0.0, h));
                normalize_or_default(Vec3::new(dx, dy, dz), 1e-12)
            }
            PrimitiveShape::HalfSpace => Vec3::new(0.0, 0.0, 1.0),
        }
    }

    /// Superellipsoid inside–outside function, homogeneous of degree one:
    /// < 1 inside, 1 on the surface, > 1 outside.
    fn superellipsoid_f(&self, q: Vec3) -> f64 {
        let PrimitiveShape::Superellipsoid {
            half_extents,
            e1,
            e2,
        } = *self
        else {
            unreachable!("superellipsoid_f on non-superellipsoid");
        };
        let x = (q.x / half_extents[0]).abs();
        let y = (q.y / half_extents[1]).abs();
        let z = (q.z / half_extents[2]).abs();
        let planar = (x.powf(2.0 / e2) + y.powf(2.0 / e2)).powf(e2 / e1);
        (planar + z.powf(2.0 / e1)).powf(e1 / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::degenerate_normal;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sphere(r: f64) -> Primitive {
        Primitive::new(PrimitiveShape::Sphere { radius: r })
    }

    #[test]
    fn sphere_center_and_outside() {
        let s = sphere(0.5);
        let (occ, sdf, nf) = s.field(Vec3::zeros());
        assert_eq!(occ, 1);
        assert_relative_eq!(sdf, -0.5);
        assert_eq!(nf, degenerate_normal());

        let (occ, sdf, nf) = s.field(Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(occ, 0);
        assert_relative_eq!(sdf, 0.5);
        assert_relative_eq!(nf.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_counts_as_outside() {
        let s = sphere(0.5);
        assert_eq!(s.occupancy(Vec3::new(0.5, 0.0, 0.0)), 0);
        assert_relative_eq!(s.sdf(Vec3::new(0.5, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn cuboid_face_edge_corner_distances() {
        let b = Primitive::new(PrimitiveShape::Cuboid {
            half_extents: [0.2, 0.2, 0.2],
        });
        // Face.
        let (occ, sdf, nf) = b.field(Vec3::new(0.3, 0.0, 0.0));
        assert_eq!(occ, 0);
        assert_relative_eq!(sdf, 0.1, epsilon = 1e-12);
        assert_relative_eq!(nf.x, 1.0, epsilon = 1e-12);
        // Edge: distance to the (0.2, 0.2, ·) edge.
        let sdf = b.sdf(Vec3::new(0.3, 0.3, 0.0));
        assert_relative_eq!(sdf, (2.0f64).sqrt() * 0.1, epsilon = 1e-12);
        // Corner.
        let sdf = b.sdf(Vec3::new(0.3, 0.3, 0.3));
        assert_relative_eq!(sdf, (3.0f64).sqrt() * 0.1, epsilon = 1e-12);
        // Inside: nearest face.
        let (occ, sdf, nf) = b.field(Vec3::new(0.15, 0.0, 0.0));
        assert_eq!(occ, 1);
        assert_relative_eq!(sdf, -0.05, epsilon = 1e-12);
        assert_relative_eq!(nf.x, 1.0, epsilon = 1e-12);
        // Center: x-axis tie-break, positive side.
        assert_relative_eq!(b.normal(Vec3::zeros()).x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cylinder_wall_cap_and_rim() {
        let c = Primitive::new(PrimitiveShape::Cylinder {
            radius: 0.2,
            half_height: 0.3,
        });
        assert_relative_eq!(c.sdf(Vec3::new(0.5, 0.0, 0.0)), 0.3, epsilon = 1e-12);
        assert_relative_eq!(c.sdf(Vec3::new(0.0, 0.0, 0.5)), 0.2, epsilon = 1e-12);
        // Above the rim: hypot of the two overhangs.
        let sdf = c.sdf(Vec3::new(0.3, 0.0, 0.4));
        assert_relative_eq!(sdf, (0.1f64.powi(2) + 0.1f64.powi(2)).sqrt(), epsilon = 1e-12);
        // Inside near wall → radial normal.
        let nf = c.normal(Vec3::new(0.15, 0.0, 0.0));
        assert_relative_eq!(nf.x, 1.0, epsilon = 1e-12);
        // Inside near cap → axial normal.
        let nf = c.normal(Vec3::new(0.0, 0.0, 0.25));
        assert_relative_eq!(nf.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn torus_distances() {
        let t = Primitive::new(PrimitiveShape::Torus {
            major_radius: 0.3,
            minor_radius: 0.1,
        });
        assert_relative_eq!(t.sdf(Vec3::new(0.5, 0.0, 0.0)), 0.1, epsilon = 1e-12);
        assert_relative_eq!(t.sdf(Vec3::new(0.3, 0.0, 0.0)), -0.1, epsilon = 1e-12);
        assert_relative_eq!(t.sdf(Vec3::zeros()), 0.2, epsilon = 1e-12);
        let nf = t.normal(Vec3::new(0.45, 0.0, 0.0));
        assert_relative_eq!(nf.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn superellipsoid_with_unit_exponents_matches_sphere() {
        let se = Primitive::new(PrimitiveShape::Superellipsoid {
            half_extents: [0.4, 0.4, 0.4],
            e1: 1.0,
            e2: 1.0,
        });
        let s = sphere(0.4);
        for p in [
            Vec3::new(0.1, 0.2, -0.3),
            Vec3::new(0.5, 0.5, 0.5),
            Vec3::new(-0.05, 0.0, 0.02),
        ] {
            assert_relative_eq!(se.sdf(p), s.sdf(p), epsilon = 1e-9);
        }
    }

    #[test]
    fn superellipsoid_sign_matches_inside_outside_function() {
        let shape = PrimitiveShape::Superellipsoid {
            half_extents: [0.35, 0.25, 0.2],
            e1: 0.5,
            e2: 0.8,
        };
        let se = Primitive::new(shape.clone());
        for p in [
            Vec3::new(0.1, 0.1, 0.05),
            Vec3::new(0.34, 0.0, 0.0),
            Vec3::new(0.4, 0.2, 0.1),
            Vec3::new(0.0, 0.0, 0.21),
        ] {
            let f = shape.superellipsoid_f(p);
            assert_eq!(se.sdf(p) < 0.0, f < 1.0, "sign mismatch at {p:?}");
        }
    }

    #[test]
    fn half_space_is_signed_height() {
        let h = Primitive::new(PrimitiveShape::HalfSpace);
        assert_relative_eq!(h.sdf(Vec3::new(0.3, -0.2, 0.25)), 0.25);
        assert_eq!(h.occupancy(Vec3::new(0.0, 0.0, -0.1)), 1);
        assert_relative_eq!(h.normal(Vec3::zeros()).z, 1.0);
    }

    #[test]
    fn pose_transforms_field_rigidly() {
        // Rotation about x taking +z to +y (and +y to −z); lift along y.
        let rot = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0);
        let h = Primitive::with_pose(PrimitiveShape::HalfSpace, rot, Vec3::new(0.0, 0.2, 0.0));
        assert_relative_eq!(h.sdf(Vec3::new(0.0, 0.5, 0.0)), 0.3, epsilon = 1e-12);
        let nf = h.normal(Vec3::zeros());
        assert_relative_eq!(nf.y, 1.0, epsilon = 1e-12);

        // Rigid motion preserves distances for a metric primitive.
        let b0 = Primitive::new(PrimitiveShape::Cuboid {
            half_extents: [0.3, 0.2, 0.1],
        });
        let b1 = Primitive::with_pose(
            PrimitiveShape::Cuboid {
                half_extents: [0.3, 0.2, 0.1],
            },
            rot,
            Vec3::new(0.1, -0.05, 0.2),
        );
        let p = Vec3::new(0.4, 0.3, -0.2);
        let p_local_of_b1 = rot.transpose() * (p - Vec3::new(0.1, -0.05, 0.2));
        assert_relative_eq!(b1.sdf(p), b0.sdf(p_local_of_b1), epsilon = 1e-12);
    }

    #[test]
    fn serialization_round_trips() {
        let p = Primitive::with_pose(
            PrimitiveShape::Torus {
                major_radius: 0.3,
                minor_radius: 0.08,
            },
            Matrix3::identity(),
            Vec3::new(0.05, -0.1, 0.0),
        );
        let json = serde_json::to_string(&p).unwrap();
        let back: Primitive = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }

    fn arb_point() -> impl Strategy<Value = Vec3> {
        (
            -0.8f64..0.8,
            -0.8f64..0.8,
            -0.8f64..0.8,
        )
            .prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_metric_shape() -> impl Strategy<Value = PrimitiveShape> {
        prop_oneof![
            (0.05f64..0.5).prop_map(|radius| PrimitiveShape::Sphere { radius }),
            (0.05f64..0.4, 0.05f64..0.4, 0.05f64..0.4).prop_map(|(a, b, c)| {
                PrimitiveShape::Cuboid {
                    half_extents: [a, b, c],
                }
            }),
            (0.05f64..0.4, 0.05f64..0.4).prop_map(|(radius, half_height)| {
                PrimitiveShape::Cylinder {
                    radius,
                    half_height,
                }
            }),
            (0.1f64..0.35, 0.02f64..0.09).prop_map(|(major, minor)| PrimitiveShape::Torus {
                major_radius: major,
                minor_radius: minor,
            }),
            Just(PrimitiveShape::HalfSpace),
        ]
    }

    proptest! {
        #[test]
        fn metric_sdfs_are_one_lipschitz(
            shape in arb_metric_shape(),
            p in arb_point(),
            q in arb_point(),
        ) {
            let prim = Primitive::new(shape);
            let ds = (prim.sdf(p) - prim.sdf(q)).abs();
            prop_assert!(ds <= (p - q).norm() + 1e-9);
        }

        #[test]
        fn normals_are_unit_everywhere(shape in arb_metric_shape(), p in arb_point()) {
            let prim = Primitive::new(shape);
            let n = prim.normal(p).norm();
            prop_assert!((n - 1.0).abs() < 1e-6);
        }

        #[test]
        fn occupancy_agrees_with_sdf_sign(shape in arb_metric_shape(), p in arb_point()) {
            let prim = Primitive::new(shape);
            prop_assert_eq!(prim.occupancy(p) == 1, prim.sdf(p) < 0.0);
        }
    }
}
