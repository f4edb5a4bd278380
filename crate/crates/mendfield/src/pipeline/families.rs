//! Procedural shape families, so the pipeline runs end-to-end without any
//! external dataset.
//!
//! Each family draws its dimensions from a per-shape seed; a
//! [`ShapeRecipe`] in the dataset manifest is enough to rebuild the exact
//! complete field later. Shapes are sized to sit inside the unit cube with
//! room for the marching-cubes padding.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::fields::{JointFieldSample, ShapeField};
use crate::fracture::DynField;
use crate::geometry::{Primitive, PrimitiveShape};
use crate::math::{Matrix3, Vec3};

/// Boolean tree over posed primitives. Min/max SDF composition keeps exact
/// signs and zero sets; magnitudes are conservative near concave edges,
/// which is all the pipeline's labeling and meshing need.
#[derive(Debug, Clone, PartialEq)]
pub enum Csg {
    Leaf(Primitive),
    Union(Vec<Csg>),
    /// First operand minus the second.
    Difference(Box<Csg>, Box<Csg>),
}

impl Csg {
    pub fn sphere(radius: f64, center: Vec3) -> Csg {
        Csg::Leaf(Primitive::with_pose(
            PrimitiveShape::Sphere { radius },
            Matrix3::identity(),
            center,
        ))
    }

    fn eval(&self, p: Vec3) -> (f64, Vec3) {
        match self {
            Csg::Leaf(prim) => (prim.sdf(p), prim.normal(p)),
            Csg::Union(parts) => {
                let mut best = parts[0].eval(p);
                for part in &parts[1..] {
                    let cand = part.eval(p);
                    if cand.0 < best.0 {
                        best = cand;
                    }
                }
                best
            }
            Csg::Difference(a, b) => {
                let (sa, na) = a.eval(p);
                let (sb, nb) = b.eval(p);
                if sa >= -sb {
                    (sa, na)
                } else {
                    (-sb, -nb)
                }
            }
        }
    }
}

/// A [`Csg`] tree as a queryable joint field.
pub struct CsgField(pub Csg);

impl ShapeField for CsgField {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        let (sdf, nf) = self.0.eval(p);
        JointFieldSample::new(f64::from(u8::from(sdf < 0.0)), sdf, nf)
    }
    fn sdf(&self, p: Vec3) -> f64 {
        self.0.eval(p).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Spheres,
    Boxes,
    Superellipsoids,
    Bowls,
    Mugs,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Spheres,
        Family::Boxes,
        Family::Superellipsoids,
        Family::Bowls,
        Family::Mugs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Spheres => "spheres",
            Family::Boxes => "boxes",
            Family::Superellipsoids => "superellipsoids",
            Family::Bowls => "bowls",
            Family::Mugs => "mugs",
        }
    }

    /// Draws one member of the family.
    pub fn build(self, seed: u64) -> Csg {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        match self {
            Family::Spheres => Csg::sphere(rng.gen_range(0.30..=0.42), Vec3::zeros()),
            Family::Boxes => Csg::Leaf(Primitive::with_pose(
                PrimitiveShape::Cuboid {
                    half_extents: [
                        rng.gen_range(0.18..=0.38),
                        rng.gen_range(0.18..=0.38),
                        rng.gen_range(0.18..=0.38),
                    ],
                },
                rotation_about_z(rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)),
                Vec3::zeros(),
            )),
            Family::Superellipsoids => Csg::Leaf(Primitive::with_pose(
                PrimitiveShape::Superellipsoid {
                    half_extents: [
                        rng.gen_range(0.20..=0.38),
                        rng.gen_range(0.20..=0.38),
                        rng.gen_range(0.20..=0.38),
                    ],
                    e1: rng.gen_range(0.5..=1.3),
                    e2: rng.gen_range(0.5..=1.3),
                },
                rotation_about_z(rng.gen_range(0.0..std::f64::consts::FRAC_PI_2)),
                Vec3::zeros(),
            )),
            Family::Bowls => {
                let outer = rng.gen_range(0.30..=0.42);
                let wall = rng.gen_range(0.05..=0.09);
                let rim = outer * rng.gen_range(0.05..=0.25);
                let cut = Primitive::with_pose(
                    // Local z ≤ 0 is inside the half-space; flipping it
                    // upside down makes "inside" the region above the rim.
                    PrimitiveShape::HalfSpace,
                    flipped_z(),
                    Vec3::new(0.0, 0.0, rim),
                );
                Csg::Difference(
                    Box::new(Csg::Difference(
                        Box::new(Csg::sphere(outer, Vec3::zeros())),
                        Box::new(Csg::sphere(outer - wall, Vec3::zeros())),
                    )),
                    Box::new(Csg::Leaf(cut)),
                )
            }
            Family::Mugs => {
                let radius = rng.gen_range(0.16..=0.22);
                let half_height = rng.gen_range(0.20..=0.28);
                let wall = rng.gen_range(0.035..=0.05);
                let body = Csg::Difference(
                    Box::new(Csg::Leaf(Primitive::new(PrimitiveShape::Cylinder {
                        radius,
                        half_height,
                    }))),
                    // The cavity's rim pokes above the body so the mug is
                    // open on top while the bottom keeps one wall thickness.
                    Box::new(Csg::Leaf(Primitive::with_pose(
                        PrimitiveShape::Cylinder {
                            radius: radius - wall,
                            half_height,
                        },
                        Matrix3::identity(),
                        Vec3::new(0.0, 0.0, wall),
                    ))),
                );
                let major = rng.gen_range(0.07..=0.10);
                let handle = Csg::Leaf(Primitive::with_pose(
                    PrimitiveShape::Torus {
                        major_radius: major,
                        minor_radius: rng.gen_range(0.030..=0.045),
                    },
                    // Ring plane from local xy into world xz, so the handle
                    // arcs alongside the body axis; its inner rim overlaps
                    // the wall.
                    rotation_about_x(std::f64::consts::FRAC_PI_2),
                    Vec3::new(radius + 0.6 * major, 0.0, 0.0),
                ));
                Csg::Union(vec![body, handle])
            }
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn rotation_about_z(angle: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), angle).into_inner()
}

fn rotation_about_x(angle: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), angle).into_inner()
}

/// Rotation by π about x: local +z maps to world −z.
fn flipped_z() -> Matrix3<f64> {
    rotation_about_x(std::f64::consts::PI)
}

/// Enough to rebuild a procedural complete shape exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeRecipe {
    pub family: Family,
    pub seed: u64,
}

impl ShapeRecipe {
    pub fn field(&self) -> DynField {
        Arc::new(CsgField(self.family.build(self.seed)))
    }
}
