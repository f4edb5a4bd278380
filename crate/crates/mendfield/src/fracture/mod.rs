//! Synthetic fracturing: carve a complete shape with a randomized analytic
//! primitive, keep fractures that remove 5–20% of the shape, and fit a
//! thin-plate-spline break surface to the fracture region.
//!
//! Two break fields exist side by side:
//! * [`PrimitiveBreakField`] — the exact complement of the fracture
//!   primitive, clipped to the padded unit cube. It defines the *geometry*:
//!   ground-truth fractured/restoration meshes and the retention test.
//! * [`BreakField`] — the smooth thin-plate-spline surface fitted to the
//!   fracture region, with distances measured against a dense sample of the
//!   patch. It defines the *labels*: the break shape B of a training tuple,
//!   so stored F/R labels compose exactly from stored C/B labels.

pub mod tps;

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{StandardNormal, UnitBall};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    ComposedField, ComposeTarget, JointFieldSample, ShapeField,
};
use crate::geometry::{marching_cubes, Primitive, PrimitiveShape, TriangleMesh, GRID_PADDING};
use crate::math::{Matrix3, Vec3};
use crate::spatial::KdTree;
pub use tps::BreakSurface;

/// A complete-shape vertex counts as removed when the fractured field's SDF
/// exceeds this. Absorbs marching-cubes placement error of the vertices, so
/// an untouched shape reports a removal fraction of 0.
pub const RETENTION_EPS: f64 = 1e-3;

/// Fractured-mesh vertices farther than this from the complete surface
/// belong to the fracture region (the freshly exposed break facet).
pub const FRACTURE_REGION_EPS: f64 = 1e-3;

/// A shared, queryable shape.
pub type DynField = Arc<dyn ShapeField>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractureKind {
    Sphere,
    Cuboid,
    Cylinder,
    Torus,
    Superellipsoid,
    HalfSpace,
}

/// Distribution over fracture primitives: which kinds to draw (uniformly),
/// how large they are, and how far their centers scatter around the surface
/// anchor point. `seed` fixes the whole dataset's randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracturePrimitiveSpec {
    pub kinds: Vec<FractureKind>,
    /// Primitive extent (diameter-like), sampled uniformly.
    pub scale_range: [f64; 2],
    /// Center jitter radius as a fraction of the sampled scale.
    pub center_jitter: f64,
    pub seed: u64,
}

impl Default for FracturePrimitiveSpec {
    fn default() -> Self {
        FracturePrimitiveSpec {
            kinds: vec![
                FractureKind::Sphere,
                FractureKind::Cuboid,
                FractureKind::Cylinder,
                FractureKind::HalfSpace,
            ],
            scale_range: [0.25, 0.55],
            center_jitter: 0.25,
            seed: 0,
        }
    }
}

impl FracturePrimitiveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::InvalidConfig("fracture kinds list is empty".into()));
        }
        if !(self.scale_range[0] > 0.0 && self.scale_range[1] >= self.scale_range[0]) {
            return Err(Error::InvalidConfig(format!(
                "fracture scale range must be positive and ordered, got {:?}",
                self.scale_range
            )));
        }
        if self.center_jitter < 0.0 {
            return Err(Error::InvalidConfig("center_jitter must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Draws one primitive anchored near `anchor` (a point on the complete
    /// surface).
    fn sample_primitive(&self, rng: &mut ChaCha20Rng, anchor: Vec3) -> Primitive {
        let kind = self.kinds[rng.gen_range(0..self.kinds.len())];
        let scale = rng.gen_range(self.scale_range[0]..=self.scale_range[1]);
        let rotation = random_rotation(rng);
        let jitter = sample_in_ball(rng) * (self.center_jitter * scale);
        let center = anchor + jitter;
        let shape = match kind {
            FractureKind::Sphere => PrimitiveShape::Sphere {
                radius: scale * 0.5,
            },
            FractureKind::Cuboid => PrimitiveShape::Cuboid {
                half_extents: [
                    scale * 0.5 * rng.gen_range(0.5..=1.0),
                    scale * 0.5 * rng.gen_range(0.5..=1.0),
                    scale * 0.5 * rng.gen_range(0.5..=1.0),
                ],
            },
            FractureKind::Cylinder => PrimitiveShape::Cylinder {
                radius: scale * 0.5 * rng.gen_range(0.5..=1.0),
                half_height: scale * 0.5 * rng.gen_range(0.5..=1.0),
            },
            FractureKind::Torus => PrimitiveShape::Torus {
                major_radius: scale * 0.35,
                minor_radius: scale * 0.15 * rng.gen_range(0.5..=1.0),
            },
            FractureKind::Superellipsoid => PrimitiveShape::Superellipsoid {
                half_extents: [
                    scale * 0.5 * rng.gen_range(0.5..=1.0),
                    scale * 0.5 * rng.gen_range(0.5..=1.0),
                    scale * 0.5 * rng.gen_range(0.5..=1.0),
                ],
                e1: rng.gen_range(0.4..=1.2),
                e2: rng.gen_range(0.4..=1.2),
            },
            FractureKind::HalfSpace => PrimitiveShape::HalfSpace,
        };
        Primitive::with_pose(shape, rotation, center)
    }
}

/// Uniform random rotation from a normalized Gaussian quaternion.
fn random_rotation(rng: &mut ChaCha20Rng) -> Matrix3<f64> {
    loop {
        let q = nalgebra::Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if q.norm() > 1e-6 {
            return nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        }
    }
}

fn sample_in_ball(rng: &mut ChaCha20Rng) -> Vec3 {
    Vec3::from(rng.sample::<[f64; 3], _>(UnitBall))
}

/// Complement of the fracture primitive, clipped to the padded unit cube:
/// the exact break shape. Inside ⟺ outside the primitive and inside the
/// cube.
pub struct PrimitiveBreakField {
    primitive: Primitive,
    cube: Primitive,
}

impl PrimitiveBreakField {
    pub fn new(primitive: Primitive) -> Self {
        let half = 0.5 + GRID_PADDING;
        PrimitiveBreakField {
            primitive,
            cube: Primitive::new(PrimitiveShape::Cuboid {
                half_extents: [half, half, half],
            }),
        }
    }

    pub fn primitive(&self) -> &Primitive {
        &self.primitive
    }
}

impl ShapeField for PrimitiveBreakField {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        let (_, s_p, n_p) = self.primitive.field(p);
        let s_cube = self.cube.sdf(p);
        // Intersection of the complement (−s_p) with the cube.
        let sdf = (-s_p).max(s_cube);
        let occ = f64::from(sdf < 0.0);
        // Normal of whichever surface is exposed; complement flips the
        // primitive normal. Ties prefer the primitive surface.
        let nf = if -s_p >= s_cube {
            -n_p
        } else {
            self.cube.normal(p)
        };
        JointFieldSample::new(occ, sdf, nf)
    }

    fn sdf(&self, p: Vec3) -> f64 {
        (-self.primitive.sdf(p)).max(self.cube.sdf(p))
    }
}

/// The clipped patch sampling backing a [`BreakField`] must hold at least
/// this many points.
pub const MIN_PATCH_SAMPLES: usize = 10_000;

/// The smooth break shape defined by a fitted [`BreakSurface`]: occupancy
/// from the side function (fractured side is inside B), distances from a
/// dense sample of the surface patch.
pub struct BreakField {
    surface: BreakSurface,
    samples: Vec<(Vec3, Vec3)>,
    spacing: f64,
    index: KdTree,
}

impl BreakField {
    /// `samples` are (position, normal) pairs of the fracture surface, the
    /// normals pointing toward the restoration (positive-g) side; `spacing`
    /// is the largest gap between neighboring samples.
    pub fn new(surface: BreakSurface, samples: Vec<(Vec3, Vec3)>, spacing: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySurface);
        }
        let index = KdTree::build(samples.iter().map(|(p, _)| *p).collect());
        Ok(BreakField {
            surface,
            samples,
            spacing,
            index,
        })
    }

    /// Builds the patch sampling from the surface itself, densifying past
    /// the starting sweep until [`MIN_PATCH_SAMPLES`] survive the cube clip.
    pub fn from_surface(surface: BreakSurface, grid: usize) -> Result<Self> {
        let mut grid = grid.max(8);
        let mut samples = surface.sample_patch(grid);
        while samples.len() < MIN_PATCH_SAMPLES && grid < 4096 {
            grid = grid * 3 / 2;
            samples = surface.sample_patch(grid);
        }
        let spacing = BreakSurface::patch_spacing(grid);
        BreakField::new(surface, samples, spacing)
    }

    pub fn surface(&self) -> &BreakSurface {
        &self.surface
    }

    pub fn samples(&self) -> &[(Vec3, Vec3)] {
        &self.samples
    }

    /// Plane-domain gap between neighboring patch samples: the resolution
    /// limit of this field's distance queries.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

impl ShapeField for BreakField {
    fn sample(&self, p: Vec3) -> JointFieldSample {
        let g = self.surface.g(p);
        let (nearest, d2) = self.index.nearest(p);
        let d = d2.sqrt();
        let half = 0.5 + GRID_PADDING;
        let in_cube = p.x.abs() < half && p.y.abs() < half && p.z.abs() < half;
        // Fractured side (g < 0) is the inside of the break shape.
        let occ = f64::from(g < 0.0 && d > 0.0 && in_cube);
        let sdf = if g < 0.0 { -d } else { d };
        JointFieldSample::new(occ, sdf, self.samples[nearest].1)
    }
}

/// Everything known about one fractured shape: the exact fields, the fitted
/// break surface, and the meshes the pipeline stores.
pub struct ShapeTuple {
    pub complete: DynField,
    /// Label fields: composed from `complete` and the TPS break field.
    pub brk: Arc<BreakField>,
    pub fractured: ComposedField<DynField, Arc<BreakField>>,
    pub restoration: ComposedField<DynField, Arc<BreakField>>,
    /// The primitive that produced the fracture (exact geometry).
    pub primitive: Primitive,
    /// Meshes extracted from the exact primitive-CSG fields.
    pub fractured_mesh: TriangleMesh,
    pub restoration_mesh: TriangleMesh,
    /// Fracture-region points the break surface was fitted to.
    pub fracture_region: Vec<Vec3>,
    /// 1-based attempt that passed the retention test.
    pub attempt: usize,
    /// Fraction of complete-mesh vertices the fracture removed.
    pub removed_fraction: f64,
}

impl ShapeTuple {
    /// Builds the tuple from its stored parts, deriving the composed
    /// fractured/restoration label fields. This is how a tuple comes back
    /// from disk.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        complete: DynField,
        brk: Arc<BreakField>,
        primitive: Primitive,
        fractured_mesh: TriangleMesh,
        restoration_mesh: TriangleMesh,
        fracture_region: Vec<Vec3>,
        attempt: usize,
        removed_fraction: f64,
    ) -> Self {
        let fractured = ComposedField::new(
            Arc::clone(&complete),
            Arc::clone(&brk),
            ComposeTarget::Fractured,
        );
        let restoration = ComposedField::new(
            Arc::clone(&complete),
            Arc::clone(&brk),
            ComposeTarget::Restoration,
        );
        ShapeTuple {
            complete,
            brk,
            fractured,
            restoration,
            primitive,
            fractured_mesh,
            restoration_mesh,
            fracture_region,
            attempt,
            removed_fraction,
        }
    }
}

/// Outcome of [`attempt_fracture`]: rejection is a value, not an error.
pub enum FractureOutcome {
    Accepted(Box<ShapeTuple>),
    Rejected { attempts: usize },
}

/// Knobs of the fracturing procedure itself (as opposed to the primitive
/// distribution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractureParams {
    pub max_attempts: usize,
    pub retention: [f64; 2],
    /// Marching-cubes resolution for the fractured/restoration meshes.
    pub mesh_resolution: usize,
    pub lambda_tps: f64,
    /// Plane-domain sweep size for the break-surface patch sampling.
    pub patch_grid: usize,
}

impl Default for FractureParams {
    fn default() -> Self {
        FractureParams {
            max_attempts: 15,
            retention: [0.05, 0.20],
            mesh_resolution: 96,
            lambda_tps: tps::DEFAULT_LAMBDA_TPS,
            patch_grid: 120,
        }
    }
}

/// Carves `complete` with one primitive drawn from `spec` (stream `shape_seed`
/// of the spec's seed): returns the exact fractured and restoration fields
/// and the primitive itself.
pub fn fracture_shape(
    complete: DynField,
    spec: &FracturePrimitiveSpec,
    shape_seed: u64,
) -> (
    ComposedField<DynField, PrimitiveBreakField>,
    ComposedField<DynField, PrimitiveBreakField>,
    Primitive,
) {
    let mut rng = rng_for(spec, shape_seed);
    let anchor = surface_anchor(complete.as_ref(), &mut rng);
    let primitive = spec.sample_primitive(&mut rng, anchor);
    compose_with_primitive(complete, primitive)
}

fn compose_with_primitive(
    complete: DynField,
    primitive: Primitive,
) -> (
    ComposedField<DynField, PrimitiveBreakField>,
    ComposedField<DynField, PrimitiveBreakField>,
    Primitive,
) {
    let fractured = ComposedField::new(
        Arc::clone(&complete),
        PrimitiveBreakField::new(primitive.clone()),
        ComposeTarget::Fractured,
    );
    let restoration = ComposedField::new(
        complete,
        PrimitiveBreakField::new(primitive.clone()),
        ComposeTarget::Restoration,
    );
    (fractured, restoration, primitive)
}

fn rng_for(spec: &FracturePrimitiveSpec, shape_seed: u64) -> ChaCha20Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(shape_seed);
    rng
}

/// A point on (within 1e-3 of) the complete surface, found by projecting a
/// random cube point along the field's normal; falls back to the last
/// iterate.
fn surface_anchor(complete: &dyn ShapeField, rng: &mut ChaCha20Rng) -> Vec3 {
    for _ in 0..20 {
        let mut p = Vec3::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        );
        for _ in 0..5 {
            let s = complete.sample(p);
            p -= s.nf * s.sdf;
        }
        if complete.sdf(p).abs() <= 1e-3 {
            return p;
        }
    }
    Vec3::zeros()
}

/// Fraction of complete-mesh vertices strictly carved away by the fracture
/// (fractured SDF > [`RETENTION_EPS`]).
pub fn retention_fraction(complete_mesh: &TriangleMesh, fractured: &dyn ShapeField) -> f64 {
    let removed = complete_mesh
        .vertices
        .iter()
        .filter(|v| fractured.sdf(**v) > RETENTION_EPS)
        .count();
    removed as f64 / complete_mesh.vertices.len() as f64
}

/// True when the removal fraction lies within `[lo, hi]`.
pub fn retention_test(
    complete_mesh: &TriangleMesh,
    fractured: &dyn ShapeField,
    lo: f64,
    hi: f64,
) -> bool {
    let f = retention_fraction(complete_mesh, fractured);
    (lo..=hi).contains(&f)
}

/// Fits the break surface for an accepted fracture: extracts the fractured
/// mesh, collects its fracture-region vertices, fits the TPS, and orients it
/// toward the removed (restoration-side) vertices.
fn fit_break_for_fracture(
    complete: &DynField,
    fractured_exact: &ComposedField<DynField, PrimitiveBreakField>,
    complete_mesh: &TriangleMesh,
    params: &FractureParams,
) -> Result<(BreakSurface, TriangleMesh, Vec<Vec3>)> {
    let fx = |p: Vec3| fractured_exact.sdf(p);
    let fractured_mesh = marching_cubes(fx, params.mesh_resolution, 0.0);
    if fractured_mesh.is_empty() {
        return Err(Error::EmptySurface);
    }

    let fracture_region: Vec<Vec3> = fractured_mesh
        .vertices
        .iter()
        .copied()
        .filter(|v| complete.sdf(*v).abs() > FRACTURE_REGION_EPS)
        .collect();
    let mut surface = BreakSurface::fit(&fracture_region, params.lambda_tps)?;

    // Removed vertices sit on the restoration side of the break.
    let removed: Vec<Vec3> = complete_mesh
        .vertices
        .iter()
        .copied()
        .filter(|v| fractured_exact.sdf(*v) > RETENTION_EPS)
        .collect();
    let hint = removed.iter().sum::<Vec3>() / removed.len().max(1) as f64;
    surface.orient_toward(hint);
    Ok((surface, fractured_mesh, fracture_region))
}

/// fit_break_surface of the module contract: plane + TPS over the fracture
/// region points.
pub fn fit_break_surface(points: &[Vec3], lambda_tps: f64) -> Result<BreakSurface> {
    BreakSurface::fit(points, lambda_tps)
}

/// Tries up to `params.max_attempts` primitives from `spec`; the first one
/// whose removal fraction passes the retention window yields a full
/// [`ShapeTuple`]. Deterministic given (`spec.seed`, `shape_seed`).
pub fn attempt_fracture(
    complete: DynField,
    complete_mesh: &TriangleMesh,
    spec: &FracturePrimitiveSpec,
    shape_seed: u64,
    params: &FractureParams,
) -> Result<FractureOutcome> {
    spec.validate()?;
    let mut rng = rng_for(spec, shape_seed);
    for attempt in 1..=params.max_attempts {
        let anchor = surface_anchor(complete.as_ref(), &mut rng);
        let primitive = spec.sample_primitive(&mut rng, anchor);
        let (fractured_exact, restoration_exact, primitive) =
            compose_with_primitive(Arc::clone(&complete), primitive);

        let fraction = retention_fraction(complete_mesh, &fractured_exact);
        if !(params.retention[0]..=params.retention[1]).contains(&fraction) {
            continue;
        }

        let fitted = fit_break_for_fracture(&complete, &fractured_exact, complete_mesh, params);
        let (surface, fractured_mesh, fracture_region) = match fitted {
            Ok(ok) => ok,
            // A degenerate fracture region (e.g. a sliver) fails this
            // attempt, not the whole shape.
            Err(Error::DegenerateInput(_)) | Err(Error::EmptySurface) => continue,
            Err(e) => return Err(e),
        };

        let restoration_mesh = marching_cubes(
            |p| restoration_exact.sdf(p),
            params.mesh_resolution,
            0.0,
        );

        let brk = Arc::new(BreakField::from_surface(surface, params.patch_grid)?);
        return Ok(FractureOutcome::Accepted(Box::new(ShapeTuple::assemble(
            complete,
            brk,
            primitive,
            fractured_mesh,
            restoration_mesh,
            fracture_region,
            attempt,
            fraction,
        ))));
    }
    Ok(FractureOutcome::Rejected {
        attempts: params.max_attempts,
    })
}
