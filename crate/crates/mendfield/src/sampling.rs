//! Probe-point generation and ground-truth labeling for a fractured shape
//! tuple, plus the binary sample-file format.
//!
//! Most probes concentrate near the surfaces where the field losses carry
//! signal: the fractured shape's boundary and the fracture surface itself,
//! each jittered at two Gaussian scales. The remainder covers the padded
//! cube uniformly. Labels are stored in `f32` exactly as they go to disk, so
//! a file round trip is bit-exact, and the fractured/restoration labels are
//! composed from the stored complete/break labels — recombining them is the
//! identity by construction.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fields::{compose, ComposeTarget, JointFieldSample, ShapeField};
use crate::fracture::ShapeTuple;
use crate::geometry::marching_cubes::GRID_HALF_EXTENT;
use crate::math::Vec3;

/// Probe count per shape tuple at desk scale.
pub const DEFAULT_N_POINTS: usize = 30_000;

/// Fraction of probes drawn near surfaces rather than uniformly.
pub const DEFAULT_SURFACE_FRACTION: f64 = 0.9;

/// Gaussian jitter scales for near-surface probes (coarse, fine).
pub const DEFAULT_NOISE_SIGMAS: (f64, f64) = (0.012, 0.0025);

/// SDF labels are clamped to this magnitude before storage.
pub const SDF_CLAMP: f64 = 0.1;

/// Probes this close to a surface count as boundary points and get
/// occupancy 0 (surfaces belong to the exterior).
pub const OCC_BOUNDARY_EPS: f64 = 1e-9;

const SAMPLE_MAGIC: &[u8; 7] = b"DJSAMP1";

/// The four shapes of a tuple, in label-storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Complete,
    Break,
    Fractured,
    Restoration,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Complete,
        ShapeKind::Break,
        ShapeKind::Fractured,
        ShapeKind::Restoration,
    ];
}

/// Ground-truth label of one shape at one probe: binary occupancy, clamped
/// SDF, unit normal. Stored in `f32` — the on-disk precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeLabel {
    pub occ: u8,
    pub sdf: f32,
    pub nf: [f32; 3],
}

impl ShapeLabel {
    /// Applies the storage rules to a raw field sample: boundary points get
    /// occupancy 0, the SDF clamps to ±[`SDF_CLAMP`], everything narrows to
    /// `f32`.
    pub fn from_sample(s: &JointFieldSample) -> Self {
        let occ = if s.sdf.abs() < OCC_BOUNDARY_EPS {
            0
        } else {
            u8::from(s.occ >= 0.5)
        };
        ShapeLabel {
            occ,
            sdf: s.sdf.clamp(-SDF_CLAMP, SDF_CLAMP) as f32,
            nf: [s.nf.x as f32, s.nf.y as f32, s.nf.z as f32],
        }
    }

    /// Widens the stored label back to a field sample.
    pub fn as_sample(&self) -> JointFieldSample {
        JointFieldSample::new(
            f64::from(self.occ),
            f64::from(self.sdf),
            Vec3::new(
                f64::from(self.nf[0]),
                f64::from(self.nf[1]),
                f64::from(self.nf[2]),
            ),
        )
    }
}

/// One probe: position plus the labels of all four shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub pos: [f32; 3],
    pub c: ShapeLabel,
    pub b: ShapeLabel,
    pub f: ShapeLabel,
    pub r: ShapeLabel,
}

impl ProbePoint {
    pub fn position(&self) -> Vec3 {
        Vec3::new(
            f64::from(self.pos[0]),
            f64::from(self.pos[1]),
            f64::from(self.pos[2]),
        )
    }

    pub fn label(&self, kind: ShapeKind) -> &ShapeLabel {
        match kind {
            ShapeKind::Complete => &self.c,
            ShapeKind::Break => &self.b,
            ShapeKind::Fractured => &self.f,
            ShapeKind::Restoration => &self.r,
        }
    }
}

/// The labeled probes of one shape tuple.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbeSet {
    pub points: Vec<ProbePoint>,
}

impl ProbeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the binary sample file: `"DJSAMP1"`, little-endian `u32`
    /// count, then per point the `f32` position and per shape (C, B, F, R)
    /// `u8` occupancy, `f32` SDF, 3×`f32` normal.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io_err = |e| Error::io(path, e);
        out.write_all(SAMPLE_MAGIC).map_err(io_err)?;
        out.write_all(&(self.points.len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for p in &self.points {
            for x in p.pos {
                out.write_all(&x.to_le_bytes()).map_err(io_err)?;
            }
            for kind in ShapeKind::ALL {
                let l = p.label(kind);
                out.write_all(&[l.occ]).map_err(io_err)?;
                out.write_all(&l.sdf.to_le_bytes()).map_err(io_err)?;
                for n in l.nf {
                    out.write_all(&n.to_le_bytes()).map_err(io_err)?;
                }
            }
        }
        out.flush().map_err(io_err)
    }

    pub fn read_from(path: &Path) -> Result<ProbeSet> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg,
        };

        let mut magic = [0u8; 7];
        input
            .read_exact(&mut magic)
            .map_err(|e| Error::io(path, e))?;
        if &magic != SAMPLE_MAGIC {
            return Err(parse_err(format!(
                "bad sample-file magic {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let mut count_bytes = [0u8; 4];
        input
            .read_exact(&mut count_bytes)
            .map_err(|e| Error::io(path, e))?;
        let count = u32::from_le_bytes(count_bytes) as usize;

        // 3×f32 position + 4 shapes × (u8 + f32 + 3×f32).
        let mut record = [0u8; 12 + 4 * 17];
        let mut points = Vec::with_capacity(count);
        for i in 0..count {
            input.read_exact(&mut record).map_err(|_| {
                parse_err(format!("truncated at point {i} of {count}"))
            })?;
            let f32_at = |o: usize| {
                f32::from_le_bytes([record[o], record[o + 1], record[o + 2], record[o + 3]])
            };
            let label_at = |o: usize| ShapeLabel {
                occ: record[o],
                sdf: f32_at(o + 1),
                nf: [f32_at(o + 5), f32_at(o + 9), f32_at(o + 13)],
            };
            points.push(ProbePoint {
                pos: [f32_at(0), f32_at(4), f32_at(8)],
                c: label_at(12),
                b: label_at(29),
                f: label_at(46),
                r: label_at(63),
            });
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
            return Err(parse_err(format!(
                "trailing bytes after {count} points"
            )));
        }
        Ok(ProbeSet { points })
    }
}

/// Draws the probe positions for a tuple: `surface_fraction` of them near
/// the fractured shape's surface and the fracture surface (jittered at the
/// two Gaussian scales, alternating), the rest uniform in the padded cube.
/// Deterministic under `seed`.
pub fn sample_points(
    tuple: &ShapeTuple,
    n_total: usize,
    surface_fraction: f64,
    noise_sigmas: (f64, f64),
    seed: u64,
) -> Result<Vec<Vec3>> {
    if n_total == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    if !(0.0..=1.0).contains(&surface_fraction) {
        return Err(Error::InvalidConfig(format!(
            "surface fraction must lie in [0, 1], got {surface_fraction}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let n_surface = ((n_total as f64 * surface_fraction).round() as usize).min(n_total);
    let n_fractured = n_surface / 2;
    let n_break = n_surface - n_fractured;
    let n_uniform = n_total - n_surface;

    let mut points = Vec::with_capacity(n_total);

    if n_fractured > 0 {
        if tuple.fractured_mesh.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (i, (p, _)) in tuple
            .fractured_mesh
            .sample_surface(n_fractured, &mut rng)
            .into_iter()
            .enumerate()
        {
            points.push(p + gaussian_jitter(&mut rng, sigma_for(i, noise_sigmas)));
        }
    }

    if n_break > 0 {
        // The fracture surface proper: break-surface patch samples inside
        // the complete shape. An empty intersection (surface grazing the
        // shape) falls back to the whole patch.
        let patch = tuple.brk.samples();
        let mut pool: Vec<Vec3> = patch
            .iter()
            .filter(|(p, _)| tuple.complete.sdf(*p) <= 0.0)
            .map(|(p, _)| *p)
            .collect();
        if pool.is_empty() {
            pool = patch.iter().map(|(p, _)| *p).collect();
        }
        for i in 0..n_break {
            let base = pool[rng.gen_range(0..pool.len())];
            points.push(base + gaussian_jitter(&mut rng, sigma_for(i, noise_sigmas)));
        }
    }

    for _ in 0..n_uniform {
        points.push(Vec3::new(
            rng.gen_range(-GRID_HALF_EXTENT..GRID_HALF_EXTENT),
            rng.gen_range(-GRID_HALF_EXTENT..GRID_HALF_EXTENT),
            rng.gen_range(-GRID_HALF_EXTENT..GRID_HALF_EXTENT),
        ));
    }

    Ok(points)
}

fn sigma_for(i: usize, (sigma1, sigma2): (f64, f64)) -> f64 {
    if i % 2 == 0 {
        sigma1
    } else {
        sigma2
    }
}

fn gaussian_jitter(rng: &mut ChaCha20Rng, sigma: f64) -> Vec3 {
    Vec3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * sigma
}

/// Labels every probe against all four shapes. Complete and break labels
/// come from their fields; fractured and restoration labels are composed
/// from those stored labels, so the set satisfies the composition rules
/// exactly as written to disk.
pub fn label_points(tuple: &ShapeTuple, points: &[Vec3]) -> ProbeSet {
    let points = points
        .iter()
        .map(|p| {
            let pos = [p.x as f32, p.y as f32, p.z as f32];
            let p32 = Vec3::new(
                f64::from(pos[0]),
                f64::from(pos[1]),
                f64::from(pos[2]),
            );
            let c = ShapeLabel::from_sample(&tuple.complete.sample(p32));
            let b = ShapeLabel::from_sample(&tuple.brk.sample(p32));
            let cs = c.as_sample();
            let bs = b.as_sample();
            let f = ShapeLabel::from_sample(&compose(&cs, &bs, ComposeTarget::Fractured));
            let r = ShapeLabel::from_sample(&compose(&cs, &bs, ComposeTarget::Restoration));
            ProbePoint { pos, c, b, f, r }
        })
        .collect();
    ProbeSet { points }
}
