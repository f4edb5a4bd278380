//! The five pipeline stages behind the `mendfield` binary.
//!
//! Every stage works inside one output directory: `fracture` creates the
//! dataset and its manifest, `sample` adds labeled probe sets, `train` fits
//! the autodecoder, `infer` restores the test split, and `eval` scores the
//! restorations. Stages are deterministic given the config; reruns produce
//! byte-identical artifacts.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ShapeField;
use crate::fracture::{
    attempt_fracture, BreakField, BreakSurface, DynField, FractureOutcome, FractureParams,
    FracturePrimitiveSpec, ShapeTuple, FRACTURE_REGION_EPS,
};
use crate::geometry::{
    marching_cubes, mesh_read, mesh_write, normalize_to_unit_cube, MeshField, MeshFormat,
    Primitive, TriangleMesh,
};
use crate::learn::{repair, train, Model, TrainOutcome};
use crate::math::Vec3;
use crate::metrics::{chamfer_distance, nfre, normal_consistency, EvalReport, ShapeEval};
use crate::neural::Checkpoint;
use crate::pipeline::config::{DatasetConfig, PipelineConfig};
use crate::pipeline::families::ShapeRecipe;
use crate::sampling::{label_points, sample_points, ProbeSet};

pub const MANIFEST_FILE: &str = "manifest.json";

/// At eval time, a point on the fractured surface counts as fracture region
/// when it sits farther than this from the complete surface. Looser than
/// the mesh-space [`FRACTURE_REGION_EPS`] because surface samples
/// interpolate across marching-cubes triangles.
pub const EVAL_MASK_EPS: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Artifact paths of one shape, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFiles {
    pub complete: String,
    pub fractured: String,
    pub restoration: String,
    pub break_surface: String,
    pub samples: String,
}

impl ShapeFiles {
    fn for_shape(name: &str) -> ShapeFiles {
        let base = format!("shapes/{name}");
        ShapeFiles {
            complete: format!("{base}/complete.obj"),
            fractured: format!("{base}/fractured.obj"),
            restoration: format!("{base}/restoration.obj"),
            break_surface: format!("{base}/break_surface.json"),
            samples: format!("{base}/samples.bin"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub name: String,
    pub class: String,
    pub split: Split,
    /// Stream seed of this shape's fracture attempts.
    pub seed: u64,
    /// Procedural source; absent when the shape came from a mesh file.
    pub recipe: Option<ShapeRecipe>,
    /// The primitive that produced the accepted fracture.
    pub primitive: Primitive,
    /// 1-based attempt that passed the retention test.
    pub attempt: usize,
    pub removed_fraction: f64,
    pub files: ShapeFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedShape {
    pub name: String,
    pub class: String,
    pub reason: String,
}

/// The dataset index `fracture` writes and every later stage reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub shapes: Vec<ShapeEntry>,
    pub rejected: Vec<RejectedShape>,
    pub fracture: FracturePrimitiveSpec,
    pub fracture_params: FractureParams,
}

impl Manifest {
    pub fn path(out: &Path) -> PathBuf {
        out.join(MANIFEST_FILE)
    }

    pub fn read(out: &Path) -> Result<Manifest> {
        read_json(&Manifest::path(out), "mendfield fracture")
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        write_json(&Manifest::path(out), self)
    }

    pub fn split_shapes(&self, split: Split) -> Vec<&ShapeEntry> {
        self.shapes.iter().filter(|s| s.split == split).collect()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a JSON artifact, naming the producing command when it is absent.
fn read_json<T: DeserializeOwned>(path: &Path, producer: &str) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            producer: producer.into(),
        });
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

fn read_artifact_mesh(out: &Path, relative: &str, producer: &str) -> Result<TriangleMesh> {
    let path = out.join(relative);
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path,
            producer: producer.into(),
        });
    }
    mesh_read(&path)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Spreads one stage seed into per-shape seeds (odd-multiplier affine map,
/// injective in the index).
fn per_shape_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x517C_C1B7_2722_0A95)
}

enum Source {
    Recipe(ShapeRecipe),
    Mesh(PathBuf),
}

struct ShapeJob {
    name: String,
    class: String,
    /// Fracture stream seed (the job's position in the enumeration).
    seed: u64,
    source: Source,
}

fn enumerate_jobs(d: &DatasetConfig) -> Result<Vec<ShapeJob>> {
    let mut jobs = Vec::new();
    if let Some(dir) = &d.mesh_dir {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("obj") | Some("ply")
                )
            })
            .collect();
        paths.sort();
        for path in paths {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("mesh")
                .to_string();
            jobs.push(ShapeJob {
                name,
                class: "meshes".into(),
                seed: jobs.len() as u64,
                source: Source::Mesh(path),
            });
        }
        if jobs.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "mesh_dir {} holds no .obj or .ply files",
                dir.display()
            )));
        }
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(d.seed);
        for &family in &d.classes {
            for i in 0..d.shapes_per_class {
                let recipe = ShapeRecipe {
                    family,
                    seed: rng.gen(),
                };
                jobs.push(ShapeJob {
                    name: format!("{}_{:04}", family.name(), i),
                    class: family.name().into(),
                    seed: jobs.len() as u64,
                    source: Source::Recipe(recipe),
                });
            }
        }
    }
    Ok(jobs)
}

enum ShapeResult {
    Accepted(Box<ShapeEntry>),
    Rejected(RejectedShape),
}

/// Errors that spoil one shape without invalidating the rest of the run.
fn isolates(e: &Error) -> bool {
    matches!(
        e,
        Error::OpenMesh(_)
            | Error::EmptyMesh
            | Error::EmptySurface
            | Error::DegenerateInput(_)
            | Error::Parse { .. }
    )
}

fn build_complete(job: &ShapeJob, params: &FractureParams) -> Result<(DynField, TriangleMesh)> {
    match &job.source {
        Source::Recipe(recipe) => {
            let field = recipe.field();
            let mesh = marching_cubes(|p| field.sdf(p), params.mesh_resolution, 0.0);
            if mesh.is_empty() {
                return Err(Error::EmptyMesh);
            }
            Ok((field, mesh))
        }
        Source::Mesh(path) => {
            let raw = mesh_read(path)?;
            let (mesh, _, _) = normalize_to_unit_cube(&raw)?;
            let field = MeshField::new(mesh.clone())?;
            Ok((Arc::new(field), mesh))
        }
    }
}

fn fracture_one(job: &ShapeJob, d: &DatasetConfig, out: &Path) -> Result<ShapeResult> {
    let rejected = |reason: String| {
        Ok(ShapeResult::Rejected(RejectedShape {
            name: job.name.clone(),
            class: job.class.clone(),
            reason,
        }))
    };

    let (field, complete_mesh) = match build_complete(job, &d.fracture_params) {
        Ok(ok) => ok,
        Err(e) if isolates(&e) => return rejected(e.to_string()),
        Err(e) => return Err(e),
    };

    let outcome = attempt_fracture(
        Arc::clone(&field),
        &complete_mesh,
        &d.fracture,
        job.seed,
        &d.fracture_params,
    )?;
    let tuple = match outcome {
        FractureOutcome::Accepted(tuple) => tuple,
        FractureOutcome::Rejected { attempts } => {
            return rejected(format!("retention window missed in {attempts} attempts"))
        }
    };

    let files = ShapeFiles::for_shape(&job.name);
    create_dir(&out.join("shapes").join(&job.name))?;
    mesh_write(&out.join(&files.complete), &complete_mesh, MeshFormat::Obj)?;
    mesh_write(&out.join(&files.fractured), &tuple.fractured_mesh, MeshFormat::Obj)?;
    mesh_write(
        &out.join(&files.restoration),
        &tuple.restoration_mesh,
        MeshFormat::Obj,
    )?;
    write_json(&out.join(&files.break_surface), tuple.brk.surface())?;

    Ok(ShapeResult::Accepted(Box::new(ShapeEntry {
        name: job.name.clone(),
        class: job.class.clone(),
        split: Split::Train,
        seed: job.seed,
        recipe: match &job.source {
            Source::Recipe(recipe) => Some(*recipe),
            Source::Mesh(_) => None,
        },
        primitive: tuple.primitive.clone(),
        attempt: tuple.attempt,
        removed_fraction: tuple.removed_fraction,
        files,
    })))
}

/// Per-class split assignment in shape order: the first ~70% train, the
/// next ~10% validation, the rest test.
fn assign_splits(entries: &mut [ShapeEntry], split: [f64; 3]) {
    let mut classes: Vec<String> = Vec::new();
    for e in entries.iter() {
        if !classes.contains(&e.class) {
            classes.push(e.class.clone());
        }
    }
    for class in classes {
        let idx: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == class)
            .map(|(i, _)| i)
            .collect();
        let n = idx.len() as f64;
        let n_train = (n * split[0]).round() as usize;
        let n_val = ((n * (split[0] + split[1])).round() as usize).saturating_sub(n_train);
        for (k, &i) in idx.iter().enumerate() {
            entries[i].split = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractureSummary {
    pub shapes: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Generates (or loads) the complete shapes, fractures each one, and writes
/// meshes, break surfaces, and the manifest under `out`.
pub fn cmd_fracture(config: &PipelineConfig, out: &Path) -> Result<Manifest> {
    config.validate()?;
    let d = &config.dataset;
    create_dir(&out.join("shapes"))?;

    let jobs = enumerate_jobs(d)?;
    let results: Vec<Result<ShapeResult>> = jobs
        .par_iter()
        .map(|job| fracture_one(job, d, out))
        .collect();

    let mut shapes = Vec::new();
    let mut rejected = Vec::new();
    for result in results {
        match result? {
            ShapeResult::Accepted(entry) => shapes.push(*entry),
            ShapeResult::Rejected(r) => rejected.push(r),
        }
    }
    assign_splits(&mut shapes, d.split);

    let manifest = Manifest {
        shapes,
        rejected,
        fracture: d.fracture.clone(),
        fracture_params: d.fracture_params.clone(),
    };
    manifest.write(out)?;
    write_json(
        &out.join("fracture_summary.json"),
        &FractureSummary {
            shapes: jobs.len(),
            accepted: manifest.shapes.len(),
            rejected: manifest.rejected.len(),
        },
    )?;
    Ok(manifest)
}

/// Rebuilds a shape's tuple from its artifacts: the complete field from the
/// recipe (or stored mesh), the break field from the stored surface, and
/// the fracture region from the fractured mesh.
pub fn load_tuple(out: &Path, manifest: &Manifest, entry: &ShapeEntry) -> Result<ShapeTuple> {
    let complete: DynField = match &entry.recipe {
        Some(recipe) => recipe.field(),
        None => Arc::new(MeshField::new(read_artifact_mesh(
            out,
            &entry.files.complete,
            "mendfield fracture",
        )?)?),
    };
    let surface: BreakSurface =
        read_json(&out.join(&entry.files.break_surface), "mendfield fracture")?;
    let brk = Arc::new(BreakField::from_surface(
        surface,
        manifest.fracture_params.patch_grid,
    )?);
    let fractured_mesh = read_artifact_mesh(out, &entry.files.fractured, "mendfield fracture")?;
    let restoration_mesh =
        read_artifact_mesh(out, &entry.files.restoration, "mendfield fracture")?;
    let fracture_region: Vec<Vec3> = fractured_mesh
        .vertices
        .iter()
        .copied()
        .filter(|v| complete.sdf(*v).abs() > FRACTURE_REGION_EPS)
        .collect();
    Ok(ShapeTuple::assemble(
        complete,
        brk,
        entry.primitive.clone(),
        fractured_mesh,
        restoration_mesh,
        fracture_region,
        entry.attempt,
        entry.removed_fraction,
    ))
}

fn read_probe_set(out: &Path, entry: &ShapeEntry) -> Result<ProbeSet> {
    let path = out.join(&entry.files.samples);
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path,
            producer: "mendfield sample".into(),
        });
    }
    ProbeSet::read_from(&path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub shapes: usize,
    pub points_per_shape: usize,
}

/// Draws and labels probe points for every accepted shape.
pub fn cmd_sample(config: &PipelineConfig, out: &Path) -> Result<SampleSummary> {
    config.validate()?;
    let manifest = Manifest::read(out)?;
    let s = &config.sampling;

    let results: Vec<Result<()>> = manifest
        .shapes
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let tuple = load_tuple(out, &manifest, entry)?;
            let points = sample_points(
                &tuple,
                s.n_points,
                s.surface_fraction,
                (s.noise_sigmas[0], s.noise_sigmas[1]),
                per_shape_seed(s.seed, i),
            )?;
            let probes = label_points(&tuple, &points);
            probes.write_to(&out.join(&entry.files.samples))
        })
        .collect();
    results.into_iter().collect::<Result<()>>()?;

    let summary = SampleSummary {
        shapes: manifest.shapes.len(),
        points_per_shape: s.n_points,
    };
    write_json(&out.join("sample_summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub shapes: usize,
    pub epochs: usize,
    pub final_losses: Option<serde_json::Value>,
}

/// Trains the autodecoder on the train split; writes the checkpoint, the
/// per-epoch loss log, and a run summary under `out/train/`.
pub fn cmd_train(config: &PipelineConfig, out: &Path) -> Result<TrainOutcome> {
    config.validate()?;
    let manifest = Manifest::read(out)?;
    let entries = manifest.split_shapes(Split::Train);
    if entries.is_empty() {
        return Err(Error::InvalidConfig(
            "the manifest has no shapes in the train split".into(),
        ));
    }
    let dataset: Vec<ProbeSet> = entries
        .iter()
        .map(|entry| read_probe_set(out, entry))
        .collect::<Result<_>>()?;

    let dir = out.join("train");
    create_dir(&dir)?;
    let log_path = dir.join("log.jsonl");
    let mut log = BufWriter::new(
        fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?,
    );
    let outcome = train(
        &dataset,
        &config.train,
        Some(&mut log),
        Some(&dir.join("checkpoint.bin")),
    )?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    write_json(
        &dir.join("summary.json"),
        &TrainSummary {
            shapes: dataset.len(),
            epochs: config.train.epochs,
            final_losses: outcome.log.last().map(|r| {
                let mut v = serde_json::to_value(r).expect("epoch record serializes");
                // Timing lives in log.jsonl; the summary stays rerun-stable.
                if let Some(map) = v.as_object_mut() {
                    map.remove("wall_time");
                }
                v
            }),
        },
    )?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferShapeSummary {
    pub name: String,
    pub empty: bool,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferSummary {
    pub shapes: Vec<InferShapeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredCodes {
    z_c: Vec<f64>,
    z_b: Vec<f64>,
}

/// Recovers codes for every test shape from the trained checkpoint and
/// extracts restoration and complete meshes under `out/infer/<shape>/`.
pub fn cmd_infer(config: &PipelineConfig, out: &Path) -> Result<InferSummary> {
    config.validate()?;
    let manifest = Manifest::read(out)?;
    let ckpt_path = out.join("train/checkpoint.bin");
    if !ckpt_path.exists() {
        return Err(Error::MissingArtifact {
            path: ckpt_path,
            producer: "mendfield train".into(),
        });
    }
    let ckpt = Checkpoint::read_from(&ckpt_path)?;
    ckpt.expect_arch(&config.train.arch_c, &config.train.arch_b)?;
    if ckpt.mask != config.train.mask {
        return Err(Error::ArchitectureMismatch(format!(
            "checkpoint feature mask {:?} differs from configured {:?}",
            ckpt.mask, config.train.mask
        )));
    }
    let model = Model::from_checkpoint(&ckpt, config.train.weights)?;

    let entries = manifest.split_shapes(Split::Test);
    let schedule = config.infer.schedule();
    create_dir(&out.join("infer"))?;

    let shapes: Vec<InferShapeSummary> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| -> Result<InferShapeSummary> {
            let probes = read_probe_set(out, entry)?;
            let mut shape_schedule = schedule;
            shape_schedule.seed = per_shape_seed(schedule.seed, i);
            let result = repair(
                &model,
                &probes,
                &config.train.weights,
                &shape_schedule,
                config.infer.resolution,
            )?;

            let dir = out.join("infer").join(&entry.name);
            create_dir(&dir)?;
            mesh_write(&dir.join("restoration.obj"), &result.restoration, MeshFormat::Obj)?;
            mesh_write(&dir.join("complete.obj"), &result.complete, MeshFormat::Obj)?;
            write_json(
                &dir.join("codes.json"),
                &StoredCodes {
                    z_c: result.z_c.clone(),
                    z_b: result.z_b.clone(),
                },
            )?;
            write_json(&dir.join("trace.json"), &result.trace)?;
            Ok(InferShapeSummary {
                name: entry.name.clone(),
                empty: result.empty,
                final_loss: result.trace.last().copied(),
            })
        })
        .collect::<Result<_>>()?;

    let summary = InferSummary { shapes };
    write_json(&out.join("infer/summary.json"), &summary)?;
    Ok(summary)
}

/// Scores every test-split restoration against its ground truth and writes
/// the report as JSON and CSV under `out/eval/`.
pub fn cmd_eval(config: &PipelineConfig, out: &Path) -> Result<EvalReport> {
    config.validate()?;
    let manifest = Manifest::read(out)?;
    let entries = manifest.split_shapes(Split::Test);
    let e = &config.eval;

    let evals: Vec<ShapeEval> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| -> Result<ShapeEval> {
            let gt_r = read_artifact_mesh(out, &entry.files.restoration, "mendfield fracture")?;
            let fractured =
                read_artifact_mesh(out, &entry.files.fractured, "mendfield fracture")?;
            let predicted = read_artifact_mesh(
                out,
                &format!("infer/{}/restoration.obj", entry.name),
                "mendfield infer",
            )?;
            let complete: DynField = match &entry.recipe {
                Some(recipe) => recipe.field(),
                None => Arc::new(MeshField::new(read_artifact_mesh(
                    out,
                    &entry.files.complete,
                    "mendfield fracture",
                )?)?),
            };

            let seed = per_shape_seed(e.seed, i);
            let empty = predicted.is_empty();
            let (cd, nc) = if empty {
                (None, None)
            } else {
                (
                    Some(chamfer_distance(&predicted, &gt_r, e.n_samples, seed)?),
                    Some(normal_consistency(&predicted, &gt_r, e.n_samples, seed)?),
                )
            };
            let region = nfre(
                &fractured,
                |p| complete.sdf(p).abs() > EVAL_MASK_EPS,
                &predicted,
                &gt_r,
                e.n_samples,
                e.eta,
                seed,
            )?;
            Ok(ShapeEval {
                name: entry.name.clone(),
                class: entry.class.clone(),
                cd,
                nc,
                nfre: Some(region),
                empty,
            })
        })
        .collect::<Result<_>>()?;

    let report = EvalReport::aggregate(evals);
    create_dir(&out.join("eval"))?;
    write_json(&out.join("eval/report.json"), &report)?;
    let csv_path = out.join("eval/report.csv");
    fs::write(&csv_path, report.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Architecture;
    use crate::pipeline::families::Family;

    /// A config small enough to run the whole pipeline in seconds: two tiny
    /// networks, coarse meshes, and a generous retention window so the
    /// fixed-seed fractures land reliably.
    fn tiny_config() -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.dataset.classes = vec![Family::Spheres];
        config.dataset.shapes_per_class = 3;
        config.dataset.fracture_params.mesh_resolution = 40;
        config.dataset.fracture_params.retention = [0.02, 0.6];
        config.dataset.fracture_params.patch_grid = 110;
        config.sampling.n_points = 1200;
        config.train.arch_c = Architecture {
            code_dim: 6,
            hidden_width: 24,
            depth: 3,
            skip_layer: 1,
        };
        config.train.arch_b = Architecture {
            code_dim: 4,
            hidden_width: 24,
            depth: 3,
            skip_layer: 1,
        };
        config.train.epochs = 40;
        config.train.points_per_shape = 256;
        config.train.snapshot_every = 0;
        config.infer.steps = 25;
        config.infer.resolution = 24;
        config.eval.n_samples = 600;
        config
    }

    #[test]
    fn fracture_reruns_are_byte_identical() {
        let config = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let manifest_a = cmd_fracture(&config, dir_a.path()).unwrap();
        let manifest_b = cmd_fracture(&config, dir_b.path()).unwrap();
        assert!(!manifest_a.shapes.is_empty(), "nothing was accepted");
        assert_eq!(manifest_a, manifest_b);

        let bytes = |dir: &Path, rel: &str| fs::read(dir.join(rel)).unwrap();
        assert_eq!(
            bytes(dir_a.path(), MANIFEST_FILE),
            bytes(dir_b.path(), MANIFEST_FILE)
        );
        let first = &manifest_a.shapes[0].files;
        for rel in [&first.fractured, &first.break_surface] {
            assert_eq!(bytes(dir_a.path(), rel), bytes(dir_b.path(), rel));
        }
    }

    #[test]
    fn impossible_retention_rejects_every_shape_without_failing() {
        let mut config = tiny_config();
        config.dataset.shapes_per_class = 2;
        // Spheres far too small to ever remove 2% of the vertices (half-space
        // primitives ignore the scale, so they are excluded).
        config.dataset.fracture.kinds = vec![crate::fracture::FractureKind::Sphere];
        config.dataset.fracture.scale_range = [1e-3, 2e-3];
        let dir = tempfile::tempdir().unwrap();
        let manifest = cmd_fracture(&config, dir.path()).unwrap();
        assert!(manifest.shapes.is_empty());
        assert_eq!(manifest.rejected.len(), 2);
        for r in &manifest.rejected {
            assert!(r.reason.contains("15 attempts"), "reason: {}", r.reason);
        }
    }

    #[test]
    fn an_open_mesh_is_rejected_while_others_proceed() {
        let meshes = tempfile::tempdir().unwrap();
        let sphere = TriangleMesh::icosphere(0.8, 2);
        mesh_write(&meshes.path().join("a_sphere.obj"), &sphere, MeshFormat::Obj).unwrap();
        let quad = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        mesh_write(&meshes.path().join("b_open.obj"), &quad, MeshFormat::Obj).unwrap();

        let mut config = tiny_config();
        config.dataset.mesh_dir = Some(meshes.path().to_path_buf());
        let dir = tempfile::tempdir().unwrap();
        let manifest = cmd_fracture(&config, dir.path()).unwrap();

        let open = manifest
            .rejected
            .iter()
            .find(|r| r.name == "b_open")
            .expect("open mesh must be rejected");
        assert!(open.reason.contains("not closed"), "reason: {}", open.reason);
        assert!(
            manifest.shapes.iter().any(|s| s.name == "a_sphere")
                || manifest.rejected.iter().any(|r| r.name == "a_sphere"),
            "the closed mesh must still be processed"
        );
    }

    #[test]
    fn splits_follow_the_fractions_in_order() {
        let mut entries: Vec<ShapeEntry> = (0..10)
            .map(|i| ShapeEntry {
                name: format!("s{i}"),
                class: "c".into(),
                split: Split::Train,
                seed: i,
                recipe: None,
                primitive: Primitive::new(crate::geometry::PrimitiveShape::HalfSpace),
                attempt: 1,
                removed_fraction: 0.1,
                files: ShapeFiles::for_shape(&format!("s{i}")),
            })
            .collect();
        assign_splits(&mut entries, [0.7, 0.1, 0.2]);
        let splits: Vec<Split> = entries.iter().map(|e| e.split).collect();
        assert_eq!(&splits[..7], &[Split::Train; 7]);
        assert_eq!(splits[7], Split::Val);
        assert_eq!(&splits[8..], &[Split::Test; 2]);
    }

    #[test]
    fn the_whole_pipeline_runs_and_reports() {
        let config = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();

        let manifest = cmd_fracture(&config, out).unwrap();
        assert!(
            manifest.split_shapes(Split::Test).len() == 1
                && manifest.split_shapes(Split::Train).len() == 2,
            "tiny dataset must split 2/0/1, got {:?}",
            manifest.shapes.iter().map(|s| s.split).collect::<Vec<_>>()
        );

        // Stages past their inputs name the producing command.
        match cmd_train(&config, out) {
            Err(Error::MissingArtifact { producer, .. }) => {
                assert_eq!(producer, "mendfield sample")
            }
            other => panic!("expected a missing-artifact error, got {other:?}"),
        }
        match cmd_infer(&config, out) {
            Err(Error::MissingArtifact { producer, .. }) => {
                assert_eq!(producer, "mendfield train")
            }
            other => panic!("expected a missing-artifact error, got {other:?}"),
        }

        cmd_sample(&config, out).unwrap();
        for entry in &manifest.shapes {
            assert!(out.join(&entry.files.samples).exists());
        }

        cmd_train(&config, out).unwrap();
        assert!(out.join("train/checkpoint.bin").exists());
        let log = fs::read_to_string(out.join("train/log.jsonl")).unwrap();
        assert_eq!(log.lines().count(), config.train.epochs);

        // A mask that disagrees with the checkpoint is rejected.
        let mut wrong = config.clone();
        wrong.train.mask.nf = false;
        assert!(matches!(
            cmd_infer(&wrong, out),
            Err(Error::ArchitectureMismatch(_))
        ));

        let infer = cmd_infer(&config, out).unwrap();
        assert_eq!(infer.shapes.len(), 1);
        let name = &infer.shapes[0].name;
        assert!(out.join(format!("infer/{name}/restoration.obj")).exists());

        let report = cmd_eval(&config, out).unwrap();
        assert_eq!(report.shapes.len(), 1);
        assert_eq!(report.classes.len(), 1);
        assert!(out.join("eval/report.json").exists());
        let csv = fs::read_to_string(out.join("eval/report.csv")).unwrap();
        assert!(csv.starts_with("metric,spheres"));

        // Reruns of eval are byte-identical.
        let again = fs::read_to_string(out.join("eval/report.csv")).unwrap();
        assert_eq!(csv, again);
    }
}
