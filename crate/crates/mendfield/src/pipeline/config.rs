//! Pipeline configuration: one TOML document with a section per stage.
//!
//! Every section has workable desk-scale defaults, so a minimal config can
//! be empty; unknown keys are rejected everywhere to catch misspellings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracture::{FractureParams, FracturePrimitiveSpec};
use crate::learn::{InferConfig, TrainConfig, DEFAULT_EXTRACT_RESOLUTION};
use crate::pipeline::families::Family;
use crate::sampling::{DEFAULT_NOISE_SIGMAS, DEFAULT_N_POINTS, DEFAULT_SURFACE_FRACTION};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
    pub infer: InferSection,
    pub eval: EvalConfig,
}

/// What to fracture: either procedural families (one class each) or a
/// directory of complete meshes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub classes: Vec<Family>,
    pub shapes_per_class: usize,
    /// Fracture meshes from this directory instead of generating shapes.
    pub mesh_dir: Option<PathBuf>,
    /// Train/validation/test fractions; must sum to 1.
    pub split: [f64; 3],
    /// Seed for the procedural shape parameters.
    pub seed: u64,
    pub fracture: FracturePrimitiveSpec,
    pub fracture_params: FractureParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            classes: vec![Family::Spheres, Family::Boxes],
            shapes_per_class: 8,
            mesh_dir: None,
            split: [0.7, 0.1, 0.2],
            seed: 0,
            fracture: FracturePrimitiveSpec::default(),
            fracture_params: FractureParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub n_points: usize,
    pub surface_fraction: f64,
    pub noise_sigmas: [f64; 2],
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_points: DEFAULT_N_POINTS,
            surface_fraction: DEFAULT_SURFACE_FRACTION,
            noise_sigmas: [DEFAULT_NOISE_SIGMAS.0, DEFAULT_NOISE_SIGMAS.1],
            seed: 0,
        }
    }
}

/// Code recovery schedule plus the extraction resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferSection {
    pub steps: usize,
    /// Points drawn per step; `0` uses the full probe set every step.
    pub points_per_step: usize,
    pub lr: f64,
    pub seed: u64,
    /// Marching-cubes resolution for the output meshes.
    pub resolution: usize,
}

impl Default for InferSection {
    fn default() -> Self {
        let schedule = InferConfig::default();
        InferSection {
            steps: schedule.steps,
            points_per_step: schedule.points_per_step,
            lr: schedule.lr,
            seed: schedule.seed,
            resolution: DEFAULT_EXTRACT_RESOLUTION,
        }
    }
}

impl InferSection {
    pub fn schedule(&self) -> InferConfig {
        InferConfig {
            steps: self.steps,
            points_per_step: self.points_per_step,
            lr: self.lr,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_samples: usize,
    pub eta: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_samples: 30_000,
            eta: 0.02,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.mesh_dir.is_none() && d.classes.is_empty() {
            return Err(Error::InvalidConfig(
                "dataset needs procedural classes or a mesh_dir".into(),
            ));
        }
        if d.mesh_dir.is_none() && d.shapes_per_class == 0 {
            return Err(Error::InvalidConfig("shapes_per_class must be ≥ 1".into()));
        }
        if let Some(dir) = &d.mesh_dir {
            if !dir.is_dir() {
                return Err(Error::InvalidConfig(format!(
                    "mesh_dir {} is not a directory",
                    dir.display()
                )));
            }
        }
        if d.split.iter().any(|&f| !(0.0..=1.0).contains(&f))
            || (d.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be in [0,1] and sum to 1, got {:?}",
                d.split
            )));
        }
        d.fracture.validate()?;
        if d.fracture_params.mesh_resolution < 2 {
            return Err(Error::InvalidConfig(
                "mesh_resolution must be at least 2".into(),
            ));
        }

        let s = &self.sampling;
        if s.n_points == 0 {
            return Err(Error::InvalidConfig("sampling n_points must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&s.surface_fraction) {
            return Err(Error::InvalidConfig(format!(
                "surface_fraction must lie in [0,1], got {}",
                s.surface_fraction
            )));
        }
        if s.noise_sigmas.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidConfig("noise sigmas must be ≥ 0".into()));
        }

        self.train.validate()?;

        if self.infer.lr <= 0.0 {
            return Err(Error::InvalidConfig(
                "inference learning rate must be positive".into(),
            ));
        }
        if self.infer.resolution < 2 {
            return Err(Error::InvalidConfig(
                "extraction resolution must be at least 2".into(),
            ));
        }

        if self.eval.n_samples == 0 {
            return Err(Error::InvalidConfig("eval n_samples must be ≥ 1".into()));
        }
        if self.eval.eta <= 0.0 {
            return Err(Error::InvalidConfig("eval eta must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        let text = toml::to_string_pretty(&config).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn an_empty_document_is_a_full_default_config() {
        let config: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(config, PipelineConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_in_every_section() {
        for text in [
            "unknown_top = 1",
            "[dataset]\nshapez_per_class = 3",
            "[sampling]\nn_pointz = 10",
            "[train]\nepochz = 5",
            "[infer]\nstepz = 5",
            "[eval]\netaa = 0.5",
        ] {
            assert!(
                toml::from_str::<PipelineConfig>(text).is_err(),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn bad_splits_and_empty_sources_fail_validation() {
        let mut config = PipelineConfig::default();
        config.dataset.split = [0.7, 0.2, 0.2];
        assert!(config.validate().is_err());

        let mut config = PipelineConfig::default();
        config.dataset.classes.clear();
        assert!(config.validate().is_err());

        let mut config = PipelineConfig::default();
        config.dataset.mesh_dir = Some(PathBuf::from("/definitely/not/here"));
        assert!(config.validate().is_err());
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[dataset]\nshapes_per_class = \"many\"\n").unwrap();
        match PipelineConfig::load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn family_names_parse_in_configs() {
        let config: PipelineConfig = toml::from_str(
            "[dataset]\nclasses = [\"mugs\", \"bowls\", \"superellipsoids\"]\n",
        )
        .unwrap();
        assert_eq!(
            config.dataset.classes,
            vec![Family::Mugs, Family::Bowls, Family::Superellipsoids]
        );
    }
}
