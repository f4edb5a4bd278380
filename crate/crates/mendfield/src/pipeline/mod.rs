//! Dataset generation, configuration, and the staged pipeline commands.
//!
//! [`families`] builds procedural complete shapes, [`config`] holds the
//! TOML-backed settings for every stage, and [`commands`] runs the stages
//! against one output directory.

pub mod commands;
pub mod config;
pub mod families;

pub use commands::{
    cmd_eval, cmd_fracture, cmd_infer, cmd_sample, cmd_train, Manifest, RejectedShape,
    ShapeEntry, ShapeFiles, Split, EVAL_MASK_EPS, MANIFEST_FILE,
};
pub use config::{
    DatasetConfig, EvalConfig, InferSection, PipelineConfig, SamplingConfig,
};
pub use families::{Csg, CsgField, Family, ShapeRecipe};
