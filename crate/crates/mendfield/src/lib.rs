//! Repairing fractured 3D shapes with joint implicit fields.
//!
//! A fractured shape is modeled as the Boolean intersection of a *complete*
//! shape `C` and a *break* shape `B`; the missing piece (the *restoration*
//! `R`) is the intersection of `C` with the complement of `B`. Every shape is
//! represented by a joint field — occupancy, signed distance, and unit
//! surface normal at any query point — so fracturing, learning, and repair
//! all reduce to operations on fields:
//!
//! * [`fracture`] breaks a complete mesh with a synthetic fracture primitive
//!   and fits a smooth thin-plate-spline break surface to the fracture region.
//! * [`sampling`] turns shapes into labeled point sets for learning.
//! * [`neural`] is a small autodecoder: per-shape latent codes plus a shared
//!   MLP that predicts the joint field of `C` and `B` from a code and a point.
//! * [`learn`] trains the autodecoder, infers codes for unseen fractured
//!   shapes, and extracts the restoration mesh from the learned fields.
//! * [`metrics`] scores predicted restorations against ground truth.
//!
//! The `examples/` directory is the guided tour; each example is a runnable
//! slice of the pipeline:
//!
//! ```text
//! cargo run --release --example field_composition
//! cargo run --release --example extract_isosurface
//! cargo run --release --example break_surface_fit
//! cargo run --release --example fracture_one_shape
//! cargo run --release --example label_probes
//! cargo run --release --example train_pair
//! cargo run --release --example repair_pipeline
//! cargo run --release --example eval_metrics
//! ```
//!
//! The same pipeline is scriptable through the `mendfield` binary
//! (`fracture`, `sample`, `train`, `infer`, `eval` subcommands).

pub mod error;
pub mod math;

pub mod fields;
pub mod fracture;
pub mod geometry;
pub mod learn;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod sampling;
pub mod spatial;

pub use error::{Error, Result};
